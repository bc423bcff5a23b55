fn main() {
    std::process::exit(ans_service::cli::main());
}
