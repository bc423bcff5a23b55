//! Version ranges and negotiation across registered versions.
//!
//! ```text
//! cargo run -p ans-core --example versions
//! ```

use ans_core::ansname::version_negotiation;
use ans_core::{SemVer, VersionRange};

fn main() {
    let registered: Vec<SemVer> = ["1.0.0", "1.2.3", "1.0.0-rc1", "2.0.0"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    println!(
        "registered: {}",
        registered
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    );

    for range in ["*", "1.0.0", "^1.0.0", "~1.2.0", ">=1.1.0", "<1.0.0", "^3.0.0"] {
        let r: VersionRange = range.parse().unwrap();
        match version_negotiation(&registered, &r) {
            Ok(v) => println!("{range:>8} -> {v}"),
            Err(e) => println!("{range:>8} -> none ({e})"),
        }
    }

    let rc_only: Vec<SemVer> = vec!["1.0.0-rc1".parse().unwrap(), "1.0.0".parse().unwrap()];
    let star = VersionRange::wildcard();
    println!(
        "\n1.0.0 vs 1.0.0-rc1 under *: {}",
        version_negotiation(&rc_only, &star).unwrap()
    );
}
