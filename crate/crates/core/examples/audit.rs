//! The append-only, hash-chained audit log and what an edit does to it.
//!
//! ```text
//! cargo run -p ans-core --example audit
//! ```

use ans_core::registry::AuditLog;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.ndjson");
    {
        let mut log = AuditLog::open(&path).unwrap();
        log.append(1_760_000_000, "register", "agent-a", br#"{"status":"active"}"#)
            .unwrap();
        log.append(1_760_000_060, "renew", "agent-a", br#"{"status":"active","renewed":1}"#)
            .unwrap();
        log.append(1_760_000_120, "deregister", "agent-a", br#"{"status":"deregistered"}"#)
            .unwrap();
        for e in log.entries().unwrap() {
            println!(
                "#{} {:<10} prev {}.. -> {}..",
                e.seq,
                e.op,
                &e.prev_hash[..12],
                &e.entry_hash[..12]
            );
        }
        println!("head seq {}", log.head().seq);
    }

    println!(
        "\nreopen: {}",
        if AuditLog::open(&path).is_ok() {
            "chain verifies"
        } else {
            "broken"
        }
    );

    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("renew", "revoke", 1)).unwrap();
    match AuditLog::open(&path) {
        Ok(_) => println!("edited log accepted"),
        Err(e) => println!("edited log refused: {e}"),
    }
}
