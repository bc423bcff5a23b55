//! Parsing, formatting and lookup keys for ANS names.
//!
//! ```text
//! cargo run -p ans-core --example names
//! ```

use ans_core::ansname::{format_ansname, parse_ansname};
use ans_core::AnsName;

fn main() {
    let name = parse_ansname("a2a://textProcessor.DocumentTranslation.AcmeCorp.v2.1.0.hipaa").unwrap();
    println!("protocol   {}", name.protocol());
    println!("agent      {}", name.agent_id());
    println!("capability {}", name.capability());
    println!("provider   {}", name.provider());
    println!("version    {}", name.version());
    println!("extension  {:?}", name.extension());
    println!("lookup key {}", name.key().index_key());

    // Short versions are padded on the way in and spelled out on the way out.
    let short: AnsName = "mcp://summarizer.TextSummary.ExampleCorp.v1".parse().unwrap();
    println!("\nv1 -> {}", format_ansname(&short));

    for bad in [
        "a2a://bot.Chat.v1.0.0",
        "a2a:/bot.Chat.Acme.v1.0.0",
        "a2a://bot.Chat.Acme.1.0.0",
        "a2a://b@t.Chat.Acme.v1.0.0",
    ] {
        println!("rejected {bad:<30} {}", parse_ansname(bad).unwrap_err());
    }

    let odd = parse_ansname("xmpp://bot.Chat.Acme.v1.0.0").unwrap();
    println!("\n{} parses, unknown protocol: {}", odd, odd.has_unknown_protocol());
}
