//! Protocol adapters: each normalizes its own metadata format and enforces
//! its own registration rules.
//!
//! ```text
//! cargo run -p ans-core --example adapters
//! ```

use ans_core::adapters::{json_digest, AcpAdapter, AdapterSet};
use ans_core::messages::RegistrationRequest;
use ans_core::pki::{PrivateKey, SignatureAlgorithm};
use ans_core::AnsName;
use serde_json::{json, Value};

fn check(set: &AdapterSet, name: &str, ext: Value) {
    let name: AnsName = name.parse().unwrap();
    let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let req = RegistrationRequest::for_key(&name, &key, None, ext.clone()).unwrap();
    let adapter = set.get(name.protocol()).unwrap();
    let verdict = adapter.validate_registration(&req);
    println!("{name}");
    if verdict.is_valid() {
        let meta = adapter.parse_metadata(&ext).unwrap();
        for k in meta.keys() {
            println!("  {k} = {}", meta.get(k).unwrap());
        }
    } else {
        println!("  rejected: {}", verdict.violations.join("; "));
    }
}

fn main() {
    let set = AdapterSet::default();
    println!("adapters: {}\n", set.protocols().collect::<Vec<_>>().join(", "));

    let card = json!({"name": "translator", "url": "https://t.example/a2a", "skills": ["translate", "detect"]});
    check(
        &set,
        "a2a://translator.Translation.Acme.v1.0.0",
        json!({"agentCard": card, "cardDigest": json_digest(&card)}),
    );
    check(
        &set,
        "a2a://translator.Translation.Acme.v1.0.1",
        json!({"agentCard": card, "cardDigest": "00"}),
    );

    check(
        &set,
        "mcp://summarizer.TextSummary.ExampleCorp.v1.4.0",
        json!({
            "description": "summarises documents",
            "mcpEndpoint": "https://s.example/mcp",
            "input_schema": {"type": "string"},
            "output_schema": {"type": "string"}
        }),
    );
    check(
        &set,
        "mcp://summarizer.TextSummary.ExampleCorp.v1.4.1",
        json!({"description": "no endpoint"}),
    );

    let profile = json!({"name": "courier", "url": "https://c.example/acp", "capabilities": ["deliver"]});
    check(
        &set,
        "acp://courier.Delivery.Parcel.v3.0.0",
        json!({"role": "worker", "profile": profile}),
    );

    // Deployments can narrow the ACP role vocabulary.
    let mut strict = AdapterSet::empty();
    strict.register(Box::new(AcpAdapter::with_roles(["orchestrator"])));
    check(
        &strict,
        "acp://courier.Delivery.Parcel.v3.0.1",
        json!({"role": "worker", "profile": profile}),
    );
}
