//! Capability challenges: an agent that stops answering its known-answer
//! task correctly is quarantined and drops out of resolution.
//!
//! ```text
//! cargo run -p ans-core --example challenge
//! ```

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use ans_core::clock::ManualClock;
use ans_core::messages::{CapabilityRequest, RegistrationRequest};
use ans_core::pki::{PrivateKey, SignatureAlgorithm};
use ans_core::registry::{AgentRecord, Challenge, ProbeAnswer, ProbeError, Registry};
use ans_core::AnsName;
use serde_json::json;

fn main() {
    let registry = Registry::in_memory(Arc::new(ManualClock::at_unix(1_760_000_000))).unwrap();
    let name: AnsName = "mcp://sentimentAnalyzer.textAnalysis.ExampleCorp.v1.0.0"
        .parse()
        .unwrap();
    let ext = json!({
        "description": "sentiment of a sentence",
        "mcpEndpoint": "https://sentiment.example/mcp",
        "input_schema": {"type": "string"},
        "output_schema": {"type": "string"}
    });
    let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let reg = registry
        .register(&RegistrationRequest::for_key(&name, &key, None, ext).unwrap())
        .unwrap();
    let uuid = uuid::Uuid::parse_str(&reg.agent_uuid).unwrap();

    let healthy = AtomicBool::new(true);
    let agent = |_: &AgentRecord, input: &str| -> Result<ProbeAnswer, ProbeError> {
        let good = healthy.load(Ordering::SeqCst) && input.contains("love");
        Ok(ProbeAnswer {
            answer: if good { "positive" } else { "negative" }.into(),
            confidence: 0.95,
        })
    };
    let task = Challenge {
        input: "I love this product!".into(),
        expected: "positive".into(),
        claimed_accuracy: 0.9,
    };
    let query = CapabilityRequest::for_name(&name, "*");

    let out = registry.run_capability_challenge(&uuid, &task, &agent).unwrap();
    println!("round 1: passed={} status={}", out.passed, out.status_after.as_str());

    healthy.store(false, Ordering::SeqCst);
    for round in 2..=4 {
        let out = registry.run_capability_challenge(&uuid, &task, &agent).unwrap();
        println!(
            "round {round}: passed={} got {:?} status={} resolvable={}",
            out.passed,
            out.received,
            out.status_after.as_str(),
            registry.resolve(&query).is_ok()
        );
    }
}
