//! Client-side resolution: signature and chain checks, TTL caching, and
//! what happens when an answer is tampered with in transit.
//!
//! ```text
//! cargo run -p ans-core --example resolver
//! ```

use std::sync::Arc;
use std::time::Duration;

use ans_core::adapters::json_digest;
use ans_core::clock::ManualClock;
use ans_core::messages::{CapabilityRequest, CapabilityResponse, RegistrationRequest};
use ans_core::pki::{PrivateKey, SignatureAlgorithm};
use ans_core::registry::Registry;
use ans_core::resolver::{LocalTransport, RegistryTransport, TransportError};
use ans_core::{AnsName, Resolver};
use serde_json::json;

/// A man in the middle that points every answer somewhere else.
struct Redirect(LocalTransport);

impl RegistryTransport for Redirect {
    fn fetch_endpoint(&self, req: &CapabilityRequest) -> Result<CapabilityResponse, TransportError> {
        let mut resp = self.0.fetch_endpoint(req)?;
        resp.endpoint = "https://attacker.example.net".into();
        Ok(resp)
    }

    fn fetch_crl(&self) -> Result<String, TransportError> {
        self.0.fetch_crl()
    }
}

fn main() {
    let clock = Arc::new(ManualClock::at_unix(1_760_000_000));
    let registry = Arc::new(Registry::in_memory(clock.clone()).unwrap());
    for version in ["1.0.0", "1.4.2", "2.0.0"] {
        let name: AnsName = format!("a2a://planner.TripPlanning.Acme.v{version}").parse().unwrap();
        let url = format!("https://planner.acme.example/v{version}");
        let card = json!({"name": "planner", "url": url, "skills": ["plan"]});
        let ext = json!({"agentCard": card, "cardDigest": json_digest(&card)});
        let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
        registry
            .register(&RegistrationRequest::for_key(&name, &key, Some(url), ext).unwrap())
            .unwrap();
    }

    let resolver = Resolver::new(
        LocalTransport::new(registry.clone()),
        registry.trust_anchor().clone(),
        clock.clone(),
    );
    for range in ["^1.0.0", "*", "~1.0.0"] {
        let found = resolver.resolve("a2a://planner.TripPlanning.Acme.v0", range).unwrap();
        println!("{range:>7} -> {} ({})", found.endpoint, found.ans_name);
    }
    match resolver.resolve("a2a://planner.TripPlanning.Acme.v0", "^3.0.0") {
        Err(e) => println!(" ^3.0.0 -> {e}"),
        Ok(_) => unreachable!(),
    }

    println!("\nfetches so far: {}", resolver.fetch_count());
    clock.advance(Duration::from_secs(299));
    resolver
        .resolve("a2a://planner.TripPlanning.Acme.v0", "^1.0.0")
        .unwrap();
    println!("at +299s: {} (served from cache)", resolver.fetch_count());
    clock.advance(Duration::from_secs(2));
    resolver
        .resolve("a2a://planner.TripPlanning.Acme.v0", "^1.0.0")
        .unwrap();
    println!("at +301s: {} (re-validated)", resolver.fetch_count());

    let tampered = Resolver::new(
        Redirect(LocalTransport::new(registry.clone())),
        registry.trust_anchor().clone(),
        clock,
    );
    match tampered.resolve("a2a://planner.TripPlanning.Acme.v0", "*") {
        Err(e) => println!("\nredirected answer refused: {e}"),
        Ok(found) => unreachable!("accepted {}", found.endpoint),
    }
}
