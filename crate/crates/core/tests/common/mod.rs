#![allow(dead_code)]

use std::sync::Arc;

use ans_core::adapters::json_digest;
use ans_core::clock::{rfc3339, Clock, ManualClock};
use ans_core::messages::{RegistrationRequest, RegistrationResponse};
use ans_core::pki::{PrivateKey, SignatureAlgorithm};
use ans_core::registry::Registry;
use ans_core::AnsName;
use serde_json::{json, Value};

pub const T0: i64 = 1_760_000_000;

pub struct Fixture {
    pub clock: Arc<ManualClock>,
    pub registry: Arc<Registry>,
}

impl Fixture {
    pub fn new() -> Self {
        let clock = Arc::new(ManualClock::at_unix(T0));
        let registry = Arc::new(Registry::in_memory(clock.clone()).expect("registry"));
        Fixture { clock, registry }
    }

    pub fn now(&self) -> String {
        rfc3339(self.clock.unix())
    }

    pub fn advance(&self, secs: u64) {
        self.clock.advance(std::time::Duration::from_secs(secs));
    }

    /// Registers `name` under a fresh key; returns the key and response.
    pub fn register(&self, name: &str) -> (PrivateKey, RegistrationResponse) {
        let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
        let resp = self.register_with(name, &key).expect("registration accepted");
        (key, resp)
    }

    pub fn register_with(&self, name: &str, key: &PrivateKey) -> Result<RegistrationResponse, ans_core::RegistryError> {
        self.registry.register(&request(name, key))
    }
}

pub fn endpoint_for(name: &AnsName) -> String {
    format!(
        "https://{}.{}.example.com/v{}",
        name.agent_id().to_ascii_lowercase(),
        name.provider().to_ascii_lowercase(),
        name.version()
    )
}

/// Protocol extensions that satisfy the adapter for `name`'s protocol.
pub fn extensions(name: &AnsName) -> Value {
    let url = endpoint_for(name);
    match name.protocol().as_str() {
        "a2a" => {
            let card = json!({"name": name.agent_id(), "url": url, "skills": [name.capability()]});
            json!({"cardDigest": json_digest(&card), "agentCard": card})
        }
        "mcp" => json!({
            "description": format!("{} tool", name.capability()),
            "mcpEndpoint": url,
            "input_schema": {"type": "string"},
            "output_schema": {"type": "object", "properties": {"result": {"type": "string"}}}
        }),
        "acp" => json!({
            "role": "worker",
            "profile": {"name": name.agent_id(), "url": url, "capabilities": [name.capability()]}
        }),
        _ => json!({}),
    }
}

pub fn request(name: &str, key: &PrivateKey) -> RegistrationRequest {
    let name: AnsName = name.parse().expect("valid test name");
    RegistrationRequest::for_key(&name, key, None, extensions(&name)).expect("csr")
}

pub const PROTOCOLS: [&str; 3] = ["a2a", "mcp", "acp"];

/// The i-th generated agent name, cycling through the three protocols.
pub fn generated_name(i: usize) -> String {
    let proto = PROTOCOLS[i % 3];
    format!(
        "{proto}://agent{i}.Capability{}.Provider{}.v1.{}.0",
        i % 7,
        i % 5,
        i % 4
    )
}
