//! Boots a registry node over HTTPS in a temporary directory, then talks to
//! it with the blocking client: register, verified resolve, CRL, health.
//!
//! ```text
//! cargo run -p ans-service --example http_roundtrip
//! ```

use std::sync::Arc;

use ans_core::clock::{rfc3339, Clock, SystemClock};
use ans_core::messages::RegistrationRequest;
use ans_core::pki::{PrivateKey, RevocationList, SignatureAlgorithm};
use ans_core::{AnsName, Resolver};
use ans_service::home::{self, InitOptions};
use ans_service::probe::HttpProbe;
use ans_service::{spawn, AnsClient, AppState, RateLimitConfig, RateLimiter, ServiceConfig, TlsMaterial};
use serde_json::json;

const PASSPHRASE: &str = "example only";

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    home::init(dir.path(), PASSPHRASE, &InitOptions::default(), clock.clone()).unwrap();
    let cfg = ServiceConfig::load(&dir.path().join(home::CONFIG_FILE)).unwrap();
    let registry = Arc::new(home::open_registry(&cfg, PASSPHRASE, clock.clone()).unwrap());
    let anchor = registry.trust_anchor().clone();
    let (certs, key) = home::tls_material(&cfg, PASSPHRASE).unwrap();
    let state = AppState {
        registry,
        limiter: Arc::new(RateLimiter::new(RateLimitConfig::default(), clock.clone())),
        probe: Arc::new(HttpProbe::new()),
        crl_file: Some(cfg.data_dir.join(home::CRL_FILE)),
    };
    let node = spawn(state, "127.0.0.1:0".parse().unwrap(), Some(TlsMaterial { certs, key })).unwrap();
    println!("serving on {}", node.url());

    let client = AnsClient::new(&node.url(), Some(&anchor)).unwrap();
    let name: AnsName = "mcp://summarizer.TextSummary.ExampleCorp.v1.4.0".parse().unwrap();
    let agent_key = PrivateKey::generate(SignatureAlgorithm::EcdsaP256Sha256);
    let ext = json!({
        "description": "summarises documents",
        "mcpEndpoint": "https://summarizer.example/mcp",
        "input_schema": {"type": "string"},
        "output_schema": {"type": "string"}
    });
    let req =
        RegistrationRequest::for_key(&name, &agent_key, Some("https://summarizer.example/mcp".into()), ext).unwrap();
    let reg = client.register(&req).unwrap();
    println!("registered {} -> {}", reg.ans_name, reg.agent_uuid);

    let resolver = Resolver::new(
        AnsClient::new(&node.url(), Some(&anchor)).unwrap(),
        anchor.clone(),
        clock,
    );
    let found = resolver
        .resolve("mcp://summarizer.TextSummary.ExampleCorp.v1", "^1.0.0")
        .unwrap();
    println!(
        "resolved   {} (verified, cached until {})",
        found.endpoint,
        rfc3339(found.expires_at)
    );

    let crl = RevocationList::from_pem_verified(&client.crl().unwrap(), &anchor).unwrap();
    println!("crl        next update {}", rfc3339(crl.next_update()));
    println!("healthz    {}", client.healthz().unwrap());

    node.shutdown().unwrap();
}
