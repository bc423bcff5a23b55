#![allow(dead_code)]

use std::sync::Arc;

use ans_core::adapters::json_digest;
use ans_core::clock::{rfc3339, Clock, ManualClock};
use ans_core::messages::RegistrationRequest;
use ans_core::pki::{PrivateKey, SignatureAlgorithm};
use ans_core::registry::{AgentRecord, ProbeAnswer, ProbeError, Registry};
use ans_core::AnsName;
use ans_service::{router, AppState, RateLimitConfig, RateLimiter};
use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const T0: i64 = 1_760_000_000;

/// A registry behind the HTTP router, driven in-process with a manual clock.
pub struct Node {
    pub clock: Arc<ManualClock>,
    pub registry: Arc<Registry>,
    pub limiter: Arc<RateLimiter>,
    pub operator: PrivateKey,
    rt: tokio::runtime::Runtime,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Value,
    pub text: String,
}

impl Node {
    pub fn new() -> Self {
        Node::with_limits(RateLimitConfig::default())
    }

    pub fn with_limits(limits: RateLimitConfig) -> Self {
        let clock = Arc::new(ManualClock::at_unix(T0));
        let operator = PrivateKey::generate(SignatureAlgorithm::Ed25519);
        let registry = Registry::builder(clock.clone())
            .operator(operator.public_key())
            .build()
            .expect("registry");
        Node {
            limiter: Arc::new(RateLimiter::new(limits, clock.clone())),
            clock,
            registry: Arc::new(registry),
            operator,
            rt: tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("runtime"),
        }
    }

    pub fn state(&self) -> AppState {
        AppState {
            registry: self.registry.clone(),
            limiter: self.limiter.clone(),
            probe: Arc::new(|_: &AgentRecord, input: &str| -> Result<ProbeAnswer, ProbeError> {
                Ok(ProbeAnswer {
                    answer: if input.contains("love") { "positive" } else { "negative" }.into(),
                    confidence: 0.95,
                })
            }),
            crl_file: None,
        }
    }

    pub fn now(&self) -> String {
        rfc3339(self.clock.unix())
    }

    pub fn advance(&self, secs: u64) {
        self.clock.advance(std::time::Duration::from_secs(secs));
    }

    pub fn call(&self, method: Method, path: &str, body: Option<Value>) -> Reply {
        let req = Request::builder().method(method).uri(path);
        let req = match body {
            Some(v) => req
                .header("content-type", "application/json")
                .body(Body::from(serde_json::to_vec(&v).unwrap())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let app = router(self.state());
        self.rt.block_on(async move {
            let resp = app.oneshot(req).await.unwrap();
            let status = resp.status();
            let headers = resp.headers().clone();
            let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
            let text = String::from_utf8_lossy(&bytes).into_owned();
            let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
            Reply {
                status,
                headers,
                body,
                text,
            }
        })
    }

    pub fn post<T: serde::Serialize>(&self, path: &str, body: &T) -> Reply {
        self.call(Method::POST, path, Some(serde_json::to_value(body).unwrap()))
    }

    pub fn get(&self, path: &str) -> Reply {
        self.call(Method::GET, path, None)
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
            "output_schema": {"type": "object"}
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
    RegistrationRequest::for_key(&name, key, Some(endpoint_for(&name)), extensions(&name)).expect("csr")
}

pub const PROTOCOLS: [&str; 3] = ["a2a", "mcp", "acp"];

pub fn generated_name(i: usize) -> String {
    let proto = PROTOCOLS[i % 3];
    format!(
        "{proto}://agent{i}.Capability{}.Provider{}.v1.{}.0",
        i % 7,
        i % 5,
        i % 4
    )
}
