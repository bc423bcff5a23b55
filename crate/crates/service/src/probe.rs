//! Capability probe that delivers challenges to an agent over HTTP.

use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use ans_core::registry::{AgentRecord, CapabilityProbe, ProbeAnswer, ProbeError};

/// Body POSTed to the agent's endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeEnvelope {
    #[serde(rename = "type")]
    pub kind: String,
    pub input: String,
}

/// POSTs `{"type": "ans-challenge", "input": ...}` to the agent endpoint and
/// expects `{"answer": ..., "confidence": ...}` back.
#[derive(Debug, Clone, Default)]
pub struct HttpProbe {
    http: Option<Client>,
}

impl HttpProbe {
    pub fn new() -> Self {
        HttpProbe::default()
    }

    /// Uses a preconfigured client (for custom roots, proxies and so on).
    pub fn with_client(http: Client) -> Self {
        HttpProbe { http: Some(http) }
    }
}

impl CapabilityProbe for HttpProbe {
    fn probe(&self, record: &AgentRecord, input: &str, timeout: Duration) -> Result<ProbeAnswer, ProbeError> {
        crate::http::install_crypto_provider();
        let client = match &self.http {
            Some(c) => c.clone(),
            None => Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|e| ProbeError::Failed(e.to_string()))?,
        };
        let body = ChallengeEnvelope {
            kind: "ans-challenge".into(),
            input: input.to_string(),
        };
        let resp = client
            .post(&record.endpoint)
            .timeout(timeout)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ProbeError::Timeout
                } else {
                    ProbeError::Failed(e.to_string())
                }
            })?;
        if !resp.status().is_success() {
            return Err(ProbeError::Failed(format!("agent answered {}", resp.status())));
        }
        resp.json::<ProbeAnswer>().map_err(|e| {
            if e.is_timeout() {
                ProbeError::Timeout
            } else {
                ProbeError::Failed(e.to_string())
            }
        })
    }
}
