//! Blocking HTTP client for the registry service.
//!
//! Also serves as the resolver's [`RegistryTransport`] over the network.
//! Must not be created or used from inside an async runtime.

use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use ans_core::messages::{
    CapabilityRequest, CapabilityResponse, ChallengeRequest, DeregistrationRequest, ErrorBody, OperationAck,
    RegistrationRequest, RegistrationResponse, RenewalRequest, RenewalResponse, RevocationRequest,
};
use ans_core::pki::Certificate;
use ans_core::registry::ChallengeOutcome;
use ans_core::resolver::{RegistryTransport, TransportError};

use crate::http::install_crypto_provider;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("network failure: {0}")]
    Network(String),
    #[error("registry answered {status}: {} ({})", body.message, body.code)]
    Api { status: u16, body: ErrorBody },
    #[error("undecodable answer: {0}")]
    Decode(String),
}

impl ClientError {
    /// Error code from the service envelope, if this is an API error.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.code),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnsClient {
    base: String,
    http: Client,
}

impl AnsClient {
    /// `trust_anchor` is the only root accepted for HTTPS. Plain `http://`
    /// base URLs ignore it.
    pub fn new(base_url: &str, trust_anchor: Option<&Certificate>) -> Result<Self, ClientError> {
        install_crypto_provider();
        let mut builder = Client::builder().timeout(Duration::from_secs(30));
        if let Some(ca) = trust_anchor {
            let root = reqwest::Certificate::from_der(ca.der()).map_err(|e| ClientError::Network(e.to_string()))?;
            builder = builder.tls_certs_only([root]);
        }
        let http = builder.build().map_err(|e| ClientError::Network(e.to_string()))?;
        Ok(AnsClient {
            base: base_url.trim_end_matches('/').to_string(),
            http,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn decode<T: DeserializeOwned>(resp: Response) -> Result<T, ClientError> {
        let status = resp.status();
        let text = resp.text().map_err(|e| ClientError::Network(e.to_string()))?;
        if status.is_success() {
            serde_json::from_str(&text).map_err(|e| ClientError::Decode(e.to_string()))
        } else {
            let body = serde_json::from_str(&text).unwrap_or_else(|_| ErrorBody {
                code: status.as_str().to_string(),
                message: text,
                details: Vec::new(),
            });
            Err(ClientError::Api {
                status: status.as_u16(),
                body,
            })
        }
    }

    pub fn post<B: Serialize + ?Sized, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let resp = self
            .http
            .post(self.url(path))
            .json(body)
            .send()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        AnsClient::decode(resp)
    }

    pub fn register(&self, req: &RegistrationRequest) -> Result<RegistrationResponse, ClientError> {
        self.post("/v1/register", req)
    }

    pub fn resolve(&self, req: &CapabilityRequest) -> Result<CapabilityResponse, ClientError> {
        self.post("/v1/resolve", req)
    }

    pub fn renew(&self, req: &RenewalRequest) -> Result<RenewalResponse, ClientError> {
        self.post("/v1/renew", req)
    }

    pub fn deregister(&self, req: &DeregistrationRequest) -> Result<OperationAck, ClientError> {
        self.post("/v1/deregister", req)
    }

    pub fn revoke(&self, req: &RevocationRequest) -> Result<OperationAck, ClientError> {
        self.post("/v1/revoke", req)
    }

    pub fn challenge(&self, req: &ChallengeRequest) -> Result<ChallengeOutcome, ClientError> {
        self.post("/v1/challenge", req)
    }

    /// The current CRL in PEM form.
    pub fn crl(&self) -> Result<String, ClientError> {
        let resp = self
            .http
            .get(self.url("/v1/crl"))
            .send()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        if resp.status() != StatusCode::OK {
            return AnsClient::decode(resp);
        }
        resp.text().map_err(|e| ClientError::Network(e.to_string()))
    }

    pub fn healthz(&self) -> Result<serde_json::Value, ClientError> {
        let resp = self
            .http
            .get(self.url("/v1/healthz"))
            .send()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        AnsClient::decode(resp)
    }
}

impl From<ClientError> for TransportError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Network(m) => TransportError::Network(m),
            ClientError::Decode(m) => TransportError::Rejected {
                code: "Decode".into(),
                message: m,
            },
            ClientError::Api { body, .. } => match body.code.as_str() {
                "AgentNotFound" | "UnknownAgent" => TransportError::NotFound(body.message),
                "IncompatibleVersion" => TransportError::IncompatibleVersion(body.message),
                "MalformedRange" => TransportError::MalformedRange(body.message),
                _ => TransportError::Rejected {
                    code: body.code,
                    message: body.message,
                },
            },
        }
    }
}

impl RegistryTransport for AnsClient {
    fn fetch_endpoint(&self, req: &CapabilityRequest) -> Result<CapabilityResponse, TransportError> {
        Ok(self.resolve(req)?)
    }

    fn fetch_crl(&self) -> Result<String, TransportError> {
        Ok(self.crl()?)
    }
}
