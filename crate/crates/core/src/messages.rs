//! Typed forms of the JSON documents exchanged with the registry.
//!
//! The six schema-pinned kinds (registration, renewal and capability
//! request/response pairs) live here alongside the signed operator and
//! owner requests (deregistration, revocation, challenge) that ride on the
//! same transport.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ansname::{AnsName, NameError, Protocol, SemVer};
use crate::canonical::canonicalize;
use crate::pki::{create_csr, PkiError, PrivateKey, PublicKey, Signature, SignatureAlgorithm, SubjectName};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateInfo {
    pub subject: String,
    pub issuer: String,
    /// CSR in PEM form, or a `vault:` reference to one.
    pub pem: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistrationRequest {
    pub protocol: Protocol,
    #[serde(rename = "agentID")]
    pub agent_id: String,
    pub agent_capability: String,
    pub provider: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub certificate: CertificateInfo,
    #[serde(default = "empty_object")]
    pub protocol_extensions: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl RegistrationRequest {
    /// A request for `name` carrying a CSR signed by `key`, with the
    /// certificate subject the registry expects for that name.
    pub fn for_key(
        name: &AnsName,
        key: &PrivateKey,
        endpoint: Option<String>,
        protocol_extensions: Value,
    ) -> Result<Self, PkiError> {
        let subject = SubjectName::for_agent(name);
        let csr = create_csr(key, &subject)?;
        Ok(RegistrationRequest {
            protocol: name.protocol().clone(),
            agent_id: name.agent_id().to_string(),
            agent_capability: name.capability().to_string(),
            provider: name.provider().to_string(),
            version: name.version().to_string(),
            extension: name.extension().map(str::to_string),
            endpoint,
            certificate: CertificateInfo {
                subject: subject.to_string(),
                issuer: String::new(),
                pem: csr.to_pem(),
            },
            protocol_extensions,
        })
    }

    pub fn ans_name(&self) -> Result<AnsName, NameError> {
        let version: SemVer = self.version.parse()?;
        AnsName::new(
            self.protocol.clone(),
            &self.agent_id,
            &self.agent_capability,
            &self.provider,
            version,
            self.extension.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IssuedCertificate {
    pub subject: String,
    pub issuer: String,
    pub serial_number: String,
    /// Leaf certificate followed by its issuer chain.
    pub pem: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegistrationStatus {
    Registered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistrationResponse {
    pub status: RegistrationStatus,
    pub ans_name: String,
    #[serde(rename = "agentUUID")]
    pub agent_uuid: String,
    pub endpoint: String,
    pub certificate: IssuedCertificate,
    pub registered_at: String,
    pub expires_at: String,
}

/// A detached signature as carried inside JSON requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureEnvelope {
    pub algorithm: SignatureAlgorithm,
    /// Base64 (standard alphabet, padded).
    pub value: String,
}

impl SignatureEnvelope {
    pub fn from_signature(sig: &Signature) -> Self {
        SignatureEnvelope {
            algorithm: sig.algorithm(),
            value: B64.encode(sig.as_bytes()),
        }
    }

    /// Decodes the envelope; `None` when the base64 is corrupt.
    pub fn to_signature(&self) -> Option<Signature> {
        let bytes = B64.decode(&self.value).ok()?;
        Some(Signature::from_parts(self.algorithm, bytes))
    }
}

/// A JSON request whose `signature` member signs the canonical form of the
/// remaining members.
pub trait SignedRequest: Serialize {
    fn signature(&self) -> &SignatureEnvelope;
    fn set_signature(&mut self, sig: SignatureEnvelope);

    fn signing_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_value(self).expect("request serializes");
        if let Value::Object(map) = &mut v {
            map.remove("signature");
        }
        canonicalize(&v).expect("request has no non-finite numbers")
    }

    fn sign_with(&mut self, key: &PrivateKey) {
        let sig = key.sign(&self.signing_bytes());
        self.set_signature(SignatureEnvelope::from_signature(&sig));
    }

    fn verify_with(&self, key: &PublicKey) -> bool {
        match self.signature().to_signature() {
            Some(sig) if sig.algorithm() == key.algorithm() => key.verify(&self.signing_bytes(), &sig),
            _ => false,
        }
    }
}

fn unsigned() -> SignatureEnvelope {
    SignatureEnvelope {
        algorithm: SignatureAlgorithm::Ed25519,
        value: String::new(),
    }
}

macro_rules! signed_request {
    ($t:ty) => {
        impl SignedRequest for $t {
            fn signature(&self) -> &SignatureEnvelope {
                &self.signature
            }
            fn set_signature(&mut self, sig: SignatureEnvelope) {
                self.signature = sig;
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenewRequestType {
    Renew,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RenewalRequest {
    pub request_type: RenewRequestType,
    pub ans_name: String,
    #[serde(rename = "agentUUID")]
    pub agent_uuid: String,
    pub requested_at: String,
    pub signature: SignatureEnvelope,
}

impl RenewalRequest {
    pub fn new(ans_name: &AnsName, agent_uuid: &str, requested_at: String) -> Self {
        RenewalRequest {
            request_type: RenewRequestType::Renew,
            ans_name: ans_name.to_string(),
            agent_uuid: agent_uuid.to_string(),
            requested_at,
            signature: unsigned(),
        }
    }
}

signed_request!(RenewalRequest);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenewalStatus {
    Renewed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RenewalResponse {
    pub status: RenewalStatus,
    pub ans_name: String,
    #[serde(rename = "agentUUID")]
    pub agent_uuid: String,
    pub certificate: IssuedCertificate,
    pub revoked_serial_number: String,
    pub renewed_at: String,
    pub expires_at: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolveRequestType {
    Resolve,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CapabilityRequest {
    pub request_type: ResolveRequestType,
    pub protocol: Protocol,
    #[serde(rename = "agentID")]
    pub agent_id: String,
    pub agent_capability: String,
    pub provider: String,
    /// A version or version range; `*` accepts any version.
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<String>,
}

impl CapabilityRequest {
    pub fn for_name(name: &AnsName, range: &str) -> Self {
        CapabilityRequest {
            request_type: ResolveRequestType::Resolve,
            protocol: name.protocol().clone(),
            agent_id: name.agent_id().to_string(),
            agent_capability: name.capability().to_string(),
            provider: name.provider().to_string(),
            version: range.to_string(),
            extension: name.extension().map(str::to_string),
        }
    }
}

/// The signed resolution answer. `data` is the base64 of the canonical
/// [`EndpointData`] bytes covered by `signature`; `cert` is the registry's
/// certificate chain in PEM.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityResponse {
    #[serde(rename = "Endpoint")]
    pub endpoint: String,
    pub signature: String,
    pub cert: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<SignatureAlgorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttl: Option<u64>,
}

/// The payload a registry signs when answering a resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EndpointData {
    pub ans_name: String,
    #[serde(rename = "agentUUID")]
    pub agent_uuid: String,
    pub endpoint: String,
    pub agent_certificate: String,
    pub protocol_extensions_digest: String,
    pub issued_at: i64,
    pub ttl_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeregistrationRequest {
    pub ans_name: String,
    pub requested_at: String,
    pub signature: SignatureEnvelope,
}

impl DeregistrationRequest {
    pub fn new(ans_name: &AnsName, requested_at: String) -> Self {
        DeregistrationRequest {
            ans_name: ans_name.to_string(),
            requested_at,
            signature: unsigned(),
        }
    }
}

signed_request!(DeregistrationRequest);

/// Operator-initiated revocation of an agent's certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RevocationRequest {
    pub ans_name: String,
    pub reason: String,
    pub requested_at: String,
    pub signature: SignatureEnvelope,
}

impl RevocationRequest {
    pub fn new(ans_name: &AnsName, reason: &str, requested_at: String) -> Self {
        RevocationRequest {
            ans_name: ans_name.to_string(),
            reason: reason.to_string(),
            requested_at,
            signature: unsigned(),
        }
    }
}

signed_request!(RevocationRequest);

/// Operator-initiated capability challenge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChallengeRequest {
    #[serde(rename = "agentUUID")]
    pub agent_uuid: String,
    pub input: String,
    pub expected: String,
    pub claimed_accuracy: f64,
    pub requested_at: String,
    pub signature: SignatureEnvelope,
}

impl ChallengeRequest {
    pub fn new(agent_uuid: &str, input: &str, expected: &str, claimed_accuracy: f64, requested_at: String) -> Self {
        ChallengeRequest {
            agent_uuid: agent_uuid.to_string(),
            input: input.to_string(),
            expected: expected.to_string(),
            claimed_accuracy,
            requested_at,
            signature: unsigned(),
        }
    }
}

signed_request!(ChallengeRequest);

/// Error envelope used by the HTTP service for every non-2xx answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: Vec<String>,
}

/// Acknowledgement for deregistration and revocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OperationAck {
    pub status: String,
    pub ans_name: String,
    #[serde(rename = "agentUUID")]
    pub agent_uuid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revoked_serial_number: Option<String>,
    pub at: String,
}
