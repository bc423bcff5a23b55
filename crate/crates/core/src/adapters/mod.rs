//! Protocol adapter layer.
//!
//! Each adapter understands one protocol's `protocolExtensions` blob: it
//! extracts a flat, protocol-namespaced view of the metadata, performs the
//! protocol's registration-time integrity checks and shapes discovery
//! answers. Adapters are stateless after construction and registered once,
//! in-process, through [`AdapterSet`].

mod a2a;
mod acp;
mod mcp;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ansname::Protocol;
use crate::canonical::canonicalize;
use crate::messages::RegistrationRequest;
use crate::registry::AgentRecord;

pub use a2a::A2aAdapter;
pub use acp::{AcpAdapter, DEFAULT_ACP_ROLES};
pub use mcp::McpAdapter;

/// Key reserved for the registry envelope in discovery documents. Adapters
/// never treat it as protocol metadata.
pub const ENVELOPE_KEY: &str = "ans";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
    #[error("protocolExtensions is missing required key {0:?}")]
    MissingRequiredKey(String),
    #[error("malformed protocolExtensions: {0}")]
    MalformedExtension(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdapterDescriptor {
    pub protocol: Protocol,
    pub required_extension_keys: BTreeSet<&'static str>,
    pub version: &'static str,
}

/// Flat `protocol.key -> value` view of a protocol extension blob.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizedMetadata(BTreeMap<String, Value>);

impl NormalizedMetadata {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.0.get(key).and_then(Value::as_str)
    }

    pub fn insert(&mut self, key: impl Into<String>, value: Value) {
        self.0.insert(key.into(), value);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_map(self) -> BTreeMap<String, Value> {
        self.0
    }
}

/// Result of a protocol-specific registration check.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdapterValidation {
    pub violations: Vec<String>,
}

impl AdapterValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn fail(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
}

pub trait ProtocolAdapter: Send + Sync {
    fn protocol(&self) -> Protocol;

    fn descriptor(&self) -> AdapterDescriptor;

    /// Extracts the normalized view of `protocol_extensions`.
    fn parse_metadata(&self, protocol_extensions: &Value) -> Result<NormalizedMetadata, AdapterError>;

    /// Protocol-specific registration checks.
    fn validate_registration(&self, req: &RegistrationRequest) -> AdapterValidation;

    /// Builds the protocol-shaped discovery document for an active record.
    ///
    /// The document carries the stored extension members at top level plus
    /// an [`ENVELOPE_KEY`] object with the ANSName, UUID and endpoint, so
    /// feeding it back to [`ProtocolAdapter::parse_metadata`] reproduces the
    /// record's normalized metadata.
    fn create_discovery_response(&self, record: &AgentRecord) -> Value {
        let mut doc = match &record.protocol_extensions {
            Value::Object(m) => m.clone(),
            _ => Map::new(),
        };
        doc.remove(ENVELOPE_KEY);
        doc.insert(ENVELOPE_KEY.to_string(), envelope(record));
        Value::Object(doc)
    }

    /// The endpoint advertised inside the extension blob, if any.
    fn endpoint(&self, meta: &NormalizedMetadata) -> Option<String> {
        meta.get_str(&format!("{}.endpoint", self.protocol()))
            .map(str::to_string)
    }
}

fn envelope(record: &AgentRecord) -> Value {
    serde_json::json!({
        "name": record.name.to_string(),
        "agentUUID": record.agent_uuid.to_string(),
        "endpoint": record.endpoint,
        "protocol": record.name.protocol().as_str(),
    })
}

/// Shared first pass over an extension blob: checks it is an object,
/// checks required keys and returns the members minus the envelope.
pub(crate) fn members<'a>(
    protocol_extensions: &'a Value,
    required: &[&str],
) -> Result<BTreeMap<&'a str, &'a Value>, AdapterError> {
    let obj = protocol_extensions
        .as_object()
        .ok_or_else(|| AdapterError::MalformedExtension("protocolExtensions must be a JSON object".into()))?;
    for key in required {
        if !obj.contains_key(*key) {
            return Err(AdapterError::MissingRequiredKey((*key).to_string()));
        }
    }
    Ok(obj
        .iter()
        .filter(|(k, _)| k.as_str() != ENVELOPE_KEY)
        .map(|(k, v)| (k.as_str(), v))
        .collect())
}

pub(crate) fn require_str<'a>(v: &'a Value, key: &str) -> Result<&'a str, AdapterError> {
    v.as_str()
        .ok_or_else(|| AdapterError::MalformedExtension(format!("{key:?} must be a string")))
}

pub(crate) fn require_object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>, AdapterError> {
    v.as_object()
        .ok_or_else(|| AdapterError::MalformedExtension(format!("{key:?} must be an object")))
}

/// `sha256:<hex>` over the canonical JSON form.
pub fn json_digest(v: &Value) -> String {
    let bytes = canonicalize(v).unwrap_or_default();
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// The adapters registered with a registry, one per protocol.
pub struct AdapterSet {
    adapters: BTreeMap<String, Box<dyn ProtocolAdapter>>,
}

impl fmt::Debug for AdapterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdapterSet")
            .field("protocols", &self.adapters.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for AdapterSet {
    /// A2A, MCP and ACP with default settings.
    fn default() -> Self {
        let mut set = AdapterSet::empty();
        set.register(Box::new(A2aAdapter));
        set.register(Box::new(McpAdapter));
        set.register(Box::new(AcpAdapter::default()));
        set
    }
}

impl AdapterSet {
    pub fn empty() -> Self {
        AdapterSet {
            adapters: BTreeMap::new(),
        }
    }

    /// Adds an adapter, replacing any previous one for the same protocol.
    pub fn register(&mut self, adapter: Box<dyn ProtocolAdapter>) {
        self.adapters.insert(adapter.protocol().to_string(), adapter);
    }

    pub fn get(&self, protocol: &Protocol) -> Result<&dyn ProtocolAdapter, AdapterError> {
        self.get_adapter(protocol.as_str())
    }

    pub fn get_adapter(&self, protocol: &str) -> Result<&dyn ProtocolAdapter, AdapterError> {
        self.adapters
            .get(protocol)
            .map(|b| b.as_ref())
            .ok_or_else(|| AdapterError::UnknownProtocol(protocol.to_string()))
    }

    pub fn protocols(&self) -> impl Iterator<Item = &str> {
        self.adapters.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_protocol() {
        let set = AdapterSet::default();
        assert_eq!(set.get_adapter("mcp").unwrap().protocol(), Protocol::Mcp);
        assert_eq!(set.get_adapter("acp").unwrap().protocol(), Protocol::Acp);
        assert_eq!(
            set.get_adapter("xyz").err(),
            Some(AdapterError::UnknownProtocol("xyz".into()))
        );
    }

    #[test]
    fn non_object_blob_is_malformed() {
        let set = AdapterSet::default();
        for p in ["a2a", "mcp", "acp"] {
            let err = set.get_adapter(p).unwrap().parse_metadata(&Value::from(3)).unwrap_err();
            assert!(matches!(err, AdapterError::MalformedExtension(_)));
        }
    }
}
