//! Pinned draft-07 schemas for the six registry message kinds.
//!
//! The schema files are compiled into the binary and checked against the
//! hashes in `schemas/manifest.json` when first loaded.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use jsonschema::error::ValidationErrorKind;
use jsonschema::{Draft, Validator};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
    #[error("schema {file} does not match its pinned hash")]
    HashMismatch { file: String },
    #[error("schema {file} is invalid: {reason}")]
    Invalid { file: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    RegistrationRequest,
    RegistrationResponse,
    RenewalRequest,
    RenewalResponse,
    CapabilityRequest,
    CapabilityResponse,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::RegistrationRequest,
        MessageKind::RegistrationResponse,
        MessageKind::RenewalRequest,
        MessageKind::RenewalResponse,
        MessageKind::CapabilityRequest,
        MessageKind::CapabilityResponse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::RegistrationRequest => "RegistrationRequest",
            MessageKind::RegistrationResponse => "RegistrationResponse",
            MessageKind::RenewalRequest => "RenewalRequest",
            MessageKind::RenewalResponse => "RenewalResponse",
            MessageKind::CapabilityRequest => "CapabilityRequest",
            MessageKind::CapabilityResponse => "CapabilityResponse",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            MessageKind::RegistrationRequest => "agent_registration_request.schema.json",
            MessageKind::RegistrationResponse => "agent_registration_response.schema.json",
            MessageKind::RenewalRequest => "agent_renewal_request.schema.json",
            MessageKind::RenewalResponse => "agent_renewal_response.schema.json",
            MessageKind::CapabilityRequest => "agent_capability_request.schema.json",
            MessageKind::CapabilityResponse => "agent_capability_response.schema.json",
        }
    }

    fn source(self) -> &'static str {
        match self {
            MessageKind::RegistrationRequest => include_str!("../schemas/agent_registration_request.schema.json"),
            MessageKind::RegistrationResponse => include_str!("../schemas/agent_registration_response.schema.json"),
            MessageKind::RenewalRequest => include_str!("../schemas/agent_renewal_request.schema.json"),
            MessageKind::RenewalResponse => include_str!("../schemas/agent_renewal_response.schema.json"),
            MessageKind::CapabilityRequest => include_str!("../schemas/agent_capability_request.schema.json"),
            MessageKind::CapabilityResponse => include_str!("../schemas/agent_capability_response.schema.json"),
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageKind {
    type Err = SchemaError;

    /// Accepts the kind name with or without the `Agent` prefix.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bare = s.strip_prefix("Agent").unwrap_or(s);
        MessageKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(bare))
            .ok_or_else(|| SchemaError::UnknownKind(s.to_string()))
    }
}

const MANIFEST: &str = include_str!("../schemas/manifest.json");

#[derive(Deserialize)]
struct Manifest {
    files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// JSON pointer to the offending location.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "/" } else { &self.path };
        write!(f, "{path}: {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok() -> Self {
        ValidationReport {
            valid: true,
            violations: Vec::new(),
        }
    }

    pub fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationReport {
            valid: false,
            violations: vec![Violation {
                path: path.into(),
                message: message.into(),
            }],
        }
    }

    pub fn paths(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.path.as_str()).collect()
    }
}

/// The compiled schema set. Immutable once loaded.
pub struct SchemaSet {
    validators: BTreeMap<MessageKind, Validator>,
}

impl fmt::Debug for SchemaSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemaSet")
            .field("kinds", &self.validators.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl SchemaSet {
    /// Checks every vendored file against the manifest and compiles it.
    pub fn load() -> Result<Self, SchemaError> {
        let manifest: Manifest = serde_json::from_str(MANIFEST).map_err(|e| SchemaError::Invalid {
            file: "manifest.json".into(),
            reason: e.to_string(),
        })?;
        let mut validators = BTreeMap::new();
        for kind in MessageKind::ALL {
            let file = kind.file_name();
            let src = kind.source();
            let actual = hex::encode(Sha256::digest(src.as_bytes()));
            if manifest.files.get(file) != Some(&actual) {
                return Err(SchemaError::HashMismatch { file: file.into() });
            }
            let invalid = |reason: String| SchemaError::Invalid {
                file: file.into(),
                reason,
            };
            let schema: Value = serde_json::from_str(src).map_err(|e| invalid(e.to_string()))?;
            let validator = jsonschema::options()
                .with_draft(Draft::Draft7)
                .should_validate_formats(true)
                .build(&schema)
                .map_err(|e| invalid(e.to_string()))?;
            validators.insert(kind, validator);
        }
        Ok(SchemaSet { validators })
    }

    /// A process-wide instance, loaded on first use.
    pub fn shared() -> &'static SchemaSet {
        static SET: OnceLock<SchemaSet> = OnceLock::new();
        SET.get_or_init(|| SchemaSet::load().expect("vendored schemas are consistent"))
    }

    /// Lists every violation of `body` against the schema for `kind`.
    pub fn validate(&self, kind: MessageKind, body: &Value) -> ValidationReport {
        let validator = &self.validators[&kind];
        let mut violations: Vec<Violation> = validator
            .iter_errors(body)
            .map(|err| {
                let mut path = err.instance_path.to_string();
                if let ValidationErrorKind::Required { property } = &err.kind {
                    if let Some(p) = property.as_str() {
                        path.push('/');
                        path.push_str(&p.replace('~', "~0").replace('/', "~1"));
                    }
                }
                Violation {
                    path,
                    message: err.to_string(),
                }
            })
            .collect();
        violations.sort_by(|a, b| a.path.cmp(&b.path).then_with(|| a.message.cmp(&b.message)));
        ValidationReport {
            valid: violations.is_empty(),
            violations,
        }
    }

    /// As [`SchemaSet::validate`], with the kind given by name.
    pub fn validate_named(&self, kind: &str, body: &Value) -> Result<ValidationReport, SchemaError> {
        Ok(self.validate(kind.parse()?, body))
    }

    /// The parsed schema document for `kind`.
    pub fn schema(&self, kind: MessageKind) -> Value {
        serde_json::from_str(kind.source()).expect("checked at load")
    }
}

/// Validates `body` against the shared schema set.
pub fn validate(kind: MessageKind, body: &Value) -> ValidationReport {
    SchemaSet::shared().validate(kind, body)
}
