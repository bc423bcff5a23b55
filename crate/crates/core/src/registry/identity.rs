use std::fs;
use std::path::PathBuf;

use serde_json::Value;
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::ansname::AnsName;
use crate::pki::PublicKey;

/// Namespace for agent UUIDs: UUIDv5(URL namespace, "urn:ans:agent-name-service").
pub const ANS_NAMESPACE: Uuid = Uuid::from_u128(0x211e3155_7de9_5362_b43d_ec315856987c);

/// UUIDv5 over the lowercase hex SHA-256 of the key's DER SubjectPublicKeyInfo.
pub fn derive_agent_uuid(public_key: &PublicKey) -> Uuid {
    uuid_for_spki(&public_key.to_spki_der())
}

pub fn uuid_for_spki(spki_der: &[u8]) -> Uuid {
    let digest = hex::encode(Sha256::digest(spki_der));
    Uuid::new_v5(&ANS_NAMESPACE, digest.as_bytes())
}

/// Source of CSRs referenced as `vault:<name>` in registration requests.
pub trait CsrVault: Send + Sync {
    fn fetch(&self, reference: &str) -> Result<String, String>;
}

/// A directory of `<name>.pem` files.
#[derive(Debug, Clone)]
pub struct DirectoryVault {
    root: PathBuf,
}

impl DirectoryVault {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirectoryVault { root: root.into() }
    }
}

impl CsrVault for DirectoryVault {
    fn fetch(&self, reference: &str) -> Result<String, String> {
        let name = reference
            .strip_prefix("vault:")
            .ok_or_else(|| format!("{reference:?} is not a vault reference"))?
            .trim_start_matches("//");
        let safe = !name.is_empty()
            && !name.starts_with('.')
            && name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
        if !safe {
            return Err(format!("illegal vault entry name {name:?}"));
        }
        let path = self.root.join(format!("{name}.pem"));
        fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// ANSNames mentioned anywhere inside a JSON document.
pub(crate) fn referenced_names(doc: &Value) -> Vec<AnsName> {
    let mut out = Vec::new();
    let mut stack = vec![doc];
    while let Some(v) = stack.pop() {
        match v {
            Value::String(s) if s.contains("://") => {
                if let Ok(n) = s.parse::<AnsName>() {
                    if !out.contains(&n) {
                        out.push(n);
                    }
                }
            }
            Value::Array(items) => stack.extend(items.iter()),
            Value::Object(m) => stack.extend(m.values()),
            _ => {}
        }
    }
    out
}
