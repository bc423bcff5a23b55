use std::collections::BTreeSet;

use serde_json::Value;

use super::{
    json_digest, members, require_object, require_str, AdapterDescriptor, AdapterError, AdapterValidation,
    NormalizedMetadata, ProtocolAdapter,
};
use crate::ansname::Protocol;
use crate::messages::RegistrationRequest;

const REQUIRED: [&str; 2] = ["agentCard", "cardDigest"];

/// A2A agent cards. The card itself is opaque; `cardDigest` must be the
/// `sha256:` digest of the card's canonical JSON.
#[derive(Debug, Clone, Copy, Default)]
pub struct A2aAdapter;

impl ProtocolAdapter for A2aAdapter {
    fn protocol(&self) -> Protocol {
        Protocol::A2a
    }

    fn descriptor(&self) -> AdapterDescriptor {
        AdapterDescriptor {
            protocol: Protocol::A2a,
            required_extension_keys: BTreeSet::from(REQUIRED),
            version: "1.0",
        }
    }

    fn parse_metadata(&self, protocol_extensions: &Value) -> Result<NormalizedMetadata, AdapterError> {
        let fields = members(protocol_extensions, &REQUIRED)?;
        let mut meta = NormalizedMetadata::default();
        for (key, value) in fields {
            match key {
                "agentCard" => {
                    let card = require_object(value, key)?;
                    meta.insert("a2a.card.digest", Value::from(json_digest(value)));
                    if let Some(name) = card.get("name").and_then(Value::as_str) {
                        meta.insert("a2a.card.name", Value::from(name));
                    }
                    if let Some(url) = card.get("url").and_then(Value::as_str) {
                        meta.insert("a2a.endpoint", Value::from(url));
                    }
                    if let Some(skills) = card.get("skills") {
                        meta.insert("a2a.card.skills", skills.clone());
                    }
                }
                "cardDigest" => {
                    meta.insert("a2a.cardDigest", Value::from(require_str(value, key)?));
                }
                other => meta.insert(format!("a2a.raw.{other}"), value.clone()),
            }
        }
        Ok(meta)
    }

    fn validate_registration(&self, req: &RegistrationRequest) -> AdapterValidation {
        let mut out = AdapterValidation::default();
        match self.parse_metadata(&req.protocol_extensions) {
            Err(e) => out.fail(e.to_string()),
            Ok(meta) => {
                let declared = meta.get_str("a2a.cardDigest");
                let actual = meta.get_str("a2a.card.digest");
                if declared != actual {
                    out.fail(format!(
                        "agent card integrity check failed: declared {} but card hashes to {}",
                        declared.unwrap_or("-"),
                        actual.unwrap_or("-")
                    ));
                }
            }
        }
        out
    }
}
