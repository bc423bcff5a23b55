use std::collections::BTreeSet;

use serde_json::Value;

use super::{
    members, require_object, require_str, AdapterDescriptor, AdapterError, AdapterValidation, NormalizedMetadata,
    ProtocolAdapter,
};
use crate::ansname::Protocol;
use crate::messages::RegistrationRequest;

const REQUIRED: [&str; 2] = ["role", "profile"];

pub const DEFAULT_ACP_ROLES: [&str; 4] = ["orchestrator", "worker", "delegate", "observer"];

/// ACP agent profiles with role enforcement.
#[derive(Debug, Clone)]
pub struct AcpAdapter {
    roles: BTreeSet<String>,
}

impl Default for AcpAdapter {
    fn default() -> Self {
        AcpAdapter::with_roles(DEFAULT_ACP_ROLES)
    }
}

impl AcpAdapter {
    pub fn with_roles<I, S>(roles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AcpAdapter {
            roles: roles.into_iter().map(Into::into).collect(),
        }
    }

    pub fn roles(&self) -> &BTreeSet<String> {
        &self.roles
    }
}

impl ProtocolAdapter for AcpAdapter {
    fn protocol(&self) -> Protocol {
        Protocol::Acp
    }

    fn descriptor(&self) -> AdapterDescriptor {
        AdapterDescriptor {
            protocol: Protocol::Acp,
            required_extension_keys: BTreeSet::from(REQUIRED),
            version: "1.0",
        }
    }

    fn parse_metadata(&self, protocol_extensions: &Value) -> Result<NormalizedMetadata, AdapterError> {
        let fields = members(protocol_extensions, &REQUIRED)?;
        let mut meta = NormalizedMetadata::default();
        for (key, value) in fields {
            match key {
                "role" => meta.insert("acp.role", Value::from(require_str(value, key)?)),
                "profile" => {
                    let profile = require_object(value, key)?;
                    if let Some(url) = profile.get("url").and_then(Value::as_str) {
                        meta.insert("acp.endpoint", Value::from(url));
                    }
                    if let Some(name) = profile.get("name").and_then(Value::as_str) {
                        meta.insert("acp.profile.name", Value::from(name));
                    }
                    if let Some(caps) = profile.get("capabilities") {
                        meta.insert("acp.profile.capabilities", caps.clone());
                    }
                }
                other => meta.insert(format!("acp.raw.{other}"), value.clone()),
            }
        }
        Ok(meta)
    }

    fn validate_registration(&self, req: &RegistrationRequest) -> AdapterValidation {
        let mut out = AdapterValidation::default();
        match self.parse_metadata(&req.protocol_extensions) {
            Err(e) => out.fail(e.to_string()),
            Ok(meta) => {
                let role = meta.get_str("acp.role").unwrap_or_default();
                if !self.roles.contains(role) {
                    out.fail(format!("role {role:?} is not one of the configured ACP roles"));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn extracts_role_and_profile() {
        let meta = AcpAdapter::default()
            .parse_metadata(&json!({
                "role": "worker",
                "profile": {"name": "summarizer", "url": "https://acp.example.com/agents/sum"},
                "delegation": {"maxDepth": 2}
            }))
            .unwrap();
        assert_eq!(meta.get_str("acp.role"), Some("worker"));
        assert_eq!(meta.get_str("acp.endpoint"), Some("https://acp.example.com/agents/sum"));
        assert_eq!(meta.get("acp.raw.delegation"), Some(&json!({"maxDepth": 2})));
    }

    #[test]
    fn custom_role_set() {
        let a = AcpAdapter::with_roles(["auditor"]);
        assert!(a.roles().contains("auditor"));
        assert!(!a.roles().contains("worker"));
    }
}
