use std::collections::BTreeSet;

use serde_json::Value;

use super::{
    json_digest, members, require_str, AdapterDescriptor, AdapterError, AdapterValidation, NormalizedMetadata,
    ProtocolAdapter,
};
use crate::ansname::Protocol;
use crate::messages::RegistrationRequest;

const REQUIRED: [&str; 4] = ["description", "mcpEndpoint", "input_schema", "output_schema"];

/// MCP tool descriptions.
///
/// `description` and `mcpEndpoint` are copied through, the two tool schemas
/// are reduced to content digests, and anything else is kept under
/// `mcp.raw.*`.
#[derive(Debug, Clone, Copy, Default)]
pub struct McpAdapter;

impl ProtocolAdapter for McpAdapter {
    fn protocol(&self) -> Protocol {
        Protocol::Mcp
    }

    fn descriptor(&self) -> AdapterDescriptor {
        AdapterDescriptor {
            protocol: Protocol::Mcp,
            required_extension_keys: BTreeSet::from(REQUIRED),
            version: "1.0",
        }
    }

    fn parse_metadata(&self, protocol_extensions: &Value) -> Result<NormalizedMetadata, AdapterError> {
        let fields = members(protocol_extensions, &REQUIRED)?;
        let mut meta = NormalizedMetadata::default();
        for (key, value) in fields {
            match key {
                "description" => {
                    meta.insert("mcp.description", Value::from(require_str(value, key)?));
                }
                "mcpEndpoint" => {
                    meta.insert("mcp.endpoint", Value::from(require_str(value, key)?));
                }
                "input_schema" | "output_schema" => {
                    if !(value.is_object() || value.is_boolean()) {
                        return Err(AdapterError::MalformedExtension(format!(
                            "{key:?} must be a JSON Schema object"
                        )));
                    }
                    meta.insert(format!("mcp.{key}.digest"), Value::from(json_digest(value)));
                }
                other => meta.insert(format!("mcp.raw.{other}"), value.clone()),
            }
        }
        Ok(meta)
    }

    fn validate_registration(&self, req: &RegistrationRequest) -> AdapterValidation {
        let mut out = AdapterValidation::default();
        if let Err(e) = self.parse_metadata(&req.protocol_extensions) {
            out.fail(e.to_string());
            return out;
        }
        for key in ["input_schema", "output_schema"] {
            let schema = &req.protocol_extensions[key];
            if !schema.is_object() || jsonschema::options().build(schema).is_err() {
                out.fail(format!("{key} is not a valid JSON Schema"));
            }
        }
        if req.protocol_extensions["description"]
            .as_str()
            .is_some_and(|d| d.trim().is_empty())
        {
            out.fail("tool description is empty");
        }
        out
    }
}
