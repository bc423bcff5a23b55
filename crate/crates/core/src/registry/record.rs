use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

use crate::ansname::{AnsName, SemVer, Versioned};
use crate::pki::CertificateBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentStatus {
    Active,
    Expired,
    Revoked,
    Deregistered,
    /// Blocked after repeated failed capability challenges.
    Quarantined,
}

impl AgentStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentStatus::Active => "active",
            AgentStatus::Expired => "expired",
            AgentStatus::Revoked => "revoked",
            AgentStatus::Deregistered => "deregistered",
            AgentStatus::Quarantined => "quarantined",
        }
    }

    /// Whether the name is still held by this record.
    pub fn holds_name(self) -> bool {
        matches!(
            self,
            AgentStatus::Active | AgentStatus::Expired | AgentStatus::Quarantined
        )
    }
}

impl fmt::Display for AgentStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "active" => AgentStatus::Active,
            "expired" => AgentStatus::Expired,
            "revoked" => AgentStatus::Revoked,
            "deregistered" => AgentStatus::Deregistered,
            "quarantined" => AgentStatus::Quarantined,
            other => return Err(format!("unknown status {other:?}")),
        })
    }
}

/// One registered agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentRecord {
    pub name: AnsName,
    #[serde(rename = "agentUUID")]
    pub agent_uuid: Uuid,
    pub certificate: CertificateBundle,
    pub endpoint: String,
    pub protocol_extensions: Value,
    pub registered_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renewed_at: Option<i64>,
    pub expires_at: i64,
    pub status: AgentStatus,
    #[serde(default)]
    pub consecutive_challenge_failures: u32,
}

impl AgentRecord {
    pub fn serial(&self) -> &str {
        self.certificate.certificate().serial()
    }

    /// Status as seen at `now`: an active record past its expiry reads as
    /// expired even before the sweep rewrites it.
    pub fn effective_status(&self, now: i64) -> AgentStatus {
        if self.status == AgentStatus::Active && now > self.expires_at {
            AgentStatus::Expired
        } else {
            self.status
        }
    }

    pub fn is_active_at(&self, now: i64) -> bool {
        self.effective_status(now) == AgentStatus::Active
    }
}

impl Versioned for AgentRecord {
    fn version(&self) -> &SemVer {
        self.name.version()
    }
}
