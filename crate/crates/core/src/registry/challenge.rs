use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AgentRecord;

/// A known-answer task used to test a claimed capability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Challenge {
    pub input: String,
    pub expected: String,
    /// Minimum confidence the agent must report, in [0, 1].
    pub claimed_accuracy: f64,
}

/// What the probed agent answered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAnswer {
    pub answer: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("agent did not answer in time")]
    Timeout,
    #[error("probe failed: {0}")]
    Failed(String),
}

/// Delivers a challenge to an agent and collects the answer.
pub trait CapabilityProbe: Send + Sync {
    fn probe(&self, record: &AgentRecord, input: &str, timeout: Duration) -> Result<ProbeAnswer, ProbeError>;
}

impl<F> CapabilityProbe for F
where
    F: Fn(&AgentRecord, &str) -> Result<ProbeAnswer, ProbeError> + Send + Sync,
{
    fn probe(&self, record: &AgentRecord, input: &str, _timeout: Duration) -> Result<ProbeAnswer, ProbeError> {
        self(record, input)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChallengeOutcome {
    #[serde(rename = "agentUUID")]
    pub agent_uuid: String,
    pub challenge_id: String,
    pub expected: String,
    pub received: String,
    pub confidence: f64,
    pub claimed_accuracy: f64,
    pub passed: bool,
    pub at: i64,
    /// Status of the agent after this outcome was applied.
    pub status_after: super::AgentStatus,
}

pub(crate) fn judge(challenge: &Challenge, answer: &ProbeAnswer) -> bool {
    let confidence = answer.confidence;
    answer.answer == challenge.expected
        && confidence.is_finite()
        && (0.0..=1.0).contains(&confidence)
        && confidence >= challenge.claimed_accuracy
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch() -> Challenge {
        Challenge {
            input: "I love this product!".into(),
            expected: "positive".into(),
            claimed_accuracy: 0.9,
        }
    }

    #[test]
    fn pass_requires_answer_and_confidence() {
        let ok = |a: &str, c: f64| {
            judge(
                &ch(),
                &ProbeAnswer {
                    answer: a.into(),
                    confidence: c,
                },
            )
        };
        assert!(ok("positive", 0.95));
        assert!(ok("positive", 0.9));
        assert!(!ok("positive", 0.89));
        assert!(!ok("negative", 0.99));
        assert!(!ok("positive", f64::NAN));
        assert!(!ok("positive", 1.5));
    }
}
