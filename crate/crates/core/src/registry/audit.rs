//! Append-only, hash-chained audit trail stored as newline-delimited JSON.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical::canonicalize_serializable;

/// `prev_hash` of the first entry.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditEntry {
    pub seq: u64,
    pub at: i64,
    pub op: String,
    #[serde(rename = "agentUUID")]
    pub agent_uuid: String,
    /// SHA-256 of the record bytes as stored after the operation.
    pub record_hash: String,
    pub prev_hash: String,
    pub entry_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct UnsealedEntry<'a> {
    seq: u64,
    at: i64,
    op: &'a str,
    #[serde(rename = "agentUUID")]
    agent_uuid: &'a str,
    #[serde(rename = "recordHash")]
    record_hash: &'a str,
    #[serde(rename = "prevHash")]
    prev_hash: &'a str,
}

impl AuditEntry {
    fn seal(seq: u64, at: i64, op: &str, agent_uuid: &str, record_hash: &str, prev_hash: &str) -> AuditEntry {
        let unsealed = UnsealedEntry {
            seq,
            at,
            op,
            agent_uuid,
            record_hash,
            prev_hash,
        };
        let bytes = canonicalize_serializable(&unsealed).expect("audit entry has no floats");
        AuditEntry {
            seq,
            at,
            op: op.to_string(),
            agent_uuid: agent_uuid.to_string(),
            record_hash: record_hash.to_string(),
            prev_hash: prev_hash.to_string(),
            entry_hash: hex::encode(Sha256::digest(bytes)),
        }
    }

    fn recompute_hash(&self) -> String {
        AuditEntry::seal(
            self.seq,
            self.at,
            &self.op,
            &self.agent_uuid,
            &self.record_hash,
            &self.prev_hash,
        )
        .entry_hash
    }
}

/// Position of the newest entry. Stored next to the data so that truncating
/// the log file is detectable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditHead {
    pub seq: u64,
    pub entry_hash: String,
}

impl AuditHead {
    pub fn genesis() -> Self {
        AuditHead {
            seq: 0,
            entry_hash: GENESIS_HASH.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("audit entry {seq} is corrupt: {reason}")]
    Corrupt { seq: u64, reason: String },
    #[error("audit log ends at entry {found} but entry {expected} was recorded")]
    Truncated { expected: u64, found: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

enum Sink {
    Memory(Vec<String>),
    File { path: PathBuf, file: File },
}

/// The audit log. Appends go through a single writer (`&mut self`).
pub struct AuditLog {
    sink: Sink,
    head: AuditHead,
    latest: HashMap<String, String>,
}

impl std::fmt::Debug for AuditLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuditLog")
            .field("head", &self.head)
            .finish_non_exhaustive()
    }
}

impl AuditLog {
    pub fn in_memory() -> Self {
        AuditLog {
            sink: Sink::Memory(Vec::new()),
            head: AuditHead::genesis(),
            latest: HashMap::new(),
        }
    }

    /// Opens (or creates) a log file and verifies its whole chain.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, AuditError> {
        let path = path.as_ref().to_path_buf();
        let entries = if path.exists() {
            let lines = BufReader::new(File::open(&path)?)
                .lines()
                .collect::<Result<Vec<_>, _>>()?;
            verify_lines(lines.iter().map(String::as_str))?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut log = AuditLog {
            sink: Sink::File { path, file },
            head: AuditHead::genesis(),
            latest: HashMap::new(),
        };
        for e in &entries {
            log.absorb(e);
        }
        Ok(log)
    }

    fn absorb(&mut self, e: &AuditEntry) {
        self.head = AuditHead {
            seq: e.seq,
            entry_hash: e.entry_hash.clone(),
        };
        self.latest.insert(e.agent_uuid.clone(), e.record_hash.clone());
    }

    pub fn head(&self) -> &AuditHead {
        &self.head
    }

    /// Record hash of the most recent entry for `agent_uuid`.
    pub fn latest_record_hash(&self, agent_uuid: &str) -> Option<&str> {
        self.latest.get(agent_uuid).map(String::as_str)
    }

    pub fn append(
        &mut self,
        at: i64,
        op: &str,
        agent_uuid: &str,
        record_bytes: &[u8],
    ) -> Result<AuditEntry, AuditError> {
        let record_hash = hex::encode(Sha256::digest(record_bytes));
        let entry = AuditEntry::seal(
            self.head.seq + 1,
            at,
            op,
            agent_uuid,
            &record_hash,
            &self.head.entry_hash,
        );
        let line = serde_json::to_string(&entry).expect("audit entry serializes");
        match &mut self.sink {
            Sink::Memory(lines) => lines.push(line),
            Sink::File { file, .. } => {
                writeln!(file, "{line}")?;
                file.flush()?;
            }
        }
        self.absorb(&entry);
        Ok(entry)
    }

    pub fn entries(&self) -> Result<Vec<AuditEntry>, AuditError> {
        match &self.sink {
            Sink::Memory(lines) => verify_lines(lines.iter().map(String::as_str)),
            Sink::File { path, .. } => {
                let text = fs::read_to_string(path)?;
                verify_lines(text.lines())
            }
        }
    }

    /// Re-reads the log, verifies every link and checks it reaches `expected`.
    pub fn verify(&self, expected: &AuditHead) -> Result<AuditHead, AuditError> {
        let entries = self.entries()?;
        let found = entries.last().map(|e| e.seq).unwrap_or(0);
        if found < expected.seq {
            return Err(AuditError::Truncated {
                expected: expected.seq,
                found,
            });
        }
        if let Some(e) = entries.iter().find(|e| e.seq == expected.seq) {
            if e.entry_hash != expected.entry_hash {
                return Err(AuditError::Corrupt {
                    seq: e.seq,
                    reason: "entry differs from the recorded head".into(),
                });
            }
        }
        Ok(entries
            .last()
            .map(|e| AuditHead {
                seq: e.seq,
                entry_hash: e.entry_hash.clone(),
            })
            .unwrap_or_else(AuditHead::genesis))
    }
}

/// Parses and checks a sequence of NDJSON lines.
pub fn verify_lines<'a>(lines: impl Iterator<Item = &'a str>) -> Result<Vec<AuditEntry>, AuditError> {
    let mut prev = AuditHead::genesis();
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let seq = prev.seq + 1;
        let e: AuditEntry = serde_json::from_str(line).map_err(|err| AuditError::Corrupt {
            seq,
            reason: err.to_string(),
        })?;
        let fail = |reason: &str| AuditError::Corrupt {
            seq,
            reason: reason.to_string(),
        };
        if e.seq != seq {
            return Err(fail("sequence gap"));
        }
        if e.prev_hash != prev.entry_hash {
            return Err(fail("previous-hash link broken"));
        }
        if e.recompute_hash() != e.entry_hash {
            return Err(fail("entry hash mismatch"));
        }
        prev = AuditHead {
            seq,
            entry_hash: e.entry_hash.clone(),
        };
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(path: &Path) -> AuditLog {
        let mut log = AuditLog::open(path).unwrap();
        for i in 0..5 {
            log.append(100 + i, "register", &format!("agent-{i}"), format!("rec{i}").as_bytes())
                .unwrap();
        }
        log
    }

    #[test]
    fn chain_verifies_and_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("audit.ndjson");
        let log = filled(&p);
        let head = log.head().clone();
        assert_eq!(head.seq, 5);
        assert_eq!(log.verify(&head).unwrap(), head);
        let reopened = AuditLog::open(&p).unwrap();
        assert_eq!(reopened.head(), &head);
        assert_eq!(
            reopened.latest_record_hash("agent-2").unwrap(),
            hex::encode(Sha256::digest(b"rec2"))
        );
    }

    #[test]
    fn edit_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("audit.ndjson");
        filled(&p);
        let text = fs::read_to_string(&p).unwrap().replacen("agent-3", "agent-9", 1);
        fs::write(&p, text).unwrap();
        assert!(matches!(AuditLog::open(&p), Err(AuditError::Corrupt { seq: 4, .. })));
    }

    #[test]
    fn truncation_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("audit.ndjson");
        let head = filled(&p).head().clone();
        let text = fs::read_to_string(&p).unwrap();
        let kept: Vec<&str> = text.lines().take(3).collect();
        fs::write(&p, kept.join("\n") + "\n").unwrap();
        let log = AuditLog::open(&p).unwrap();
        assert!(matches!(
            log.verify(&head),
            Err(AuditError::Truncated { expected: 5, found: 3 })
        ));
    }
}
