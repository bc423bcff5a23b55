//! The Agent Registry: lifecycle management, lookup and signed answers.
//!
//! Mutations serialize on one writer lock. Each one commits the record, the
//! CA state and the audit head in a single store transaction after appending
//! to the audit log, so a failure leaves no partial state behind.

mod audit;
mod challenge;
mod endpoint;
mod identity;
mod record;
mod store;

use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use thiserror::Error;
use uuid::Uuid;

use serde_json::Value;

use crate::adapters::{json_digest, AdapterSet};
use crate::ansname::{version_negotiation, AnsName, NameError, NameKey, Protocol, VersionRange};
use crate::canonical::canonicalize_serializable;
use crate::clock::{parse_rfc3339, rfc3339, Clock};
use crate::messages::{
    CapabilityRequest, CapabilityResponse, ChallengeRequest, DeregistrationRequest, IssuedCertificate, OperationAck,
    RegistrationRequest, RegistrationResponse, RegistrationStatus, RenewalRequest, RenewalResponse, RenewalStatus,
    RevocationRequest, SignedRequest,
};
use crate::pki::{
    create_csr, CaState, Certificate, CertificateAuthority, CertificateBundle, Csr, PkiError, PrivateKey, PublicKey,
    RevocationList, SignatureAlgorithm, SubjectName,
};
use crate::schemas::{MessageKind, SchemaSet, ValidationReport};

pub use audit::{verify_lines, AuditEntry, AuditError, AuditHead, AuditLog, GENESIS_HASH};
pub use challenge::{CapabilityProbe, Challenge, ChallengeOutcome, ProbeAnswer, ProbeError};
pub use endpoint::EndpointRecord;
pub use identity::{derive_agent_uuid, uuid_for_spki, CsrVault, DirectoryVault, ANS_NAMESPACE};
pub use record::{AgentRecord, AgentStatus};
pub use store::{Store, StoreError, StoreTx, STORE_FILE};

const META_CA_STATE: &str = "ca_state";
const META_AUDIT_HEAD: &str = "audit_head";
const DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("request does not match its schema")]
    SchemaViolation(ValidationReport),
    #[error("{0} is already registered at this version")]
    DuplicateName(String),
    #[error("key is already bound to agent {0}")]
    KeyInUse(String),
    #[error("protocol adapter rejected the registration")]
    AdapterRejection(Vec<String>),
    #[error("invalid CSR: {0}")]
    InvalidCsr(String),
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
    #[error(transparent)]
    MalformedName(NameError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error("proof of possession failed: {0}")]
    BadProof(String),
    #[error("agent certificate has been revoked")]
    RevokedAgent,
    #[error("agent is {0}")]
    InactiveAgent(AgentStatus),
    #[error("no active agent matches {0}")]
    AgentNotFound(String),
    #[error("no registered version satisfies {0:?}")]
    IncompatibleVersion(String),
    #[error("malformed version range: {0}")]
    MalformedRange(String),
    #[error("stored record for {0} does not match the audit trail")]
    IntegrityViolation(String),
    #[error("agent did not answer the challenge in time")]
    ChallengeTimeout(Box<ChallengeOutcome>),
    #[error("vault lookup failed: {0}")]
    Vault(String),
    #[error(transparent)]
    Storage(#[from] StoreError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Pki(#[from] PkiError),
}

impl RegistryError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::SchemaViolation(_) => "SchemaViolation",
            RegistryError::DuplicateName(_) => "DuplicateName",
            RegistryError::KeyInUse(_) => "KeyInUse",
            RegistryError::AdapterRejection(_) => "AdapterRejection",
            RegistryError::InvalidCsr(_) => "InvalidCSR",
            RegistryError::UnknownProtocol(_) => "UnknownProtocol",
            RegistryError::MalformedName(_) => "MalformedName",
            RegistryError::InvalidRequest(_) => "InvalidRequest",
            RegistryError::UnknownAgent(_) => "UnknownAgent",
            RegistryError::BadProof(_) => "BadProof",
            RegistryError::RevokedAgent => "RevokedAgent",
            RegistryError::InactiveAgent(_) => "InactiveAgent",
            RegistryError::AgentNotFound(_) => "AgentNotFound",
            RegistryError::IncompatibleVersion(_) => "IncompatibleVersion",
            RegistryError::MalformedRange(_) => "MalformedRange",
            RegistryError::IntegrityViolation(_) => "IntegrityViolation",
            RegistryError::ChallengeTimeout(_) => "ChallengeTimeout",
            RegistryError::Vault(_) => "VaultError",
            RegistryError::Storage(_) => "StorageError",
            RegistryError::Audit(_) => "AuditError",
            RegistryError::Pki(_) => "PkiError",
        }
    }

    /// Extra lines for error envelopes.
    pub fn details(&self) -> Vec<String> {
        match self {
            RegistryError::SchemaViolation(r) => r.violations.iter().map(ToString::to_string).collect(),
            RegistryError::AdapterRejection(v) => v.clone(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegistryConfig {
    /// Cache lifetime stamped into signed lookup answers.
    pub ttl_seconds: u64,
    pub cert_validity_days: u32,
    /// Consecutive failed challenges before quarantine.
    pub quarantine_threshold: u32,
    /// Accept `http://` endpoints. Off outside tests and demos.
    pub allow_insecure_endpoints: bool,
    pub challenge_timeout: Duration,
    /// Allowed distance between `requestedAt` and the registry clock.
    pub max_clock_skew_secs: i64,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        RegistryConfig {
            ttl_seconds: 300,
            cert_validity_days: 365,
            quarantine_threshold: 3,
            allow_insecure_endpoints: false,
            challenge_timeout: Duration::from_secs(5),
            max_clock_skew_secs: 300,
        }
    }
}

/// Assembles a [`Registry`]. Anything not supplied gets an in-memory or
/// freshly generated default.
pub struct RegistryBuilder {
    clock: Arc<dyn Clock>,
    config: RegistryConfig,
    adapters: Option<AdapterSet>,
    store: Option<Store>,
    audit: Option<AuditLog>,
    authority: Option<(Certificate, Vec<Certificate>, PrivateKey)>,
    identity: Option<(PrivateKey, CertificateBundle)>,
    vault: Option<Box<dyn CsrVault>>,
    operators: Vec<PublicKey>,
}

impl RegistryBuilder {
    pub fn config(mut self, config: RegistryConfig) -> Self {
        self.config = config;
        self
    }

    pub fn adapters(mut self, adapters: AdapterSet) -> Self {
        self.adapters = Some(adapters);
        self
    }

    pub fn store(mut self, store: Store) -> Self {
        self.store = Some(store);
        self
    }

    pub fn audit(mut self, audit: AuditLog) -> Self {
        self.audit = Some(audit);
        self
    }

    /// CA certificate, the chain above it and its signing key.
    pub fn authority(mut self, cert: Certificate, chain: Vec<Certificate>, key: PrivateKey) -> Self {
        self.authority = Some((cert, chain, key));
        self
    }

    /// Key and certificate the registry signs lookup answers with.
    pub fn identity(mut self, key: PrivateKey, bundle: CertificateBundle) -> Self {
        self.identity = Some((key, bundle));
        self
    }

    pub fn vault(mut self, vault: Box<dyn CsrVault>) -> Self {
        self.vault = Some(vault);
        self
    }

    /// Adds a key allowed to revoke, challenge and deregister any agent.
    pub fn operator(mut self, key: PublicKey) -> Self {
        self.operators.push(key);
        self
    }

    pub fn build(self) -> Result<Registry, RegistryError> {
        let store = match self.store {
            Some(s) => s,
            None => Store::in_memory()?,
        };
        let state: Option<CaState> = store
            .meta(META_CA_STATE)?
            .map(|b| serde_json::from_slice(&b))
            .transpose()
            .map_err(|e| StoreError(format!("ca state: {e}")))?;
        let ca = match self.authority {
            Some((cert, chain, key)) => {
                CertificateAuthority::from_parts(cert, chain, key, state.unwrap_or_default(), self.clock.clone())?
            }
            None => {
                let mut subject = SubjectName::new("ANS Registry CA");
                subject.organization = Some("Agent Name Service".into());
                let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
                CertificateAuthority::new_root(&subject, key, 3650, self.clock.clone())?
            }
        };
        let (identity_key, identity_cert) = match self.identity {
            Some(pair) => pair,
            None => {
                let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
                let mut subject = SubjectName::new("ANS Registry");
                subject.organization = Some("Agent Name Service".into());
                let csr = create_csr(&key, &subject)?;
                let bundle = ca.issue_for_secs(&csr, i64::from(self.config.cert_validity_days) * DAY)?;
                (key, bundle)
            }
        };
        let audit = self.audit.unwrap_or_else(AuditLog::in_memory);
        let recorded: Option<AuditHead> = store
            .meta(META_AUDIT_HEAD)?
            .map(|b| serde_json::from_slice(&b))
            .transpose()
            .map_err(|e| StoreError(format!("audit head: {e}")))?;
        if let Some(head) = &recorded {
            audit.verify(head)?;
        }
        let ca_state = serde_json::to_vec(&ca.state()).expect("ca state serializes");
        store.write(|tx| tx.put_meta(META_CA_STATE, &ca_state))?;
        let mut operators = self.operators;
        if operators.is_empty() {
            operators.push(identity_key.public_key());
        }
        Ok(Registry {
            store,
            audit: Mutex::new(audit),
            ca,
            identity_key,
            identity_cert,
            adapters: self.adapters.unwrap_or_default(),
            schemas: SchemaSet::shared(),
            clock: self.clock,
            config: self.config,
            vault: self.vault,
            operators,
        })
    }
}

pub struct Registry {
    store: Store,
    /// Also the writer lock: every mutation holds it until commit.
    audit: Mutex<AuditLog>,
    ca: CertificateAuthority,
    identity_key: PrivateKey,
    identity_cert: CertificateBundle,
    adapters: AdapterSet,
    schemas: &'static SchemaSet,
    clock: Arc<dyn Clock>,
    config: RegistryConfig,
    vault: Option<Box<dyn CsrVault>>,
    operators: Vec<PublicKey>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("ca", &self.ca)
            .field("adapters", &self.adapters)
            .finish_non_exhaustive()
    }
}

fn encode(record: &AgentRecord) -> Vec<u8> {
    canonicalize_serializable(record).expect("agent records hold no floats")
}

fn decode(uuid: &str, bytes: &[u8]) -> Result<AgentRecord, RegistryError> {
    serde_json::from_slice(bytes).map_err(|_| RegistryError::IntegrityViolation(uuid.to_string()))
}

fn issued(bundle: &CertificateBundle) -> IssuedCertificate {
    let cert = bundle.certificate();
    IssuedCertificate {
        subject: cert.subject_dn().to_string(),
        issuer: cert.issuer_dn().to_string(),
        serial_number: cert.serial().to_string(),
        pem: bundle.to_pem(),
    }
}

impl Registry {
    pub fn builder(clock: Arc<dyn Clock>) -> RegistryBuilder {
        RegistryBuilder {
            clock,
            config: RegistryConfig::default(),
            adapters: None,
            store: None,
            audit: None,
            authority: None,
            identity: None,
            vault: None,
            operators: Vec::new(),
        }
    }

    /// An in-memory registry with a fresh CA and default settings.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Result<Self, RegistryError> {
        Registry::builder(clock).build()
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.config
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn adapters(&self) -> &AdapterSet {
        &self.adapters
    }

    pub fn schemas(&self) -> &SchemaSet {
        self.schemas
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn authority(&self) -> &CertificateAuthority {
        &self.ca
    }

    /// The certificate clients should pin: the top of the CA chain.
    pub fn trust_anchor(&self) -> &Certificate {
        self.ca.chain().last().unwrap_or_else(|| self.ca.certificate())
    }

    pub fn identity_certificate(&self) -> &CertificateBundle {
        &self.identity_cert
    }

    pub fn identity_public_key(&self) -> PublicKey {
        self.identity_key.public_key()
    }

    pub fn crl(&self) -> Result<RevocationList, RegistryError> {
        Ok(self.ca.crl()?)
    }

    fn writer(&self) -> MutexGuard<'_, AuditLog> {
        self.audit.lock().expect("audit lock poisoned")
    }

    /// Writes `record` and its audit entry. Must run inside `store.write`
    /// while holding the writer lock.
    fn persist(
        &self,
        tx: &mut StoreTx<'_>,
        audit: &mut AuditLog,
        op: &str,
        record: &AgentRecord,
    ) -> Result<(), RegistryError> {
        let bytes = encode(record);
        let uuid = record.agent_uuid.to_string();
        tx.put(&uuid, &record.name.key().index_key(), &bytes)?;
        tx.put_meta(
            META_CA_STATE,
            &serde_json::to_vec(&self.ca.state()).expect("ca state serializes"),
        )?;
        audit.append(self.clock.unix(), op, &uuid, &bytes)?;
        tx.put_meta(
            META_AUDIT_HEAD,
            &serde_json::to_vec(audit.head()).expect("head serializes"),
        )?;
        Ok(())
    }

    fn check_fresh(&self, requested_at: &str) -> Result<(), RegistryError> {
        let at = parse_rfc3339(requested_at)
            .ok_or_else(|| RegistryError::BadProof("requestedAt is not an RFC 3339 timestamp".into()))?;
        if (at - self.clock.unix()).abs() > self.config.max_clock_skew_secs {
            return Err(RegistryError::BadProof(
                "requestedAt is outside the accepted window".into(),
            ));
        }
        Ok(())
    }

    fn check_endpoint(&self, endpoint: &str) -> Result<(), RegistryError> {
        let url = url::Url::parse(endpoint)
            .map_err(|e| RegistryError::InvalidRequest(format!("endpoint {endpoint:?}: {e}")))?;
        let ok = match url.scheme() {
            "https" => true,
            "http" => self.config.allow_insecure_endpoints,
            _ => false,
        };
        if !ok || url.host_str().is_none() {
            return Err(RegistryError::InvalidRequest(format!(
                "endpoint {endpoint:?} must be an https URL"
            )));
        }
        Ok(())
    }

    fn validate(&self, kind: MessageKind, body: &Value) -> Result<(), RegistryError> {
        let report = self.schemas.validate(kind, body);
        if report.valid {
            Ok(())
        } else {
            Err(RegistryError::SchemaViolation(report))
        }
    }

    // ---- registration -------------------------------------------------

    /// Registers from a raw JSON body, validating it against the schema first.
    pub fn register_json(&self, body: &Value) -> Result<RegistrationResponse, RegistryError> {
        if let Some(p) = body.get("protocol").and_then(Value::as_str) {
            if let Ok(proto) = p.parse::<Protocol>() {
                if !proto.is_known() && self.adapters.get(&proto).is_err() {
                    return Err(RegistryError::UnknownProtocol(p.to_string()));
                }
            }
        }
        self.validate(MessageKind::RegistrationRequest, body)?;
        let req: RegistrationRequest = serde_json::from_value(body.clone())
            .map_err(|e| RegistryError::SchemaViolation(ValidationReport::single("", e.to_string())))?;
        self.register_checked(&req)
    }

    pub fn register(&self, req: &RegistrationRequest) -> Result<RegistrationResponse, RegistryError> {
        let body = serde_json::to_value(req).expect("request serializes");
        self.register_json(&body)
    }

    fn register_checked(&self, req: &RegistrationRequest) -> Result<RegistrationResponse, RegistryError> {
        let name = req.ans_name().map_err(RegistryError::MalformedName)?;
        let adapter = self
            .adapters
            .get(name.protocol())
            .map_err(|_| RegistryError::UnknownProtocol(name.protocol().to_string()))?;
        let verdict = adapter.validate_registration(req);
        if !verdict.is_valid() {
            return Err(RegistryError::AdapterRejection(verdict.violations));
        }
        let meta = adapter
            .parse_metadata(&req.protocol_extensions)
            .map_err(|e| RegistryError::AdapterRejection(vec![e.to_string()]))?;
        let endpoint = req
            .endpoint
            .clone()
            .or_else(|| adapter.endpoint(&meta))
            .ok_or_else(|| RegistryError::AdapterRejection(vec!["no endpoint given or advertised".into()]))?;
        self.check_endpoint(&endpoint)?;

        let csr_pem = if req.certificate.pem.starts_with("vault:") {
            let vault = self
                .vault
                .as_ref()
                .ok_or_else(|| RegistryError::Vault("no CSR vault configured".into()))?;
            vault.fetch(&req.certificate.pem).map_err(RegistryError::Vault)?
        } else {
            req.certificate.pem.clone()
        };
        let csr = Csr::from_pem(&csr_pem).map_err(|e| RegistryError::InvalidCsr(e.to_string()))?;
        let info = csr.verify().map_err(|e| RegistryError::InvalidCsr(e.to_string()))?;
        let expected = SubjectName::for_agent(&name);
        let subject_ok = info.subject.common_name == expected.common_name
            && info.subject.organizational_unit == expected.organizational_unit
            && info.subject.organization == expected.organization
            && (info.subject.san_uris.is_empty() || info.subject.san_uris == expected.san_uris);
        if !subject_ok {
            return Err(RegistryError::InvalidCsr(format!(
                "CSR subject does not match {name} (expected CN={}, OU={}, O={})",
                name.agent_id(),
                name.capability(),
                name.provider()
            )));
        }

        let uuid = derive_agent_uuid(&info.public_key);
        let uuid_s = uuid.to_string();
        let mut audit = self.writer();
        let now = self.clock.unix();
        let record = self.store.write(|tx| {
            if let Some(bytes) = tx.get(&uuid_s)? {
                let existing = decode(&uuid_s, &bytes)?;
                if existing.status.holds_name() {
                    return Err(RegistryError::KeyInUse(uuid_s.clone()));
                }
            }
            for id in tx.ids_for(&name.key().index_key())? {
                let Some(bytes) = tx.get(&id)? else { continue };
                let other = decode(&id, &bytes)?;
                if other.status.holds_name() && other.name.version() == name.version() {
                    return Err(RegistryError::DuplicateName(name.to_string()));
                }
            }
            let lifetime = i64::from(self.config.cert_validity_days) * DAY;
            let bundle = self.ca.issue_for_key(&info.public_key, &expected, lifetime)?;
            let record = AgentRecord {
                name: name.clone(),
                agent_uuid: uuid,
                expires_at: bundle.certificate().not_after(),
                certificate: bundle,
                endpoint: endpoint.clone(),
                protocol_extensions: req.protocol_extensions.clone(),
                registered_at: now,
                renewed_at: None,
                status: AgentStatus::Active,
                consecutive_challenge_failures: 0,
            };
            self.persist(tx, &mut audit, "register", &record)?;
            Ok(record)
        })?;

        Ok(RegistrationResponse {
            status: RegistrationStatus::Registered,
            ans_name: record.name.to_string(),
            agent_uuid: uuid_s,
            endpoint: record.endpoint.clone(),
            certificate: issued(&record.certificate),
            registered_at: rfc3339(record.registered_at),
            expires_at: rfc3339(record.expires_at),
        })
    }

    // ---- renewal --------------------------------------------------------

    pub fn renew_json(&self, body: &Value) -> Result<RenewalResponse, RegistryError> {
        self.validate(MessageKind::RenewalRequest, body)?;
        let req: RenewalRequest = serde_json::from_value(body.clone())
            .map_err(|e| RegistryError::SchemaViolation(ValidationReport::single("", e.to_string())))?;
        self.renew_checked(&req)
    }

    pub fn renew(&self, req: &RenewalRequest) -> Result<RenewalResponse, RegistryError> {
        let body = serde_json::to_value(req).expect("request serializes");
        self.renew_json(&body)
    }

    fn renew_checked(&self, req: &RenewalRequest) -> Result<RenewalResponse, RegistryError> {
        let unknown = || RegistryError::UnknownAgent(req.agent_uuid.clone());
        let uuid = Uuid::parse_str(&req.agent_uuid).map_err(|_| unknown())?;
        let name: AnsName = req.ans_name.parse().map_err(RegistryError::MalformedName)?;
        let uuid_s = uuid.to_string();
        let mut audit = self.writer();
        let now = self.clock.unix();
        let (record, old_serial) = self.store.write(|tx| {
            let bytes = tx.get(&uuid_s)?.ok_or_else(unknown)?;
            self.check_integrity(&audit, &uuid_s, &bytes)?;
            let mut record = decode(&uuid_s, &bytes)?;
            if record.name != name {
                return Err(unknown());
            }
            match record.status {
                AgentStatus::Revoked => return Err(RegistryError::RevokedAgent),
                AgentStatus::Deregistered | AgentStatus::Quarantined => {
                    return Err(RegistryError::InactiveAgent(record.status))
                }
                AgentStatus::Active | AgentStatus::Expired => {}
            }
            let key = record.certificate.certificate().public_key().clone();
            if !req.verify_with(&key) {
                return Err(RegistryError::BadProof(
                    "signature does not verify under the agent key".into(),
                ));
            }
            self.check_fresh(&req.requested_at)?;
            let old_serial = record.serial().to_string();
            let lifetime = i64::from(self.config.cert_validity_days) * DAY;
            let bundle = self
                .ca
                .issue_for_key(&key, &SubjectName::for_agent(&record.name), lifetime)?;
            self.ca.revoke_certificate(&old_serial)?;
            record.expires_at = bundle.certificate().not_after();
            record.certificate = bundle;
            record.renewed_at = Some(now);
            record.status = AgentStatus::Active;
            self.persist(tx, &mut audit, "renew", &record)?;
            Ok((record, old_serial))
        })?;

        Ok(RenewalResponse {
            status: RenewalStatus::Renewed,
            ans_name: record.name.to_string(),
            agent_uuid: uuid_s,
            certificate: issued(&record.certificate),
            revoked_serial_number: old_serial,
            renewed_at: rfc3339(now),
            expires_at: rfc3339(record.expires_at),
        })
    }

    // ---- deregistration and revocation ---------------------------------

    /// Finds the record currently bound to `name`, preferring one that
    /// still holds it.
    fn find_by_name(&self, tx: &StoreTx<'_>, name: &AnsName) -> Result<Option<AgentRecord>, RegistryError> {
        let mut fallback = None;
        for id in tx.ids_for(&name.key().index_key())? {
            let Some(bytes) = tx.get(&id)? else { continue };
            let rec = decode(&id, &bytes)?;
            if rec.name != *name || rec.name.extension() != name.extension() {
                continue;
            }
            if rec.status.holds_name() {
                return Ok(Some(rec));
            }
            fallback = Some(rec);
        }
        Ok(fallback)
    }

    fn is_operator<R: SignedRequest>(&self, req: &R) -> bool {
        self.operators.iter().any(|k| req.verify_with(k))
    }

    /// Owner- or operator-signed removal. Repeating it is harmless.
    pub fn deregister(&self, req: &DeregistrationRequest) -> Result<OperationAck, RegistryError> {
        let name: AnsName = req.ans_name.parse().map_err(RegistryError::MalformedName)?;
        let mut audit = self.writer();
        let now = self.clock.unix();
        self.store.write(|tx| {
            let mut rec = self
                .find_by_name(tx, &name)?
                .ok_or_else(|| RegistryError::UnknownAgent(name.to_string()))?;
            let owner = rec.certificate.certificate().public_key().clone();
            if !req.verify_with(&owner) && !self.is_operator(req) {
                return Err(RegistryError::BadProof("not signed by the agent or an operator".into()));
            }
            self.check_fresh(&req.requested_at)?;
            let serial = rec.serial().to_string();
            let ack = OperationAck {
                status: AgentStatus::Deregistered.to_string(),
                ans_name: rec.name.to_string(),
                agent_uuid: rec.agent_uuid.to_string(),
                revoked_serial_number: Some(serial.clone()),
                at: rfc3339(now),
            };
            if rec.status == AgentStatus::Deregistered {
                return Ok(ack);
            }
            self.ca.revoke_certificate(&serial)?;
            rec.status = AgentStatus::Deregistered;
            self.persist(tx, &mut audit, "deregister", &rec)?;
            Ok(ack)
        })
    }

    /// Operator-signed revocation of an agent's certificate.
    pub fn revoke(&self, req: &RevocationRequest) -> Result<OperationAck, RegistryError> {
        let name: AnsName = req.ans_name.parse().map_err(RegistryError::MalformedName)?;
        if !self.is_operator(req) {
            return Err(RegistryError::BadProof("not signed by an operator".into()));
        }
        self.check_fresh(&req.requested_at)?;
        let mut audit = self.writer();
        let now = self.clock.unix();
        self.store.write(|tx| {
            let mut rec = self
                .find_by_name(tx, &name)?
                .ok_or_else(|| RegistryError::UnknownAgent(name.to_string()))?;
            let serial = rec.serial().to_string();
            self.ca.revoke_certificate(&serial)?;
            if matches!(rec.status, AgentStatus::Revoked | AgentStatus::Deregistered) {
                tx.put_meta(
                    META_CA_STATE,
                    &serde_json::to_vec(&self.ca.state()).expect("ca state serializes"),
                )?;
            } else {
                rec.status = AgentStatus::Revoked;
                self.persist(tx, &mut audit, "revoke", &rec)?;
            }
            Ok(OperationAck {
                status: rec.status.to_string(),
                ans_name: rec.name.to_string(),
                agent_uuid: rec.agent_uuid.to_string(),
                revoked_serial_number: Some(serial),
                at: rfc3339(now),
            })
        })
    }

    /// Revokes any certificate this registry's CA issued, including its own
    /// identity certificate, and persists the new CA state.
    pub fn revoke_serial(&self, serial: &str) -> Result<RevocationList, RegistryError> {
        let _guard = self.writer();
        let crl = self.ca.revoke_certificate(serial)?;
        let state = serde_json::to_vec(&self.ca.state()).expect("ca state serializes");
        self.store.write(|tx| tx.put_meta(META_CA_STATE, &state))?;
        Ok(crl)
    }

    // ---- lookup ---------------------------------------------------------

    pub fn get(&self, uuid: &Uuid) -> Result<Option<AgentRecord>, RegistryError> {
        let id = uuid.to_string();
        self.store.get(&id)?.map(|b| decode(&id, &b)).transpose()
    }

    pub fn all_records(&self) -> Result<Vec<AgentRecord>, RegistryError> {
        let mut out = Vec::new();
        for id in self.store.all_ids()? {
            if let Some(b) = self.store.get(&id)? {
                out.push(decode(&id, &b)?);
            }
        }
        Ok(out)
    }

    /// Active records registered under the four-tuple, any version.
    pub fn lookup(&self, key: &NameKey) -> Result<Vec<AgentRecord>, RegistryError> {
        let now = self.clock.unix();
        let mut out = Vec::new();
        for id in self.store.ids_for(&key.index_key())? {
            let Some(bytes) = self.store.get(&id)? else { continue };
            let rec = decode(&id, &bytes)?;
            if rec.is_active_at(now) {
                out.push(rec);
            }
        }
        Ok(out)
    }

    fn check_integrity(&self, audit: &AuditLog, uuid: &str, bytes: &[u8]) -> Result<(), RegistryError> {
        use sha2::{Digest, Sha256};
        let actual = hex::encode(Sha256::digest(bytes));
        match audit.latest_record_hash(uuid) {
            Some(h) if h == actual => Ok(()),
            _ => Err(RegistryError::IntegrityViolation(uuid.to_string())),
        }
    }

    /// Signs the current endpoint data for an active agent. The stored
    /// record is checked against the audit trail first.
    pub fn get_agent_endpoint_record(&self, uuid: &Uuid) -> Result<EndpointRecord, RegistryError> {
        let id = uuid.to_string();
        let bytes = self
            .store
            .get(&id)?
            .ok_or_else(|| RegistryError::UnknownAgent(id.clone()))?;
        self.check_integrity(&self.writer(), &id, &bytes)?;
        let rec = decode(&id, &bytes)?;
        let now = self.clock.unix();
        let status = rec.effective_status(now);
        if status != AgentStatus::Active {
            return Err(RegistryError::InactiveAgent(status));
        }
        let data = crate::messages::EndpointData {
            ans_name: rec.name.to_string(),
            agent_uuid: id,
            endpoint: rec.endpoint.clone(),
            agent_certificate: rec.certificate.to_pem(),
            protocol_extensions_digest: json_digest(&rec.protocol_extensions),
            issued_at: now,
            ttl_seconds: self.config.ttl_seconds,
        };
        let data = canonicalize_serializable(&data).expect("endpoint data holds no floats");
        let signature = self.identity_key.sign(&data);
        Ok(EndpointRecord {
            data,
            signature,
            cert: self.identity_cert.clone(),
        })
    }

    /// Resolves a capability request to a signed answer for the highest
    /// compatible active version.
    pub fn resolve(&self, req: &CapabilityRequest) -> Result<CapabilityResponse, RegistryError> {
        let body = serde_json::to_value(req).expect("request serializes");
        self.resolve_json(&body)
    }

    pub fn resolve_json(&self, body: &Value) -> Result<CapabilityResponse, RegistryError> {
        self.validate(MessageKind::CapabilityRequest, body)?;
        let req: CapabilityRequest = serde_json::from_value(body.clone())
            .map_err(|e| RegistryError::SchemaViolation(ValidationReport::single("", e.to_string())))?;
        Ok(self.resolve_record(&req)?.to_response())
    }

    /// As [`Registry::resolve`], returning the signed record itself.
    pub fn resolve_record(&self, req: &CapabilityRequest) -> Result<EndpointRecord, RegistryError> {
        let range: VersionRange = req
            .version
            .parse()
            .map_err(|e: NameError| RegistryError::MalformedRange(e.to_string()))?;
        let key = NameKey {
            protocol: req.protocol.clone(),
            agent_id: req.agent_id.clone(),
            capability: req.agent_capability.clone(),
            provider: req.provider.clone(),
        };
        let mut matches = self.lookup(&key)?;
        if let Some(ext) = &req.extension {
            matches.retain(|r| r.name.extension() == Some(ext.as_str()));
        }
        if matches.is_empty() {
            return Err(RegistryError::AgentNotFound(key.to_string()));
        }
        let chosen = version_negotiation(&matches, &range)
            .map_err(|_| RegistryError::IncompatibleVersion(req.version.clone()))?;
        self.get_agent_endpoint_record(&chosen.agent_uuid)
    }

    /// Protocol-shaped discovery document for an active agent.
    pub fn discovery_document(&self, uuid: &Uuid) -> Result<Value, RegistryError> {
        let rec = self
            .get(uuid)?
            .ok_or_else(|| RegistryError::UnknownAgent(uuid.to_string()))?;
        let adapter = self
            .adapters
            .get(rec.name.protocol())
            .map_err(|_| RegistryError::UnknownProtocol(rec.name.protocol().to_string()))?;
        Ok(adapter.create_discovery_response(&rec))
    }

    /// Active agents whose names appear in this agent's extension metadata.
    pub fn linked_agents(&self, uuid: &Uuid) -> Result<Vec<AgentRecord>, RegistryError> {
        let rec = self
            .get(uuid)?
            .ok_or_else(|| RegistryError::UnknownAgent(uuid.to_string()))?;
        let mut out: Vec<AgentRecord> = Vec::new();
        for name in identity::referenced_names(&rec.protocol_extensions) {
            for candidate in self.lookup(&name.key())? {
                let same = candidate.name == name && candidate.name.extension() == name.extension();
                if same && candidate.agent_uuid != *uuid && !out.iter().any(|r| r.agent_uuid == candidate.agent_uuid) {
                    out.push(candidate);
                }
            }
        }
        Ok(out)
    }

    // ---- maintenance ---------------------------------------------------

    /// Rewrites active records past their expiry as expired. Returns how
    /// many changed.
    pub fn sweep_expired(&self) -> Result<usize, RegistryError> {
        let mut audit = self.writer();
        let now = self.clock.unix();
        self.store.write(|tx| {
            let mut changed = 0;
            for id in self.store.all_ids()? {
                let Some(bytes) = tx.get(&id)? else { continue };
                let mut rec = decode(&id, &bytes)?;
                if rec.status == AgentStatus::Active && rec.effective_status(now) == AgentStatus::Expired {
                    rec.status = AgentStatus::Expired;
                    self.persist(tx, &mut audit, "expire", &rec)?;
                    changed += 1;
                }
            }
            Ok(changed)
        })
    }

    /// Re-reads the audit log and checks it reaches the recorded head.
    pub fn verify_audit(&self) -> Result<AuditHead, RegistryError> {
        let audit = self.writer();
        let head: AuditHead = match self.store.meta(META_AUDIT_HEAD)? {
            Some(b) => serde_json::from_slice(&b).map_err(|e| StoreError(format!("audit head: {e}")))?,
            None => AuditHead::genesis(),
        };
        Ok(audit.verify(&head)?)
    }

    pub fn audit_entries(&self) -> Result<Vec<AuditEntry>, RegistryError> {
        Ok(self.writer().entries()?)
    }

    // ---- capability challenges -----------------------------------------

    /// Operator-signed entry point for [`Registry::run_capability_challenge`].
    pub fn challenge(
        &self,
        req: &ChallengeRequest,
        probe: &dyn CapabilityProbe,
    ) -> Result<ChallengeOutcome, RegistryError> {
        if !self.is_operator(req) {
            return Err(RegistryError::BadProof("not signed by an operator".into()));
        }
        self.check_fresh(&req.requested_at)?;
        let uuid = Uuid::parse_str(&req.agent_uuid).map_err(|_| RegistryError::UnknownAgent(req.agent_uuid.clone()))?;
        let challenge = Challenge {
            input: req.input.clone(),
            expected: req.expected.clone(),
            claimed_accuracy: req.claimed_accuracy,
        };
        self.run_capability_challenge(&uuid, &challenge, probe)
    }

    /// Sends a known-answer task to an active agent and records the
    /// outcome. Reaching the failure threshold quarantines the agent; a pass
    /// resets the count. A timeout is recorded as a failure and then
    /// reported as [`RegistryError::ChallengeTimeout`].
    pub fn run_capability_challenge(
        &self,
        uuid: &Uuid,
        challenge: &Challenge,
        probe: &dyn CapabilityProbe,
    ) -> Result<ChallengeOutcome, RegistryError> {
        let claimed = challenge.claimed_accuracy;
        if !claimed.is_finite() || !(0.0..=1.0).contains(&claimed) {
            return Err(RegistryError::InvalidRequest(
                "claimedAccuracy must lie in [0, 1]".into(),
            ));
        }
        let id = uuid.to_string();
        let rec = self.get(uuid)?.ok_or_else(|| RegistryError::UnknownAgent(id.clone()))?;
        let status = rec.effective_status(self.clock.unix());
        if status != AgentStatus::Active {
            return Err(RegistryError::InactiveAgent(status));
        }

        let (answer, timed_out) = match probe.probe(&rec, &challenge.input, self.config.challenge_timeout) {
            Ok(a) => (a, false),
            Err(ProbeError::Timeout) => (
                ProbeAnswer {
                    answer: String::new(),
                    confidence: 0.0,
                },
                true,
            ),
            Err(ProbeError::Failed(_)) => (
                ProbeAnswer {
                    answer: String::new(),
                    confidence: 0.0,
                },
                false,
            ),
        };
        let passed = !timed_out && challenge::judge(challenge, &answer);

        let mut audit = self.writer();
        let now = self.clock.unix();
        let outcome = self.store.write(|tx| {
            let bytes = tx.get(&id)?.ok_or_else(|| RegistryError::UnknownAgent(id.clone()))?;
            let mut rec = decode(&id, &bytes)?;
            if passed {
                rec.consecutive_challenge_failures = 0;
            } else {
                rec.consecutive_challenge_failures += 1;
                if rec.consecutive_challenge_failures >= self.config.quarantine_threshold
                    && rec.status == AgentStatus::Active
                {
                    rec.status = AgentStatus::Quarantined;
                }
            }
            let seq = self.store.challenges(&id)?.len();
            let outcome = ChallengeOutcome {
                agent_uuid: id.clone(),
                challenge_id: format!("{id}/{seq}"),
                expected: challenge.expected.clone(),
                received: answer.answer.clone(),
                confidence: if answer.confidence.is_finite() {
                    answer.confidence
                } else {
                    0.0
                },
                claimed_accuracy: claimed,
                passed,
                at: now,
                status_after: rec.status,
            };
            tx.append_challenge(&id, &serde_json::to_vec(&outcome).expect("outcome serializes"))?;
            let op = if rec.status == AgentStatus::Quarantined {
                "quarantine"
            } else {
                "challenge"
            };
            self.persist(tx, &mut audit, op, &rec)?;
            Ok::<_, RegistryError>(outcome)
        })?;
        if timed_out {
            Err(RegistryError::ChallengeTimeout(Box::new(outcome)))
        } else {
            Ok(outcome)
        }
    }

    pub fn challenge_history(&self, uuid: &Uuid) -> Result<Vec<ChallengeOutcome>, RegistryError> {
        self.store
            .challenges(&uuid.to_string())?
            .iter()
            .map(|b| serde_json::from_slice(b).map_err(|e| StoreError(format!("challenge entry: {e}")).into()))
            .collect()
    }
}
