//! Client-side resolution: query the registry, verify what comes back,
//! cache it for its TTL.

mod cache;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::ansname::{AnsName, NameError, NameKey, SemVer, VersionRange};
use crate::clock::Clock;
use crate::messages::{CapabilityRequest, CapabilityResponse, EndpointData, ResolveRequestType};
use crate::pki::{verify_cert_chain, Certificate, CertificateBundle, ChainError, RevocationList};
use crate::registry::{EndpointRecord, Registry, RegistryError};

use cache::QueryKey;
pub use cache::{CacheKey, ResolvedEndpoint, ResolverCache};

/// Why an endpoint record was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyFailure {
    #[error("invalid signature")]
    InvalidSignature,
    #[error("certificate chain rejected: {0}")]
    Chain(#[from] ChainError),
    #[error("agent certificate rejected: {0}")]
    AgentCertificate(ChainError),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("record does not answer the query: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolverError {
    #[error("agent not found: {0}")]
    AgentNotFound(String),
    #[error("no registered version satisfies {0:?}")]
    IncompatibleVersion(String),
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(VerifyFailure),
    #[error(transparent)]
    MalformedName(NameError),
    #[error("malformed version range: {0}")]
    MalformedRange(String),
    #[error("registry unreachable: {0}")]
    Transport(String),
    #[error("registry refused the query: {code}: {message}")]
    Rejected { code: String, message: String },
}

/// Failures a transport reports back to the resolver.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("agent not found: {0}")]
    NotFound(String),
    #[error("incompatible version: {0}")]
    IncompatibleVersion(String),
    #[error("malformed range: {0}")]
    MalformedRange(String),
    #[error("{code}: {message}")]
    Rejected { code: String, message: String },
    #[error("network failure: {0}")]
    Network(String),
}

impl From<TransportError> for ResolverError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::NotFound(m) => ResolverError::AgentNotFound(m),
            TransportError::IncompatibleVersion(m) => ResolverError::IncompatibleVersion(m),
            TransportError::MalformedRange(m) => ResolverError::MalformedRange(m),
            TransportError::Rejected { code, message } => ResolverError::Rejected { code, message },
            TransportError::Network(m) => ResolverError::Transport(m),
        }
    }
}

/// How a resolver reaches a registry.
pub trait RegistryTransport: Send + Sync {
    fn fetch_endpoint(&self, req: &CapabilityRequest) -> Result<CapabilityResponse, TransportError>;

    /// The current CRL in PEM form.
    fn fetch_crl(&self) -> Result<String, TransportError>;
}

/// In-process transport straight onto a [`Registry`].
#[derive(Debug, Clone)]
pub struct LocalTransport {
    registry: Arc<Registry>,
}

impl LocalTransport {
    pub fn new(registry: Arc<Registry>) -> Self {
        LocalTransport { registry }
    }
}

impl From<RegistryError> for TransportError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::AgentNotFound(m) => TransportError::NotFound(m),
            RegistryError::IncompatibleVersion(m) => TransportError::IncompatibleVersion(m),
            RegistryError::MalformedRange(m) => TransportError::MalformedRange(m),
            other => TransportError::Rejected {
                code: other.code().to_string(),
                message: other.to_string(),
            },
        }
    }
}

impl RegistryTransport for LocalTransport {
    fn fetch_endpoint(&self, req: &CapabilityRequest) -> Result<CapabilityResponse, TransportError> {
        Ok(self.registry.resolve(req)?)
    }

    fn fetch_crl(&self) -> Result<String, TransportError> {
        Ok(self.registry.crl()?.to_pem())
    }
}

impl<T: RegistryTransport + ?Sized> RegistryTransport for Arc<T> {
    fn fetch_endpoint(&self, req: &CapabilityRequest) -> Result<CapabilityResponse, TransportError> {
        (**self).fetch_endpoint(req)
    }

    fn fetch_crl(&self) -> Result<String, TransportError> {
        (**self).fetch_crl()
    }
}

/// Checks a registry-signed record: the signature under the key in
/// `rec.cert`, then that certificate's chain up to `trusted_ca` with the
/// given CRLs applied.
pub fn verify_agent_endpoint_record(
    rec: &EndpointRecord,
    trusted_ca: &Certificate,
    crls: &[RevocationList],
    now: i64,
) -> Result<(), VerifyFailure> {
    let registry_key = rec.cert.certificate().public_key();
    if !registry_key.verify(&rec.data, &rec.signature) {
        return Err(VerifyFailure::InvalidSignature);
    }
    verify_cert_chain(&rec.cert, trusted_ca, crls, now)?;
    Ok(())
}

struct CrlState {
    pem: Option<String>,
    /// Verified lists by issuer DN.
    lists: Vec<RevocationList>,
    refresh_at: i64,
}

/// Resolves names against one registry, pinned to one trust anchor.
pub struct Resolver<T: RegistryTransport> {
    transport: T,
    trusted_ca: Certificate,
    clock: Arc<dyn Clock>,
    cache: ResolverCache,
    crl: Mutex<CrlState>,
    fetches: AtomicU64,
}

impl<T: RegistryTransport> std::fmt::Debug for Resolver<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Resolver")
            .field("trusted_ca", &self.trusted_ca.subject_dn())
            .field("fetches", &self.fetch_count())
            .finish_non_exhaustive()
    }
}

impl<T: RegistryTransport> Resolver<T> {
    pub fn new(transport: T, trusted_ca: Certificate, clock: Arc<dyn Clock>) -> Self {
        Resolver {
            transport,
            trusted_ca,
            clock,
            cache: ResolverCache::new(),
            crl: Mutex::new(CrlState {
                pem: None,
                lists: Vec::new(),
                refresh_at: i64::MIN,
            }),
            fetches: AtomicU64::new(0),
        }
    }

    pub fn trusted_ca(&self) -> &Certificate {
        &self.trusted_ca
    }

    pub fn cache(&self) -> &ResolverCache {
        &self.cache
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Endpoint fetches performed so far (cache misses that reached the
    /// transport).
    pub fn fetch_count(&self) -> u64 {
        self.fetches.load(Ordering::Relaxed)
    }

    /// Forces the next verification to fetch a fresh CRL.
    pub fn invalidate_crl(&self) {
        let mut st = self.crl.lock().expect("crl lock");
        st.refresh_at = i64::MIN;
    }

    /// Resolves `name` (its version label is ignored) for `range`.
    pub fn resolve(&self, name: &str, range: &str) -> Result<ResolvedEndpoint, ResolverError> {
        let name: AnsName = name.parse().map_err(ResolverError::MalformedName)?;
        self.resolve_key(&name.key(), name.extension(), range)
    }

    /// Resolves by the four lookup keys plus an optional extension.
    pub fn resolve_key(
        &self,
        key: &NameKey,
        extension: Option<&str>,
        range: &str,
    ) -> Result<ResolvedEndpoint, ResolverError> {
        let parsed: VersionRange = range
            .parse()
            .map_err(|e: NameError| ResolverError::MalformedRange(e.to_string()))?;
        let query = QueryKey {
            name: key.clone(),
            extension: extension.map(str::to_string),
            range: parsed.raw().trim().to_string(),
        };
        if let Some(hit) = self.cache.get_query(&query, self.clock.unix()) {
            return Ok(hit);
        }
        let flight = self.cache.flight(&query);
        let _guard = flight.lock().expect("flight lock");
        if let Some(hit) = self.cache.get_query(&query, self.clock.unix()) {
            return Ok(hit);
        }

        let req = CapabilityRequest {
            request_type: ResolveRequestType::Resolve,
            protocol: key.protocol.clone(),
            agent_id: key.agent_id.clone(),
            agent_capability: key.capability.clone(),
            provider: key.provider.clone(),
            version: range.trim().to_string(),
            extension: extension.map(str::to_string),
        };
        self.fetches.fetch_add(1, Ordering::Relaxed);
        let resp = self.transport.fetch_endpoint(&req)?;
        let (resolved, version) = self.verify_response(&resp, &query, &parsed)?;
        self.cache.insert_query(query, version, resolved.clone());
        Ok(resolved)
    }

    fn verify_response(
        &self,
        resp: &CapabilityResponse,
        query: &QueryKey,
        range: &VersionRange,
    ) -> Result<(ResolvedEndpoint, SemVer), ResolverError> {
        let invalid = ResolverError::InvalidEndpoint;
        let malformed = |m: String| invalid(VerifyFailure::Malformed(m));
        let rec = EndpointRecord::from_response(resp).map_err(malformed)?;
        let now = self.clock.unix();

        // Chain without revocation first, so the CRL can be checked
        // against certificates already tied to the anchor.
        verify_agent_endpoint_record(&rec, &self.trusted_ca, &[], now).map_err(invalid)?;
        let crls = self.crls(&rec.cert).map_err(invalid)?;
        verify_agent_endpoint_record(&rec, &self.trusted_ca, &crls, now).map_err(invalid)?;

        let data: EndpointData = rec.payload().map_err(|e| malformed(e.to_string()))?;
        let name: AnsName = data.ans_name.parse().map_err(|e: NameError| malformed(e.to_string()))?;
        let mismatch = |m: &str| invalid(VerifyFailure::Mismatch(m.to_string()));
        if name.key() != query.name {
            return Err(mismatch("name differs from the query"));
        }
        if query.extension.is_some() && name.extension() != query.extension.as_deref() {
            return Err(mismatch("extension differs from the query"));
        }
        if query.range != "*" && !range.satisfies(name.version()) {
            return Err(mismatch("version outside the requested range"));
        }
        if data.endpoint.is_empty() || resp.endpoint != data.endpoint {
            return Err(mismatch("endpoint is empty or differs from the signed data"));
        }
        if data.ttl_seconds == 0 {
            return Err(malformed("ttl must be positive".into()));
        }
        let agent_cert = CertificateBundle::from_pem(&data.agent_certificate).map_err(|e| malformed(e.to_string()))?;
        if agent_cert.certificate().subject().common_name != name.agent_id() {
            return Err(mismatch("agent certificate is for another agent"));
        }
        verify_cert_chain(&agent_cert, &self.trusted_ca, &crls, now)
            .map_err(|e| invalid(VerifyFailure::AgentCertificate(e)))?;

        let expires_at = (now + data.ttl_seconds as i64).min(agent_cert.certificate().not_after().max(now + 1));
        Ok((
            ResolvedEndpoint {
                endpoint: data.endpoint,
                ans_name: data.ans_name,
                agent_uuid: data.agent_uuid,
                agent_certificate: agent_cert,
                verified_at: now,
                expires_at,
            },
            name.version().clone(),
        ))
    }

    /// Verified CRLs for the issuers along `chain`, refreshed at half their
    /// validity. Fails closed when no list can be verified or the held one
    /// is past its next update.
    fn crls(&self, chain: &CertificateBundle) -> Result<Vec<RevocationList>, VerifyFailure> {
        let now = self.clock.unix();
        let mut st = self.crl.lock().expect("crl lock");
        if st.pem.is_none() || now >= st.refresh_at {
            match self.transport.fetch_crl() {
                Ok(pem) => {
                    st.pem = Some(pem);
                    st.lists.clear();
                }
                Err(e) if st.lists.iter().all(|l| l.is_stale(now)) => {
                    return Err(VerifyFailure::Malformed(format!("no current CRL: {e}")));
                }
                Err(_) => {}
            }
        }
        if st.lists.is_empty() {
            let pem = st.pem.clone().unwrap_or_default();
            let issuers = std::iter::once(&self.trusted_ca).chain(chain.iter().filter(|c| c.is_ca()));
            for issuer in issuers {
                if let Ok(list) = RevocationList::from_pem_verified(&pem, issuer) {
                    st.refresh_at = list.issued_at() + list.refresh_interval().max(1);
                    st.lists.push(list);
                    break;
                }
            }
            if st.lists.is_empty() {
                return Err(VerifyFailure::Malformed(
                    "CRL does not verify against the trust anchor".into(),
                ));
            }
        }
        if st.lists.iter().all(|l| l.is_stale(now)) {
            return Err(VerifyFailure::Malformed("CRL is past its next update".into()));
        }
        Ok(st.lists.clone())
    }
}
