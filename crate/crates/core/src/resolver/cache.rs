use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use crate::ansname::{NameKey, SemVer};
use crate::pki::CertificateBundle;

/// A verified resolution result.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedEndpoint {
    pub endpoint: String,
    pub ans_name: String,
    pub agent_uuid: String,
    pub agent_certificate: CertificateBundle,
    pub verified_at: i64,
    pub expires_at: i64,
}

/// Cache key: the lookup four-tuple, the optional extension and the
/// version the registry negotiated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub name: NameKey,
    pub extension: Option<String>,
    pub version: SemVer,
}

/// What a caller asked for, before the version is known.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct QueryKey {
    pub name: NameKey,
    pub extension: Option<String>,
    pub range: String,
}

/// TTL cache of verified endpoints. Queries remember which version they
/// last negotiated so that different ranges landing on the same version
/// share one entry.
#[derive(Debug, Default)]
pub struct ResolverCache {
    entries: RwLock<HashMap<CacheKey, ResolvedEndpoint>>,
    negotiated: RwLock<HashMap<QueryKey, SemVer>>,
    flights: Mutex<HashMap<QueryKey, Arc<Mutex<()>>>>,
}

impl ResolverCache {
    pub fn new() -> Self {
        ResolverCache::default()
    }

    /// The entry for `key` if still fresh at `now`. Stale entries are dropped.
    pub fn get(&self, key: &CacheKey, now: i64) -> Option<ResolvedEndpoint> {
        {
            let entries = self.entries.read().expect("cache lock");
            match entries.get(key) {
                Some(e) if now < e.expires_at => return Some(e.clone()),
                None => return None,
                Some(_) => {}
            }
        }
        let mut entries = self.entries.write().expect("cache lock");
        if entries.get(key).is_some_and(|e| now >= e.expires_at) {
            entries.remove(key);
        }
        None
    }

    pub fn insert(&self, key: CacheKey, value: ResolvedEndpoint) {
        self.entries.write().expect("cache lock").insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.entries.write().expect("cache lock").clear();
        self.negotiated.write().expect("cache lock").clear();
    }

    pub(crate) fn get_query(&self, q: &QueryKey, now: i64) -> Option<ResolvedEndpoint> {
        let version = self.negotiated.read().expect("cache lock").get(q).cloned()?;
        self.get(
            &CacheKey {
                name: q.name.clone(),
                extension: q.extension.clone(),
                version,
            },
            now,
        )
    }

    pub(crate) fn insert_query(&self, q: QueryKey, version: SemVer, value: ResolvedEndpoint) {
        let key = CacheKey {
            name: q.name.clone(),
            extension: q.extension.clone(),
            version: version.clone(),
        };
        self.negotiated.write().expect("cache lock").insert(q, version);
        self.insert(key, value);
    }

    /// Lock held while fetching for `q`, so concurrent misses on the same
    /// query wait for one fetch instead of issuing their own.
    pub(crate) fn flight(&self, q: &QueryKey) -> Arc<Mutex<()>> {
        self.flights
            .lock()
            .expect("flight lock")
            .entry(q.clone())
            .or_default()
            .clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansname::Protocol;
    use crate::clock::{Clock, ManualClock};
    use crate::pki::{create_csr, CertificateAuthority, PrivateKey, SignatureAlgorithm, SubjectName};

    fn entry(expires_at: i64) -> ResolvedEndpoint {
        let clock = Arc::new(ManualClock::at_unix(1_700_000_000));
        let ca = CertificateAuthority::new_root(
            &SubjectName::new("CA"),
            PrivateKey::generate(SignatureAlgorithm::Ed25519),
            1,
            clock.clone(),
        )
        .unwrap();
        let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
        let bundle = ca
            .issue_for_secs(&create_csr(&key, &SubjectName::new("a")).unwrap(), 600)
            .unwrap();
        ResolvedEndpoint {
            endpoint: "https://a.example".into(),
            ans_name: "mcp://a.b.c.v1.0.0".into(),
            agent_uuid: "u".into(),
            agent_certificate: bundle,
            verified_at: clock.unix(),
            expires_at,
        }
    }

    fn key() -> CacheKey {
        CacheKey {
            name: NameKey {
                protocol: Protocol::Mcp,
                agent_id: "a".into(),
                capability: "b".into(),
                provider: "c".into(),
            },
            extension: None,
            version: "1.0.0".parse().unwrap(),
        }
    }

    #[test]
    fn hit_before_expiry_miss_after() {
        let cache = ResolverCache::new();
        assert!(cache.get(&key(), 0).is_none());
        cache.insert(key(), entry(1_000 + 300));
        assert!(cache.get(&key(), 1_000 + 299).is_some());
        assert!(cache.get(&key(), 1_000 + 300).is_none());
        assert!(cache.is_empty(), "stale entry evicted");
    }
}
