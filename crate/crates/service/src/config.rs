//! Service configuration, read from TOML.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ratelimit::RateLimitConfig;
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Base URL clients use to reach the service.
    pub server_url: String,
    /// Directory holding keys, certificates, the store and the audit log.
    pub data_dir: PathBuf,
    /// Registry CA certificate clients pin.
    pub trust_anchor: PathBuf,
    pub tls: TlsConfig,
    pub default_ttl_seconds: u64,
    pub cert_validity_days: u32,
    /// Serve plain HTTP. Only for local development.
    pub dev_no_tls: bool,
    /// Accept `http://` agent endpoints.
    pub allow_insecure_endpoints: bool,
    /// PEM public keys allowed to revoke, challenge and deregister.
    pub operator_keys: Vec<PathBuf>,
    pub rate_limit: RateLimitConfig,
    pub adapters: AdapterToggles,
    pub challenge_timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TlsConfig {
    pub cert: PathBuf,
    pub key: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterToggles {
    pub a2a: bool,
    pub mcp: bool,
    pub acp: bool,
    /// Overrides the default ACP role set when non-empty.
    pub acp_roles: Vec<String>,
}

impl Default for AdapterToggles {
    fn default() -> Self {
        AdapterToggles {
            a2a: true,
            mcp: true,
            acp: true,
            acp_roles: Vec::new(),
        }
    }
}

impl Default for TlsConfig {
    fn default() -> Self {
        TlsConfig {
            cert: PathBuf::from("tls.pem"),
            key: PathBuf::from("tls.key.pem"),
        }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8443".parse().expect("static address"),
            server_url: "https://localhost:8443".into(),
            data_dir: PathBuf::from("."),
            trust_anchor: PathBuf::from("trust-anchor.pem"),
            tls: TlsConfig::default(),
            default_ttl_seconds: 300,
            cert_validity_days: 365,
            dev_no_tls: false,
            allow_insecure_endpoints: false,
            operator_keys: Vec::new(),
            rate_limit: RateLimitConfig::default(),
            adapters: AdapterToggles::default(),
            challenge_timeout_ms: 5_000,
        }
    }
}

impl ServiceConfig {
    /// Reads `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ServiceConfig =
            toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        cfg.check()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        let data = self.data_dir.clone();
        let fix_data = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = data.join(&*p);
            }
        };
        fix_data(&mut self.trust_anchor);
        fix_data(&mut self.tls.cert);
        fix_data(&mut self.tls.key);
        for k in &mut self.operator_keys {
            fix_data(k);
        }
    }

    pub fn check(&self) -> Result<(), ServiceError> {
        if self.default_ttl_seconds == 0 {
            return Err(ServiceError::Config("default_ttl_seconds must be positive".into()));
        }
        if self.rate_limit.burst_capacity == 0 {
            return Err(ServiceError::Config("rate_limit.burstCapacity must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
