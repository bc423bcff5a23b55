//! On-disk layout of a registry node and its bootstrap.
//!
//! ```text
//! <data_dir>/
//!   ans.toml              service configuration
//!   ca.pem  ca.key.pem    registry CA (the trust anchor)
//!   trust-anchor.pem      copy of ca.pem for distribution to clients
//!   registry.pem  registry.key.pem   key that signs lookup answers
//!   tls.pem  tls.key.pem  HTTPS server certificate
//!   crl.pem               latest CRL
//!   registry.redb         agent store
//!   audit.ndjson          hash-chained audit log
//! ```
//!
//! Private keys are encrypted PKCS#8; the passphrase comes from
//! `ANS_KEY_PASSPHRASE`.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use ans_core::adapters::{A2aAdapter, AcpAdapter, AdapterSet, McpAdapter};
use ans_core::clock::Clock;
use ans_core::pki::{
    create_csr, Certificate, CertificateAuthority, CertificateBundle, PrivateKey, PublicKey, SignatureAlgorithm,
    SubjectName,
};
use ans_core::registry::{AuditLog, Registry, RegistryConfig, Store};

use crate::config::ServiceConfig;
use crate::ServiceError;

pub const CONFIG_FILE: &str = "ans.toml";
pub const CA_CERT: &str = "ca.pem";
pub const CA_KEY: &str = "ca.key.pem";
pub const TRUST_ANCHOR: &str = "trust-anchor.pem";
pub const REGISTRY_CERT: &str = "registry.pem";
pub const REGISTRY_KEY: &str = "registry.key.pem";
pub const CRL_FILE: &str = "crl.pem";
pub const AUDIT_FILE: &str = "audit.ndjson";

const DAY: i64 = 86_400;

#[derive(Debug, Clone)]
pub struct InitOptions {
    pub algorithm: SignatureAlgorithm,
    /// Host names and addresses for the TLS certificate.
    pub hosts: Vec<String>,
    pub listen: std::net::SocketAddr,
    pub ca_validity_days: u32,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            algorithm: SignatureAlgorithm::Ed25519,
            hosts: vec!["localhost".into(), "127.0.0.1".into()],
            listen: "127.0.0.1:8443".parse().expect("static address"),
            ca_validity_days: 3650,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ServiceError> {
    std::fs::write(path, contents).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, ServiceError> {
    std::fs::read_to_string(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))
}

/// Creates a new node under `dir`: CA, signing identity, TLS certificate
/// and a config file. Refuses to overwrite an existing CA.
pub fn init(
    dir: &Path,
    passphrase: &str,
    opts: &InitOptions,
    clock: Arc<dyn Clock>,
) -> Result<ServiceConfig, ServiceError> {
    std::fs::create_dir_all(dir).map_err(|e| ServiceError::Io(format!("{}: {e}", dir.display())))?;
    if dir.join(CA_KEY).exists() {
        return Err(ServiceError::Config(format!("{} already holds a CA", dir.display())));
    }
    let mut subject = SubjectName::new("ANS Registry CA");
    subject.organization = Some("Agent Name Service".into());
    let ca_key = PrivateKey::generate(opts.algorithm);
    let ca = CertificateAuthority::new_root(&subject, ca_key.clone(), opts.ca_validity_days, clock)?;

    let id_key = PrivateKey::generate(opts.algorithm);
    let mut id_subject = SubjectName::new("ANS Registry");
    id_subject.organization = Some("Agent Name Service".into());
    let id_cert = ca.issue_for_secs(&create_csr(&id_key, &id_subject)?, 365 * DAY)?;

    let tls_key = PrivateKey::generate(opts.algorithm);
    let tls_cert = ca.issue_server_certificate(&tls_key.public_key(), &opts.hosts, 365 * DAY)?;

    ca_key.save(&dir.join(CA_KEY), passphrase)?;
    id_key.save(&dir.join(REGISTRY_KEY), passphrase)?;
    let cfg = ServiceConfig {
        listen: opts.listen,
        server_url: format!(
            "https://{}:{}",
            opts.hosts.first().map(String::as_str).unwrap_or("localhost"),
            opts.listen.port()
        ),
        data_dir: dir.to_path_buf(),
        trust_anchor: dir.join(TRUST_ANCHOR),
        ..ServiceConfig::default()
    };
    tls_key.save(&cfg.tls.key_path(dir), passphrase)?;
    write_file(&dir.join(CA_CERT), &ca.certificate().to_pem())?;
    write_file(&dir.join(TRUST_ANCHOR), &ca.certificate().to_pem())?;
    write_file(&dir.join(REGISTRY_CERT), &id_cert.to_pem())?;
    write_file(&cfg.tls.cert_path(dir), &tls_cert.to_pem())?;
    write_file(&dir.join(CRL_FILE), &ca.crl()?.to_pem())?;
    // The CA state (issued serials) lives in the store from the first open.
    let store = Store::open(dir)?;
    store.write(|tx| tx.put_meta("ca_state", &serde_json::to_vec(&ca.state()).expect("state serializes")))?;

    let on_disk = ServiceConfig {
        data_dir: PathBuf::from("."),
        trust_anchor: PathBuf::from(TRUST_ANCHOR),
        ..cfg.clone()
    };
    write_file(&dir.join(CONFIG_FILE), &on_disk.to_toml())?;
    Ok(cfg)
}

impl crate::config::TlsConfig {
    fn cert_path(&self, dir: &Path) -> PathBuf {
        if self.cert.is_relative() {
            dir.join(&self.cert)
        } else {
            self.cert.clone()
        }
    }

    fn key_path(&self, dir: &Path) -> PathBuf {
        if self.key.is_relative() {
            dir.join(&self.key)
        } else {
            self.key.clone()
        }
    }
}

pub fn adapter_set(cfg: &ServiceConfig) -> AdapterSet {
    let mut set = AdapterSet::empty();
    if cfg.adapters.a2a {
        set.register(Box::new(A2aAdapter));
    }
    if cfg.adapters.mcp {
        set.register(Box::new(McpAdapter));
    }
    if cfg.adapters.acp {
        let acp = if cfg.adapters.acp_roles.is_empty() {
            AcpAdapter::default()
        } else {
            AcpAdapter::with_roles(cfg.adapters.acp_roles.iter().cloned())
        };
        set.register(Box::new(acp));
    }
    set
}

/// Opens the registry stored under `cfg.data_dir`.
pub fn open_registry(cfg: &ServiceConfig, passphrase: &str, clock: Arc<dyn Clock>) -> Result<Registry, ServiceError> {
    let dir = &cfg.data_dir;
    let ca_cert = Certificate::from_pem(&read_file(&dir.join(CA_CERT))?)?;
    let ca_key = PrivateKey::load(&dir.join(CA_KEY), passphrase)?;
    let id_cert = CertificateBundle::from_pem(&read_file(&dir.join(REGISTRY_CERT))?)?;
    let id_key = PrivateKey::load(&dir.join(REGISTRY_KEY), passphrase)?;
    let mut builder = Registry::builder(clock)
        .config(RegistryConfig {
            ttl_seconds: cfg.default_ttl_seconds,
            cert_validity_days: cfg.cert_validity_days,
            allow_insecure_endpoints: cfg.allow_insecure_endpoints,
            challenge_timeout: Duration::from_millis(cfg.challenge_timeout_ms),
            ..RegistryConfig::default()
        })
        .adapters(adapter_set(cfg))
        .store(Store::open(dir)?)
        .audit(AuditLog::open(dir.join(AUDIT_FILE))?)
        .authority(ca_cert, Vec::new(), ca_key)
        .identity(id_key.clone(), id_cert);
    let mut operators = vec![id_key.public_key()];
    for path in &cfg.operator_keys {
        operators.push(load_public_key(path)?);
    }
    for key in operators {
        builder = builder.operator(key);
    }
    Ok(builder.build()?)
}

/// Reads a PEM public key file.
pub fn load_public_key(path: &Path) -> Result<PublicKey, ServiceError> {
    let text = read_file(path)?;
    let block = pem_block(&text).ok_or_else(|| ServiceError::Config(format!("{}: no PEM block", path.display())))?;
    Ok(PublicKey::from_spki_der(&block)?)
}

fn pem_block(text: &str) -> Option<Vec<u8>> {
    use base64::Engine;
    let body: String = text
        .lines()
        .skip_while(|l| !l.starts_with("-----BEGIN"))
        .skip(1)
        .take_while(|l| !l.starts_with("-----END"))
        .collect();
    base64::engine::general_purpose::STANDARD.decode(body).ok()
}

/// Writes the current CRL next to the store.
pub fn write_crl(cfg: &ServiceConfig, pem: &str) -> Result<(), ServiceError> {
    write_file(&cfg.data_dir.join(CRL_FILE), pem)
}

/// TLS certificate chain (DER) and decrypted PKCS#8 key for the listener.
pub fn tls_material(cfg: &ServiceConfig, passphrase: &str) -> Result<(Vec<Vec<u8>>, Vec<u8>), ServiceError> {
    let bundle = CertificateBundle::from_pem(&read_file(&cfg.tls.cert)?)?;
    let key = PrivateKey::load(&cfg.tls.key, passphrase)?;
    let certs = bundle.iter().map(|c| c.der().to_vec()).collect();
    Ok((certs, key.to_pkcs8_der()))
}
