//! Keys, certificates, the issuing CA and revocation.
//!
//! Certificates and CRLs are real X.509 structures. Encoding is delegated to
//! `rcgen` and decoding to `x509-parser`; every signature check on them goes
//! through [`PublicKey::verify`] so there is exactly one verification path.

mod ca;
mod cert;
mod chain;
mod crl;
mod keys;

use thiserror::Error;

pub use ca::{CaState, CertificateAuthority, DEFAULT_CRL_LIFETIME_SECS};
pub use cert::{create_csr, Certificate, CertificateBundle, Csr, CsrInfo, SubjectName};
pub use chain::{verify_cert_chain, ChainError};
pub use crl::RevocationList;
pub use keys::{
    generate_keypair, sign, verify_signature, PrivateKey, PublicKey, Signature, SignatureAlgorithm, PASSPHRASE_ENV,
};

#[derive(Debug, Error)]
pub enum PkiError {
    #[error("unsupported algorithm {0:?}")]
    UnsupportedAlgorithm(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("wrong passphrase for encrypted key")]
    BadPassphrase,
    #[error("no passphrase in ${}", keys::PASSPHRASE_ENV)]
    MissingPassphrase,
    #[error("invalid CSR: {0}")]
    InvalidCsr(String),
    #[error("malformed certificate material: {0}")]
    Malformed(String),
    #[error("serial {0} was never issued by this CA")]
    UnknownSerial(String),
    #[error("CRL signature or issuer does not match")]
    UntrustedCrl,
    #[error("certificate encoding failed: {0}")]
    Encoding(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<rcgen::Error> for PkiError {
    fn from(e: rcgen::Error) -> Self {
        PkiError::Encoding(e.to_string())
    }
}

pub(crate) const OID_SIG_ED25519: &str = "1.3.101.112";
pub(crate) const OID_SIG_ECDSA_SHA256: &str = "1.2.840.10045.4.3.2";

/// Checks an X.509 signature made over `tbs` by the holder of `key`.
pub(crate) fn verify_x509_signature(key: &PublicKey, sig_oid: &str, tbs: &[u8], sig: &[u8]) -> bool {
    let expected = match key.algorithm() {
        SignatureAlgorithm::Ed25519 => OID_SIG_ED25519,
        SignatureAlgorithm::EcdsaP256Sha256 => OID_SIG_ECDSA_SHA256,
    };
    sig_oid == expected && key.verify_x509(tbs, sig)
}

pub(crate) fn pem_encode(label: &str, der: &[u8]) -> String {
    let cfg = pem::EncodeConfig::new().set_line_ending(pem::LineEnding::LF);
    pem::encode_config(&pem::Pem::new(label, der), cfg)
}

/// Adapter letting `rcgen` sign with our keys.
struct RcgenSigner {
    key: PrivateKey,
    public: Vec<u8>,
}

impl rcgen::RemoteKeyPair for RcgenSigner {
    fn public_key(&self) -> &[u8] {
        &self.public
    }

    fn sign(&self, msg: &[u8]) -> Result<Vec<u8>, rcgen::Error> {
        Ok(self.key.sign_x509(msg))
    }

    fn algorithm(&self) -> &'static rcgen::SignatureAlgorithm {
        match self.key.algorithm() {
            SignatureAlgorithm::Ed25519 => &rcgen::PKCS_ED25519,
            SignatureAlgorithm::EcdsaP256Sha256 => &rcgen::PKCS_ECDSA_P256_SHA256,
        }
    }
}

pub(crate) fn rcgen_key(key: &PrivateKey) -> Result<rcgen::KeyPair, PkiError> {
    let signer = RcgenSigner {
        public: key.public_key().raw_bytes().to_vec(),
        key: key.clone(),
    };
    Ok(rcgen::KeyPair::from_remote(Box::new(signer))?)
}

pub(crate) fn offset_time(unix: i64) -> time::OffsetDateTime {
    time::OffsetDateTime::from_unix_timestamp(unix).unwrap_or(time::OffsetDateTime::UNIX_EPOCH)
}
