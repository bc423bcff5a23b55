use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use ed25519_dalek::pkcs8::{DecodePrivateKey, EncodePrivateKey, EncodePublicKey};
use p256::ecdsa::signature::{Signer, Verifier};
use pkcs8::LineEnding;
use rand_core::OsRng;
use serde::{Deserialize, Serialize};

use super::PkiError;

/// Environment variable holding the passphrase for on-disk private keys.
pub const PASSPHRASE_ENV: &str = "ANS_KEY_PASSPHRASE";

const OID_ED25519: &str = "1.3.101.112";
const OID_EC_PUBLIC_KEY: &str = "1.2.840.10045.2.1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SignatureAlgorithm {
    #[serde(rename = "ed25519")]
    Ed25519,
    #[serde(rename = "ecdsa-p256-sha256")]
    EcdsaP256Sha256,
}

impl SignatureAlgorithm {
    pub const ALL: [SignatureAlgorithm; 2] = [SignatureAlgorithm::Ed25519, SignatureAlgorithm::EcdsaP256Sha256];

    pub fn as_str(self) -> &'static str {
        match self {
            SignatureAlgorithm::Ed25519 => "ed25519",
            SignatureAlgorithm::EcdsaP256Sha256 => "ecdsa-p256-sha256",
        }
    }

    /// Length in bytes of a detached signature.
    pub fn signature_len(self) -> usize {
        64
    }
}

impl fmt::Display for SignatureAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignatureAlgorithm {
    type Err = PkiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ed25519" => Ok(SignatureAlgorithm::Ed25519),
            "ecdsa-p256-sha256" | "ecdsa-p256" | "p256" | "es256" => Ok(SignatureAlgorithm::EcdsaP256Sha256),
            _ => Err(PkiError::UnsupportedAlgorithm(s.to_string())),
        }
    }
}

/// A detached signature. ECDSA signatures use the fixed-width `r || s` form.
#[derive(Clone, PartialEq, Eq)]
pub struct Signature {
    algorithm: SignatureAlgorithm,
    bytes: Vec<u8>,
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}, {})", self.algorithm, hex::encode(&self.bytes))
    }
}

impl Signature {
    pub fn from_parts(algorithm: SignatureAlgorithm, bytes: Vec<u8>) -> Self {
        Signature { algorithm, bytes }
    }

    pub fn algorithm(&self) -> SignatureAlgorithm {
        self.algorithm
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn is_well_formed(&self) -> bool {
        self.bytes.len() == self.algorithm.signature_len()
    }
}

#[derive(Clone)]
enum SecretKey {
    Ed25519(ed25519_dalek::SigningKey),
    P256(p256::ecdsa::SigningKey),
}

/// A private signing key. Cloning is cheap and the key is immutable.
#[derive(Clone)]
pub struct PrivateKey(Arc<SecretKey>);

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrivateKey({})", self.algorithm())
    }
}

impl PrivateKey {
    pub fn generate(algorithm: SignatureAlgorithm) -> Self {
        let inner = match algorithm {
            SignatureAlgorithm::Ed25519 => SecretKey::Ed25519(ed25519_dalek::SigningKey::generate(&mut OsRng)),
            SignatureAlgorithm::EcdsaP256Sha256 => SecretKey::P256(p256::ecdsa::SigningKey::random(&mut OsRng)),
        };
        PrivateKey(Arc::new(inner))
    }

    pub fn algorithm(&self) -> SignatureAlgorithm {
        match &*self.0 {
            SecretKey::Ed25519(_) => SignatureAlgorithm::Ed25519,
            SecretKey::P256(_) => SignatureAlgorithm::EcdsaP256Sha256,
        }
    }

    pub fn public_key(&self) -> PublicKey {
        match &*self.0 {
            SecretKey::Ed25519(k) => PublicKey {
                algorithm: SignatureAlgorithm::Ed25519,
                raw: k.verifying_key().to_bytes().to_vec(),
            },
            SecretKey::P256(k) => PublicKey {
                algorithm: SignatureAlgorithm::EcdsaP256Sha256,
                raw: k.verifying_key().to_encoded_point(false).as_bytes().to_vec(),
            },
        }
    }

    pub fn sign(&self, data: &[u8]) -> Signature {
        let bytes = match &*self.0 {
            SecretKey::Ed25519(k) => k.sign(data).to_bytes().to_vec(),
            SecretKey::P256(k) => {
                let sig: p256::ecdsa::Signature = k.sign(data);
                sig.to_bytes().to_vec()
            }
        };
        Signature {
            algorithm: self.algorithm(),
            bytes,
        }
    }

    /// Signature in the encoding X.509 structures expect (DER for ECDSA).
    pub(crate) fn sign_x509(&self, data: &[u8]) -> Vec<u8> {
        match &*self.0 {
            SecretKey::Ed25519(k) => k.sign(data).to_bytes().to_vec(),
            SecretKey::P256(k) => {
                let sig: p256::ecdsa::Signature = k.sign(data);
                sig.to_der().as_bytes().to_vec()
            }
        }
    }

    pub fn to_pkcs8_der(&self) -> Vec<u8> {
        let doc = match &*self.0 {
            SecretKey::Ed25519(k) => k.to_pkcs8_der(),
            SecretKey::P256(k) => k.to_pkcs8_der(),
        };
        doc.expect("in-memory key encodes").as_bytes().to_vec()
    }

    pub fn from_pkcs8_der(der: &[u8]) -> Result<Self, PkiError> {
        if let Ok(k) = ed25519_dalek::SigningKey::from_pkcs8_der(der) {
            return Ok(PrivateKey(Arc::new(SecretKey::Ed25519(k))));
        }
        if let Ok(k) = p256::ecdsa::SigningKey::from_pkcs8_der(der) {
            return Ok(PrivateKey(Arc::new(SecretKey::P256(k))));
        }
        Err(PkiError::InvalidKey("not an Ed25519 or P-256 PKCS#8 key".into()))
    }

    /// Passphrase-encrypted PKCS#8 PEM (scrypt + AES-256-CBC).
    pub fn to_encrypted_pem(&self, passphrase: &str) -> Result<String, PkiError> {
        let pem = match &*self.0 {
            SecretKey::Ed25519(k) => k
                .to_pkcs8_der()
                .and_then(|d| pkcs8::PrivateKeyInfo::try_from(d.as_bytes())?.encrypt(OsRng, passphrase)),
            SecretKey::P256(k) => k
                .to_pkcs8_der()
                .and_then(|d| pkcs8::PrivateKeyInfo::try_from(d.as_bytes())?.encrypt(OsRng, passphrase)),
        }
        .map_err(|e| PkiError::InvalidKey(e.to_string()))?
        .to_pem("ENCRYPTED PRIVATE KEY", LineEnding::LF)
        .map_err(|e| PkiError::InvalidKey(e.to_string()))?;
        Ok(pem.to_string())
    }

    pub fn from_encrypted_pem(pem: &str, passphrase: &str) -> Result<Self, PkiError> {
        let (label, doc) = pkcs8::SecretDocument::from_pem(pem).map_err(|e| PkiError::InvalidKey(e.to_string()))?;
        if label != "ENCRYPTED PRIVATE KEY" {
            return Err(PkiError::InvalidKey(format!(
                "expected an encrypted private key, found {label}"
            )));
        }
        let info = pkcs8::EncryptedPrivateKeyInfo::try_from(doc.as_bytes())
            .map_err(|e| PkiError::InvalidKey(e.to_string()))?;
        let plain = info.decrypt(passphrase).map_err(|_| PkiError::BadPassphrase)?;
        PrivateKey::from_pkcs8_der(plain.as_bytes())
    }

    /// Writes the key encrypted, with owner-only permissions on Unix.
    pub fn save(&self, path: &Path, passphrase: &str) -> Result<(), PkiError> {
        let pem = self.to_encrypted_pem(passphrase)?;
        let mut opts = fs::OpenOptions::new();
        opts.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = opts.open(path)?;
        f.write_all(pem.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path, passphrase: &str) -> Result<Self, PkiError> {
        let pem = fs::read_to_string(path)?;
        PrivateKey::from_encrypted_pem(&pem, passphrase)
    }

    /// Loads a key using the passphrase from [`PASSPHRASE_ENV`].
    pub fn load_with_env(path: &Path) -> Result<Self, PkiError> {
        let pass = std::env::var(PASSPHRASE_ENV).map_err(|_| PkiError::MissingPassphrase)?;
        PrivateKey::load(path, &pass)
    }
}

/// A public verification key in raw form (32-byte Ed25519 key or
/// uncompressed SEC1 P-256 point).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PublicKey {
    algorithm: SignatureAlgorithm,
    raw: Vec<u8>,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}, {})", self.algorithm, hex::encode(&self.raw))
    }
}

impl PublicKey {
    pub fn algorithm(&self) -> SignatureAlgorithm {
        self.algorithm
    }

    pub fn raw_bytes(&self) -> &[u8] {
        &self.raw
    }

    pub fn from_raw(algorithm: SignatureAlgorithm, raw: &[u8]) -> Result<Self, PkiError> {
        let ok = match algorithm {
            SignatureAlgorithm::Ed25519 => <[u8; 32]>::try_from(raw)
                .ok()
                .and_then(|b| ed25519_dalek::VerifyingKey::from_bytes(&b).ok())
                .is_some(),
            SignatureAlgorithm::EcdsaP256Sha256 => p256::ecdsa::VerifyingKey::from_sec1_bytes(raw).is_ok(),
        };
        if !ok {
            return Err(PkiError::InvalidKey(format!("malformed {algorithm} public key")));
        }
        Ok(PublicKey {
            algorithm,
            raw: raw.to_vec(),
        })
    }

    /// DER SubjectPublicKeyInfo.
    pub fn to_spki_der(&self) -> Vec<u8> {
        let doc = match self.algorithm {
            SignatureAlgorithm::Ed25519 => {
                let b: [u8; 32] = self.raw.as_slice().try_into().expect("validated at construction");
                ed25519_dalek::VerifyingKey::from_bytes(&b)
                    .expect("validated at construction")
                    .to_public_key_der()
            }
            SignatureAlgorithm::EcdsaP256Sha256 => p256::ecdsa::VerifyingKey::from_sec1_bytes(&self.raw)
                .expect("validated at construction")
                .to_public_key_der(),
        };
        doc.expect("public key encodes").as_bytes().to_vec()
    }

    pub fn from_spki_der(der: &[u8]) -> Result<Self, PkiError> {
        use x509_parser::prelude::FromDer;
        let (rest, spki) = x509_parser::x509::SubjectPublicKeyInfo::from_der(der)
            .map_err(|e| PkiError::Malformed(format!("SubjectPublicKeyInfo: {e}")))?;
        if !rest.is_empty() {
            return Err(PkiError::Malformed("trailing bytes after SubjectPublicKeyInfo".into()));
        }
        PublicKey::from_spki(&spki)
    }

    pub(crate) fn from_spki(spki: &x509_parser::x509::SubjectPublicKeyInfo<'_>) -> Result<Self, PkiError> {
        let oid = spki.algorithm.algorithm.to_id_string();
        let raw = spki.subject_public_key.data.as_ref();
        match oid.as_str() {
            OID_ED25519 => PublicKey::from_raw(SignatureAlgorithm::Ed25519, raw),
            OID_EC_PUBLIC_KEY => PublicKey::from_raw(SignatureAlgorithm::EcdsaP256Sha256, raw),
            other => Err(PkiError::UnsupportedAlgorithm(other.to_string())),
        }
    }

    pub fn to_pem(&self) -> String {
        pem::encode(&pem::Pem::new("PUBLIC KEY", self.to_spki_der()))
    }

    pub fn verify(&self, data: &[u8], sig: &Signature) -> bool {
        if sig.algorithm != self.algorithm || !sig.is_well_formed() {
            return false;
        }
        match self.algorithm {
            SignatureAlgorithm::Ed25519 => {
                let Ok(b) = <[u8; 32]>::try_from(self.raw.as_slice()) else {
                    return false;
                };
                let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&b) else {
                    return false;
                };
                let Ok(s) = ed25519_dalek::Signature::from_slice(&sig.bytes) else {
                    return false;
                };
                vk.verify_strict(data, &s).is_ok()
            }
            SignatureAlgorithm::EcdsaP256Sha256 => {
                let Ok(vk) = p256::ecdsa::VerifyingKey::from_sec1_bytes(&self.raw) else {
                    return false;
                };
                let Ok(s) = p256::ecdsa::Signature::from_slice(&sig.bytes) else {
                    return false;
                };
                vk.verify(data, &s).is_ok()
            }
        }
    }

    /// Verifies a signature as encoded inside X.509 structures.
    pub(crate) fn verify_x509(&self, data: &[u8], sig: &[u8]) -> bool {
        match self.algorithm {
            SignatureAlgorithm::Ed25519 => self.verify(data, &Signature::from_parts(self.algorithm, sig.to_vec())),
            SignatureAlgorithm::EcdsaP256Sha256 => match p256::ecdsa::Signature::from_der(sig) {
                Ok(s) => self.verify(data, &Signature::from_parts(self.algorithm, s.to_bytes().to_vec())),
                Err(_) => false,
            },
        }
    }
}

/// Generates a fresh key pair.
pub fn generate_keypair(algorithm: &str) -> Result<(PrivateKey, PublicKey), PkiError> {
    let alg: SignatureAlgorithm = algorithm.parse()?;
    let key = PrivateKey::generate(alg);
    let public = key.public_key();
    Ok((key, public))
}

pub fn sign(data: &[u8], key: &PrivateKey) -> Signature {
    key.sign(data)
}

pub fn verify_signature(data: &[u8], sig: &Signature, public_key: &PublicKey) -> bool {
    public_key.verify(data, sig)
}
