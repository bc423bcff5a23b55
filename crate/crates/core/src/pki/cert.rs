use std::fmt;
use std::sync::Arc;

use x509_parser::certificate::X509Certificate;
use x509_parser::certification_request::X509CertificationRequest;
use x509_parser::extensions::{GeneralName, ParsedExtension};
use x509_parser::prelude::FromDer;
use x509_parser::x509::X509Name;

use super::{pem_encode, rcgen_key, verify_x509_signature, PkiError, PrivateKey, PublicKey};
use crate::ansname::AnsName;

/// The subject fields this registry puts into certificates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubjectName {
    pub common_name: String,
    pub organizational_unit: Option<String>,
    pub organization: Option<String>,
    pub san_uris: Vec<String>,
}

impl fmt::Display for SubjectName {
    /// `CN=..., OU=..., O=...` in the order the certificate carries them.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CN={}", self.common_name)?;
        if let Some(ou) = &self.organizational_unit {
            write!(f, ", OU={ou}")?;
        }
        if let Some(o) = &self.organization {
            write!(f, ", O={o}")?;
        }
        Ok(())
    }
}

impl SubjectName {
    pub fn new(common_name: impl Into<String>) -> Self {
        SubjectName {
            common_name: common_name.into(),
            ..Default::default()
        }
    }

    /// CN=agentID, OU=capability, O=provider, URI SAN = the canonical name.
    pub fn for_agent(name: &AnsName) -> Self {
        SubjectName {
            common_name: name.agent_id().to_string(),
            organizational_unit: Some(name.capability().to_string()),
            organization: Some(name.provider().to_string()),
            san_uris: vec![name.to_string()],
        }
    }

    pub(crate) fn to_rcgen(&self) -> rcgen::DistinguishedName {
        let mut dn = rcgen::DistinguishedName::new();
        dn.push(rcgen::DnType::CommonName, self.common_name.as_str());
        if let Some(ou) = &self.organizational_unit {
            dn.push(rcgen::DnType::OrganizationalUnitName, ou.as_str());
        }
        if let Some(o) = &self.organization {
            dn.push(rcgen::DnType::OrganizationName, o.as_str());
        }
        dn
    }

    pub(crate) fn rcgen_sans(&self) -> Result<Vec<rcgen::SanType>, PkiError> {
        self.san_uris
            .iter()
            .map(|u| {
                rcgen::Ia5String::try_from(u.as_str())
                    .map(rcgen::SanType::URI)
                    .map_err(|e| PkiError::Encoding(e.to_string()))
            })
            .collect()
    }

    fn from_x509(name: &X509Name<'_>, san_uris: Vec<String>) -> Self {
        let first = |it: &mut dyn Iterator<Item = &x509_parser::x509::AttributeTypeAndValue<'_>>| {
            it.next().and_then(|a| a.as_str().ok()).map(str::to_string)
        };
        SubjectName {
            common_name: first(&mut name.iter_common_name()).unwrap_or_default(),
            organizational_unit: first(&mut name.iter_organizational_unit()),
            organization: first(&mut name.iter_organization()),
            san_uris,
        }
    }
}

fn san_uris<'a>(exts: impl Iterator<Item = &'a ParsedExtension<'a>>) -> Vec<String> {
    let mut out = Vec::new();
    for ext in exts {
        if let ParsedExtension::SubjectAlternativeName(san) = ext {
            for gn in &san.general_names {
                if let GeneralName::URI(u) = gn {
                    out.push(u.to_string());
                }
            }
        }
    }
    out
}

/// A certificate signing request.
#[derive(Clone, PartialEq, Eq)]
pub struct Csr {
    der: Vec<u8>,
}

impl fmt::Debug for Csr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Csr({} bytes)", self.der.len())
    }
}

/// What a verified CSR asserts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrInfo {
    pub subject: SubjectName,
    pub public_key: PublicKey,
    pub spki_der: Vec<u8>,
}

impl Csr {
    pub fn from_der(der: Vec<u8>) -> Self {
        Csr { der }
    }

    pub fn from_pem(s: &str) -> Result<Self, PkiError> {
        let p = pem::parse(s).map_err(|e| PkiError::InvalidCsr(e.to_string()))?;
        if p.tag() != "CERTIFICATE REQUEST" && p.tag() != "NEW CERTIFICATE REQUEST" {
            return Err(PkiError::InvalidCsr(format!("unexpected PEM label {}", p.tag())));
        }
        Ok(Csr { der: p.into_contents() })
    }

    pub fn der(&self) -> &[u8] {
        &self.der
    }

    pub fn to_pem(&self) -> String {
        pem_encode("CERTIFICATE REQUEST", &self.der)
    }

    /// Parses the request and checks its self-signature.
    pub fn verify(&self) -> Result<CsrInfo, PkiError> {
        let (rest, req) =
            X509CertificationRequest::from_der(&self.der).map_err(|e| PkiError::InvalidCsr(e.to_string()))?;
        if !rest.is_empty() {
            return Err(PkiError::InvalidCsr("trailing bytes".into()));
        }
        let info = &req.certification_request_info;
        let public_key = PublicKey::from_spki(&info.subject_pki).map_err(|e| PkiError::InvalidCsr(e.to_string()))?;
        let sig_oid = req.signature_algorithm.algorithm.to_id_string();
        if !verify_x509_signature(&public_key, &sig_oid, info.raw, req.signature_value.data.as_ref()) {
            return Err(PkiError::InvalidCsr("self-signature does not verify".into()));
        }
        let sans = req.requested_extensions().map(san_uris).unwrap_or_default();
        Ok(CsrInfo {
            subject: SubjectName::from_x509(&info.subject, sans),
            public_key,
            spki_der: info.subject_pki.raw.to_vec(),
        })
    }
}

/// Builds a CSR for `subject`, signed by `key`.
pub fn create_csr(key: &PrivateKey, subject: &SubjectName) -> Result<Csr, PkiError> {
    let mut params = rcgen::CertificateParams::default();
    params.distinguished_name = subject.to_rcgen();
    params.subject_alt_names = subject.rcgen_sans()?;
    let req = params.serialize_request(&rcgen_key(key)?)?;
    Ok(Csr {
        der: req.der().to_vec(),
    })
}

#[derive(Debug)]
struct CertInfo {
    serial: String,
    subject: SubjectName,
    subject_dn: String,
    issuer_dn: String,
    not_before: i64,
    not_after: i64,
    is_ca: bool,
    public_key: PublicKey,
    spki_der: Vec<u8>,
    sig_oid: String,
    tbs: Vec<u8>,
    signature: Vec<u8>,
}

/// A parsed X.509 certificate.
#[derive(Clone)]
pub struct Certificate {
    der: Arc<Vec<u8>>,
    info: Arc<CertInfo>,
}

impl PartialEq for Certificate {
    fn eq(&self, other: &Self) -> bool {
        self.der == other.der
    }
}

impl Eq for Certificate {}

impl fmt::Debug for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Certificate")
            .field("serial", &self.info.serial)
            .field("subject", &self.info.subject_dn)
            .field("issuer", &self.info.issuer_dn)
            .finish()
    }
}

impl Certificate {
    pub fn from_der(der: Vec<u8>) -> Result<Self, PkiError> {
        let info = {
            let (rest, cert) = X509Certificate::from_der(&der).map_err(|e| PkiError::Malformed(e.to_string()))?;
            if !rest.is_empty() {
                return Err(PkiError::Malformed("trailing bytes after certificate".into()));
            }
            parse_info(&cert)?
        };
        Ok(Certificate {
            der: Arc::new(der),
            info: Arc::new(info),
        })
    }

    pub fn from_pem(s: &str) -> Result<Self, PkiError> {
        let p = pem::parse(s).map_err(|e| PkiError::Malformed(e.to_string()))?;
        if p.tag() != "CERTIFICATE" {
            return Err(PkiError::Malformed(format!("unexpected PEM label {}", p.tag())));
        }
        Certificate::from_der(p.into_contents())
    }

    /// Parses every `CERTIFICATE` block in `s`, in order.
    pub fn parse_pem_chain(s: &str) -> Result<Vec<Self>, PkiError> {
        pem::parse_many(s)
            .map_err(|e| PkiError::Malformed(e.to_string()))?
            .into_iter()
            .filter(|p| p.tag() == "CERTIFICATE")
            .map(|p| Certificate::from_der(p.into_contents()))
            .collect()
    }

    pub fn der(&self) -> &[u8] {
        &self.der
    }

    pub fn to_pem(&self) -> String {
        pem_encode("CERTIFICATE", &self.der)
    }

    /// Lowercase hex, no leading zeros.
    pub fn serial(&self) -> &str {
        &self.info.serial
    }

    pub fn subject(&self) -> &SubjectName {
        &self.info.subject
    }

    pub fn subject_dn(&self) -> &str {
        &self.info.subject_dn
    }

    pub fn issuer_dn(&self) -> &str {
        &self.info.issuer_dn
    }

    pub fn not_before(&self) -> i64 {
        self.info.not_before
    }

    pub fn not_after(&self) -> i64 {
        self.info.not_after
    }

    pub fn is_valid_at(&self, unix: i64) -> bool {
        self.info.not_before <= unix && unix <= self.info.not_after
    }

    pub fn is_ca(&self) -> bool {
        self.info.is_ca
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.info.public_key
    }

    /// DER SubjectPublicKeyInfo exactly as it appears in the certificate.
    pub fn spki_der(&self) -> &[u8] {
        &self.info.spki_der
    }

    pub fn is_self_issued(&self) -> bool {
        self.info.subject_dn == self.info.issuer_dn
    }

    /// Whether `issuer`'s key produced this certificate's signature.
    pub fn is_signed_by(&self, issuer: &Certificate) -> bool {
        verify_x509_signature(
            issuer.public_key(),
            &self.info.sig_oid,
            &self.info.tbs,
            &self.info.signature,
        )
    }
}

fn parse_info(cert: &X509Certificate<'_>) -> Result<CertInfo, PkiError> {
    let tbs = &cert.tbs_certificate;
    let sans = san_uris(tbs.extensions().iter().map(|e| e.parsed_extension()));
    Ok(CertInfo {
        serial: format!("{:x}", tbs.serial),
        subject: SubjectName::from_x509(tbs.subject(), sans),
        subject_dn: tbs.subject().to_string(),
        issuer_dn: tbs.issuer().to_string(),
        not_before: tbs.validity().not_before.timestamp(),
        not_after: tbs.validity().not_after.timestamp(),
        is_ca: tbs.is_ca(),
        public_key: PublicKey::from_spki(tbs.public_key())?,
        spki_der: tbs.public_key().raw.to_vec(),
        sig_oid: cert.signature_algorithm.algorithm.to_id_string(),
        tbs: tbs.as_ref().to_vec(),
        signature: cert.signature_value.data.to_vec(),
    })
}

/// A leaf certificate with its issuer chain (nearest issuer first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateBundle {
    certificate: Certificate,
    chain: Vec<Certificate>,
}

impl serde::Serialize for CertificateBundle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_pem())
    }
}

impl<'de> serde::Deserialize<'de> for CertificateBundle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CertificateBundle::from_pem(&s).map_err(serde::de::Error::custom)
    }
}

impl CertificateBundle {
    pub fn new(certificate: Certificate, chain: Vec<Certificate>) -> Result<Self, PkiError> {
        let mut prev = &certificate;
        for next in &chain {
            if prev.issuer_dn() != next.subject_dn() {
                return Err(PkiError::Malformed(format!(
                    "chain is out of order: {} is not issued by {}",
                    prev.subject_dn(),
                    next.subject_dn()
                )));
            }
            prev = next;
        }
        Ok(CertificateBundle { certificate, chain })
    }

    pub fn leaf(certificate: Certificate) -> Self {
        CertificateBundle {
            certificate,
            chain: Vec::new(),
        }
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn chain(&self) -> &[Certificate] {
        &self.chain
    }

    pub fn iter(&self) -> impl Iterator<Item = &Certificate> {
        std::iter::once(&self.certificate).chain(self.chain.iter())
    }

    /// Concatenated PEM, leaf first.
    pub fn to_pem(&self) -> String {
        self.iter().map(Certificate::to_pem).collect()
    }

    pub fn from_pem(s: &str) -> Result<Self, PkiError> {
        let mut certs = Certificate::parse_pem_chain(s)?.into_iter();
        let leaf = certs
            .next()
            .ok_or_else(|| PkiError::Malformed("no certificate in PEM".into()))?;
        CertificateBundle::new(leaf, certs.collect())
    }
}
