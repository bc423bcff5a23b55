use std::collections::BTreeSet;

use x509_parser::prelude::FromDer;
use x509_parser::revocation_list::CertificateRevocationList;

use super::{pem_encode, verify_x509_signature, Certificate, PkiError};

/// A signed X.509 CRL, decoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevocationList {
    issuer: String,
    revoked: BTreeSet<String>,
    issued_at: i64,
    next_update: i64,
    crl_number: u64,
    der: Vec<u8>,
}

impl RevocationList {
    /// Decodes a CRL and checks it was signed by `issuer`.
    pub fn from_der_verified(der: Vec<u8>, issuer: &Certificate) -> Result<Self, PkiError> {
        let parsed = {
            let (rest, crl) =
                CertificateRevocationList::from_der(&der).map_err(|e| PkiError::Malformed(e.to_string()))?;
            if !rest.is_empty() {
                return Err(PkiError::Malformed("trailing bytes after CRL".into()));
            }
            let sig_oid = crl.signature_algorithm.algorithm.to_id_string();
            let tbs = crl.tbs_cert_list.as_ref();
            if crl.issuer().to_string() != issuer.subject_dn()
                || !verify_x509_signature(issuer.public_key(), &sig_oid, tbs, crl.signature_value.data.as_ref())
            {
                return Err(PkiError::UntrustedCrl);
            }
            let issued_at = crl.last_update().timestamp();
            let next_update = crl
                .next_update()
                .map(|t| t.timestamp())
                .ok_or_else(|| PkiError::Malformed("CRL has no nextUpdate".into()))?;
            if next_update <= issued_at {
                return Err(PkiError::Malformed("CRL nextUpdate precedes thisUpdate".into()));
            }
            let crl_number = crl
                .crl_number()
                .map(|n| u64::try_from(n.clone()).unwrap_or(u64::MAX))
                .unwrap_or(0);
            RevocationList {
                issuer: crl.issuer().to_string(),
                revoked: crl
                    .iter_revoked_certificates()
                    .map(|r| format!("{:x}", r.serial()))
                    .collect(),
                issued_at,
                next_update,
                crl_number,
                der: Vec::new(),
            }
        };
        Ok(RevocationList { der, ..parsed })
    }

    pub fn from_pem_verified(s: &str, issuer: &Certificate) -> Result<Self, PkiError> {
        let p = pem::parse(s).map_err(|e| PkiError::Malformed(e.to_string()))?;
        if p.tag() != "X509 CRL" {
            return Err(PkiError::Malformed(format!("unexpected PEM label {}", p.tag())));
        }
        RevocationList::from_der_verified(p.into_contents(), issuer)
    }

    pub fn issuer(&self) -> &str {
        &self.issuer
    }

    pub fn revoked(&self) -> &BTreeSet<String> {
        &self.revoked
    }

    pub fn contains(&self, serial: &str) -> bool {
        self.revoked.contains(&normalize_serial(serial))
    }

    pub fn issued_at(&self) -> i64 {
        self.issued_at
    }

    pub fn next_update(&self) -> i64 {
        self.next_update
    }

    pub fn crl_number(&self) -> u64 {
        self.crl_number
    }

    pub fn is_stale(&self, now: i64) -> bool {
        now >= self.next_update
    }

    /// Seconds after issuance at which a holder should fetch a fresh list.
    pub fn refresh_interval(&self) -> i64 {
        ((self.next_update - self.issued_at) / 2).max(1)
    }

    pub fn der(&self) -> &[u8] {
        &self.der
    }

    pub fn to_pem(&self) -> String {
        pem_encode("X509 CRL", &self.der)
    }
}

/// Lowercase hex without leading zeros.
pub(crate) fn normalize_serial(serial: &str) -> String {
    let s = serial.trim_start_matches('0').to_ascii_lowercase();
    if s.is_empty() {
        "0".to_string()
    } else {
        s
    }
}
