use thiserror::Error;

use super::{Certificate, CertificateBundle, RevocationList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("certificate is revoked")]
    Revoked,
    /// Outside its validity window, in either direction.
    #[error("certificate is expired or not yet valid")]
    Expired,
    #[error("chain does not end at the trusted CA")]
    UntrustedRoot,
    #[error("certificate signature does not verify")]
    BadSignature,
}

fn check_status(cert: &Certificate, crls: &[RevocationList], now: i64) -> Result<(), ChainError> {
    let revoked = crls
        .iter()
        .any(|crl| crl.issuer() == cert.issuer_dn() && crl.contains(cert.serial()));
    if revoked {
        return Err(ChainError::Revoked);
    }
    if !cert.is_valid_at(now) {
        return Err(ChainError::Expired);
    }
    Ok(())
}

/// Walks from the leaf towards `trusted_ca`, one issuer at a time.
///
/// Each certificate on the path must be within its validity window, absent
/// from every CRL published by its issuer, and signed by the next
/// certificate, which must be a CA. The walk succeeds once a certificate is
/// issued by `trusted_ca` (or is `trusted_ca` itself). Chain elements past
/// that point are ignored.
pub fn verify_cert_chain(
    bundle: &CertificateBundle,
    trusted_ca: &Certificate,
    crls: &[RevocationList],
    now: i64,
) -> Result<(), ChainError> {
    if !trusted_ca.is_valid_at(now) {
        return Err(ChainError::Expired);
    }
    let path: Vec<&Certificate> = bundle.iter().collect();
    for (i, cert) in path.iter().enumerate() {
        if *cert == trusted_ca {
            return Ok(());
        }
        check_status(cert, crls, now)?;
        if cert.issuer_dn() == trusted_ca.subject_dn() {
            return if cert.is_signed_by(trusted_ca) {
                Ok(())
            } else {
                Err(ChainError::BadSignature)
            };
        }
        let Some(next) = path.get(i + 1) else {
            return Err(ChainError::UntrustedRoot);
        };
        if next.subject_dn() != cert.issuer_dn() || !next.is_ca() || next.is_self_issued() {
            return Err(ChainError::UntrustedRoot);
        }
        if !cert.is_signed_by(next) {
            return Err(ChainError::BadSignature);
        }
    }
    Err(ChainError::UntrustedRoot)
}
