use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::crl::normalize_serial;
use super::{
    offset_time, rcgen_key, Certificate, CertificateBundle, Csr, PkiError, PrivateKey, PublicKey, RevocationList,
    SubjectName,
};
use crate::clock::Clock;

pub const DEFAULT_CRL_LIFETIME_SECS: i64 = 3600;

const DAY: i64 = 86_400;

/// Persistent CA bookkeeping: the serial counter plus issued and revoked
/// serials (lowercase hex).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaState {
    pub next_serial: u64,
    pub issued: BTreeSet<String>,
    /// serial -> revocation time (unix seconds)
    pub revoked: BTreeMap<String, i64>,
    pub crl_number: u64,
}

impl Default for CaState {
    fn default() -> Self {
        CaState {
            next_serial: 1,
            issued: BTreeSet::new(),
            revoked: BTreeMap::new(),
            crl_number: 1,
        }
    }
}

/// An issuing certificate authority.
///
/// Issuance and revocation serialize on an internal lock; everything else
/// is read-only.
pub struct CertificateAuthority {
    cert: Certificate,
    chain: Vec<Certificate>,
    key: PrivateKey,
    signer: rcgen::KeyPair,
    issuer: rcgen::Certificate,
    state: Mutex<CaState>,
    clock: Arc<dyn Clock>,
    crl_lifetime: i64,
}

impl std::fmt::Debug for CertificateAuthority {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CertificateAuthority")
            .field("subject", &self.cert.subject_dn())
            .finish_non_exhaustive()
    }
}

fn ca_params(subject: &SubjectName, not_before: i64, not_after: i64) -> Result<rcgen::CertificateParams, PkiError> {
    let mut params = rcgen::CertificateParams::default();
    params.distinguished_name = subject.to_rcgen();
    params.subject_alt_names = subject.rcgen_sans()?;
    params.is_ca = rcgen::IsCa::Ca(rcgen::BasicConstraints::Unconstrained);
    params.key_usages = vec![
        rcgen::KeyUsagePurpose::KeyCertSign,
        rcgen::KeyUsagePurpose::CrlSign,
        rcgen::KeyUsagePurpose::DigitalSignature,
    ];
    params.not_before = offset_time(not_before);
    params.not_after = offset_time(not_after);
    Ok(params)
}

impl CertificateAuthority {
    /// Creates a self-signed root.
    pub fn new_root(
        subject: &SubjectName,
        key: PrivateKey,
        validity_days: u32,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, PkiError> {
        let now = clock.unix();
        let mut params = ca_params(subject, now, now + i64::from(validity_days) * DAY)?;
        // Roots sit outside the counter range used for issued certificates.
        params.serial_number = Some(rcgen::SerialNumber::from(
            (1u64 << 48) | u64::from(rand_core::RngCore::next_u32(&mut rand_core::OsRng)),
        ));
        let signer = rcgen_key(&key)?;
        let issuer = params.self_signed(&signer)?;
        let cert = Certificate::from_der(issuer.der().to_vec())?;
        Ok(CertificateAuthority {
            cert,
            chain: Vec::new(),
            key,
            signer,
            issuer,
            state: Mutex::new(CaState::default()),
            clock,
            crl_lifetime: DEFAULT_CRL_LIFETIME_SECS,
        })
    }

    /// Issues a subordinate CA certificate for `key` and returns the new CA.
    pub fn new_intermediate(
        &self,
        subject: &SubjectName,
        key: PrivateKey,
        validity_days: u32,
    ) -> Result<CertificateAuthority, PkiError> {
        let now = self.clock.unix();
        let mut params = ca_params(subject, now, now + i64::from(validity_days) * DAY)?;
        params.serial_number = Some(self.allocate_serial());
        let spki = rcgen::SubjectPublicKeyInfo::from_der(&key.public_key().to_spki_der())?;
        let issued = params.signed_by(&spki, &self.issuer, &self.signer)?;
        let cert = Certificate::from_der(issued.der().to_vec())?;
        self.record_issued(cert.serial());
        let mut chain = vec![self.cert.clone()];
        chain.extend(self.chain.iter().cloned());
        CertificateAuthority::from_parts(cert, chain, key, CaState::default(), self.clock.clone())
    }

    /// Reassembles a CA from stored material.
    pub fn from_parts(
        cert: Certificate,
        chain: Vec<Certificate>,
        key: PrivateKey,
        state: CaState,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, PkiError> {
        if cert.public_key() != &key.public_key() {
            return Err(PkiError::InvalidKey("key does not match CA certificate".into()));
        }
        let signer = rcgen_key(&key)?;
        let params = rcgen::CertificateParams::from_ca_cert_der(&cert.der().to_vec().into())?;
        // Only the subject, key identifier and key usages of this throwaway
        // certificate are used when signing.
        let issuer = params.self_signed(&signer)?;
        Ok(CertificateAuthority {
            cert,
            chain,
            key,
            signer,
            issuer,
            state: Mutex::new(state),
            clock,
            crl_lifetime: DEFAULT_CRL_LIFETIME_SECS,
        })
    }

    pub fn with_crl_lifetime(mut self, secs: i64) -> Self {
        self.crl_lifetime = secs.max(2);
        self
    }

    pub fn certificate(&self) -> &Certificate {
        &self.cert
    }

    /// Issuers above this CA, nearest first.
    pub fn chain(&self) -> &[Certificate] {
        &self.chain
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public_key()
    }

    pub fn state(&self) -> CaState {
        self.state.lock().expect("ca state lock").clone()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    fn allocate_serial(&self) -> rcgen::SerialNumber {
        let mut st = self.state.lock().expect("ca state lock");
        let n = st.next_serial;
        st.next_serial += 1;
        rcgen::SerialNumber::from(n)
    }

    fn record_issued(&self, serial: &str) {
        self.state
            .lock()
            .expect("ca state lock")
            .issued
            .insert(serial.to_string());
    }

    pub fn issue_certificate(&self, csr: &Csr, validity_days: u32) -> Result<CertificateBundle, PkiError> {
        self.issue_for_secs(csr, i64::from(validity_days) * DAY)
    }

    /// Issues an end-entity certificate valid for `lifetime` seconds from now.
    pub fn issue_for_secs(&self, csr: &Csr, lifetime: i64) -> Result<CertificateBundle, PkiError> {
        let info = csr.verify()?;
        self.issue_for_key(&info.public_key, &info.subject, lifetime)
    }

    /// Issues an end-entity certificate for an already authenticated key,
    /// bypassing the CSR step. Used for renewals.
    pub fn issue_for_key(
        &self,
        public_key: &PublicKey,
        subject: &SubjectName,
        lifetime: i64,
    ) -> Result<CertificateBundle, PkiError> {
        let now = self.clock.unix();
        let mut params = rcgen::CertificateParams::default();
        params.distinguished_name = subject.to_rcgen();
        params.subject_alt_names = subject.rcgen_sans()?;
        params.is_ca = rcgen::IsCa::ExplicitNoCa;
        params.key_usages = vec![rcgen::KeyUsagePurpose::DigitalSignature];
        params.not_before = offset_time(now);
        params.not_after = offset_time(now + lifetime.max(1));
        params.use_authority_key_identifier_extension = true;
        params.serial_number = Some(self.allocate_serial());
        let spki = rcgen::SubjectPublicKeyInfo::from_der(&public_key.to_spki_der())?;
        let issued = params.signed_by(&spki, &self.issuer, &self.signer)?;
        let cert = Certificate::from_der(issued.der().to_vec())?;
        self.record_issued(cert.serial());
        let mut chain = vec![self.cert.clone()];
        chain.extend(self.chain.iter().cloned());
        CertificateBundle::new(cert, chain)
    }

    /// Issues a TLS server certificate with DNS and IP subject alternative
    /// names, for the registry's own HTTPS listener.
    pub fn issue_server_certificate(
        &self,
        public_key: &PublicKey,
        hosts: &[String],
        lifetime: i64,
    ) -> Result<CertificateBundle, PkiError> {
        let now = self.clock.unix();
        let mut params = rcgen::CertificateParams::new(hosts.to_vec())?;
        params.distinguished_name = SubjectName::new(hosts.first().cloned().unwrap_or_default()).to_rcgen();
        params.is_ca = rcgen::IsCa::ExplicitNoCa;
        params.key_usages = vec![rcgen::KeyUsagePurpose::DigitalSignature];
        params.extended_key_usages = vec![rcgen::ExtendedKeyUsagePurpose::ServerAuth];
        params.not_before = offset_time(now);
        params.not_after = offset_time(now + lifetime.max(1));
        params.use_authority_key_identifier_extension = true;
        params.serial_number = Some(self.allocate_serial());
        let spki = rcgen::SubjectPublicKeyInfo::from_der(&public_key.to_spki_der())?;
        let issued = params.signed_by(&spki, &self.issuer, &self.signer)?;
        let cert = Certificate::from_der(issued.der().to_vec())?;
        self.record_issued(cert.serial());
        let mut chain = vec![self.cert.clone()];
        chain.extend(self.chain.iter().cloned());
        CertificateBundle::new(cert, chain)
    }

    /// Adds `serial` to the revocation set and returns the new CRL.
    /// Revoking an already revoked serial changes nothing.
    pub fn revoke_certificate(&self, serial: &str) -> Result<RevocationList, PkiError> {
        let serial = normalize_serial(serial);
        {
            let mut st = self.state.lock().expect("ca state lock");
            if !st.issued.contains(&serial) {
                return Err(PkiError::UnknownSerial(serial));
            }
            if let std::collections::btree_map::Entry::Vacant(slot) = st.revoked.entry(serial) {
                slot.insert(self.clock.unix());
                st.crl_number += 1;
            }
        }
        self.crl()
    }

    pub fn is_revoked(&self, serial: &str) -> bool {
        self.state
            .lock()
            .expect("ca state lock")
            .revoked
            .contains_key(&normalize_serial(serial))
    }

    /// Signs the current revocation set, valid from now for the configured
    /// CRL lifetime.
    pub fn crl(&self) -> Result<RevocationList, PkiError> {
        let st = self.state();
        let now = self.clock.unix();
        let revoked_certs = st
            .revoked
            .iter()
            .map(|(serial, at)| -> Result<rcgen::RevokedCertParams, PkiError> {
                let n = u64::from_str_radix(serial, 16).map_err(|e| PkiError::Malformed(e.to_string()))?;
                Ok(rcgen::RevokedCertParams {
                    serial_number: rcgen::SerialNumber::from(n),
                    revocation_time: offset_time(*at),
                    reason_code: None,
                    invalidity_date: None,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let params = rcgen::CertificateRevocationListParams {
            this_update: offset_time(now),
            next_update: offset_time(now + self.crl_lifetime),
            crl_number: rcgen::SerialNumber::from(st.crl_number),
            issuing_distribution_point: None,
            revoked_certs,
            key_identifier_method: self.issuer.params().key_identifier_method.clone(),
        };
        let crl = params.signed_by(&self.issuer, &self.signer)?;
        RevocationList::from_der_verified(crl.der().to_vec(), &self.cert)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::pki::{create_csr, SignatureAlgorithm};

    fn root(clock: &ManualClock) -> CertificateAuthority {
        CertificateAuthority::new_root(
            &SubjectName::new("Test Root"),
            PrivateKey::generate(SignatureAlgorithm::Ed25519),
            365,
            Arc::new(clock.clone()),
        )
        .unwrap()
    }

    fn csr(alg: SignatureAlgorithm) -> Csr {
        create_csr(&PrivateKey::generate(alg), &SubjectName::new("leaf")).unwrap()
    }

    #[test]
    fn issues_unique_serials() {
        let clock = ManualClock::at_unix(1_700_000_000);
        let ca = root(&clock);
        let a = ca.issue_certificate(&csr(SignatureAlgorithm::Ed25519), 30).unwrap();
        let b = ca
            .issue_certificate(&csr(SignatureAlgorithm::EcdsaP256Sha256), 30)
            .unwrap();
        assert_ne!(a.certificate().serial(), b.certificate().serial());
        assert_eq!(a.certificate().not_after(), 1_700_000_000 + 30 * DAY);
        assert!(a.certificate().is_signed_by(ca.certificate()));
        assert_eq!(a.chain(), &[ca.certificate().clone()]);
    }

    #[test]
    fn broken_csr_rejected() {
        let clock = ManualClock::at_unix(1_700_000_000);
        let ca = root(&clock);
        let mut der = csr(SignatureAlgorithm::Ed25519).der().to_vec();
        let last = der.len() - 1;
        der[last] ^= 1;
        assert!(matches!(
            ca.issue_certificate(&Csr::from_der(der), 1),
            Err(PkiError::InvalidCsr(_))
        ));
    }

    #[test]
    fn revocation_is_monotone_and_idempotent() {
        let clock = ManualClock::at_unix(1_700_000_000);
        let ca = root(&clock);
        let leaf = ca.issue_certificate(&csr(SignatureAlgorithm::Ed25519), 30).unwrap();
        let serial = leaf.certificate().serial().to_string();
        let first = ca.revoke_certificate(&serial).unwrap();
        assert!(first.contains(&serial));
        let again = ca.revoke_certificate(&serial).unwrap();
        assert_eq!(first.revoked(), again.revoked());
        assert_eq!(first.crl_number(), again.crl_number());
        assert!(matches!(ca.revoke_certificate("ffff"), Err(PkiError::UnknownSerial(_))));
    }

    #[test]
    fn crl_round_trips_through_pem() {
        let clock = ManualClock::at_unix(1_700_000_000);
        let ca = root(&clock);
        let crl = ca.crl().unwrap();
        let back = RevocationList::from_pem_verified(&crl.to_pem(), ca.certificate()).unwrap();
        assert_eq!(back, crl);
        assert_eq!(back.next_update() - back.issued_at(), DEFAULT_CRL_LIFETIME_SECS);
        let other = root(&clock);
        assert!(matches!(
            RevocationList::from_der_verified(crl.der().to_vec(), other.certificate()),
            Err(PkiError::UntrustedCrl)
        ));
    }

    #[test]
    fn reassembled_ca_keeps_issuing() {
        let clock = ManualClock::at_unix(1_700_000_000);
        let key = PrivateKey::generate(SignatureAlgorithm::EcdsaP256Sha256);
        let ca =
            CertificateAuthority::new_root(&SubjectName::new("R"), key.clone(), 10, Arc::new(clock.clone())).unwrap();
        ca.issue_certificate(&csr(SignatureAlgorithm::Ed25519), 1).unwrap();
        let again = CertificateAuthority::from_parts(
            ca.certificate().clone(),
            Vec::new(),
            key,
            ca.state(),
            Arc::new(clock.clone()),
        )
        .unwrap();
        let b = again.issue_certificate(&csr(SignatureAlgorithm::Ed25519), 1).unwrap();
        assert_eq!(b.certificate().serial(), "2");
        assert!(b.certificate().is_signed_by(ca.certificate()));
    }
}
