//! A private CA hierarchy: issue from a CSR, verify the chain, revoke.
//!
//! ```text
//! cargo run -p ans-core --example pki
//! ```

use std::sync::Arc;

use ans_core::clock::{Clock, SystemClock};
use ans_core::pki::{
    create_csr, sign, verify_cert_chain, verify_signature, CertificateAuthority, PrivateKey, SignatureAlgorithm,
    SubjectName,
};
use ans_core::AnsName;

fn main() {
    let clock = Arc::new(SystemClock);
    let root = CertificateAuthority::new_root(
        &SubjectName::new("Example Root CA"),
        PrivateKey::generate(SignatureAlgorithm::Ed25519),
        3650,
        clock.clone(),
    )
    .unwrap();
    let issuing = root
        .new_intermediate(
            &SubjectName::new("Example Issuing CA"),
            PrivateKey::generate(SignatureAlgorithm::EcdsaP256Sha256),
            1825,
        )
        .unwrap();

    // The agent keeps its key; only the CSR travels.
    let name: AnsName = "mcp://sentimentAnalyzer.textAnalysis.ExampleCorp.v1.0.0"
        .parse()
        .unwrap();
    let agent_key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let csr = create_csr(&agent_key, &SubjectName::for_agent(&name)).unwrap();
    let cert = issuing.issue_certificate(&csr, 90).unwrap();
    let leaf = cert.certificate();
    println!("issued   {} serial {}", leaf.subject(), leaf.serial());
    println!("issuer   {}", leaf.issuer_dn());
    println!("chain    {} certificates", cert.chain().len());

    let now = clock.unix();
    let crl = root.crl().unwrap();
    println!(
        "verify   {:?}",
        verify_cert_chain(&cert, root.certificate(), &[crl], now)
    );

    let msg = b"resolve me";
    let sig = sign(msg, &agent_key);
    println!("sig ok   {}", verify_signature(msg, &sig, leaf.public_key()));

    let crl = root.revoke_certificate(issuing.certificate().serial()).unwrap();
    println!("revoked  intermediate {}", issuing.certificate().serial());
    println!(
        "verify   {:?}",
        verify_cert_chain(&cert, root.certificate(), &[crl], now)
    );
}
