//! The full agent lifecycle against an on-disk registry: register, resolve,
//! renew, deregister, then reopen and check the audit chain.
//!
//! ```text
//! cargo run -p ans-core --example registry
//! ```

use std::sync::Arc;

use ans_core::adapters::json_digest;
use ans_core::clock::{rfc3339, Clock, SystemClock};
use ans_core::messages::{
    CapabilityRequest, DeregistrationRequest, RegistrationRequest, RenewalRequest, SignedRequest,
};
use ans_core::pki::{CertificateAuthority, PrivateKey, SignatureAlgorithm, SubjectName};
use ans_core::registry::{AuditLog, Registry, Store};
use ans_core::AnsName;
use serde_json::json;

fn open(dir: &std::path::Path, ca: &CertificateAuthority, ca_key: &PrivateKey) -> Registry {
    Registry::builder(Arc::new(SystemClock))
        .store(Store::open(dir).unwrap())
        .audit(AuditLog::open(dir.join("audit.ndjson")).unwrap())
        .authority(ca.certificate().clone(), Vec::new(), ca_key.clone())
        .build()
        .unwrap()
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let clock = SystemClock;
    let ca_key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let ca = CertificateAuthority::new_root(
        &SubjectName::new("Demo CA"),
        ca_key.clone(),
        3650,
        Arc::new(SystemClock),
    )
    .unwrap();
    let registry = open(dir.path(), &ca, &ca_key);

    let name: AnsName = "a2a://textProcessor.DocumentTranslation.AcmeCorp.v2.1.0.hipaa"
        .parse()
        .unwrap();
    let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let card = json!({"name": "textProcessor", "url": "https://translate.acme.example/a2a", "skills": ["translate"]});
    let req = RegistrationRequest::for_key(
        &name,
        &key,
        Some("https://translate.acme.example/a2a".into()),
        json!({"agentCard": card, "cardDigest": json_digest(&card)}),
    )
    .unwrap();
    let reg = registry.register(&req).unwrap();
    println!("registered {} as {}", reg.ans_name, reg.agent_uuid);
    println!(
        "certificate serial {} until {}",
        reg.certificate.serial_number, reg.expires_at
    );

    let answer = registry.resolve(&CapabilityRequest::for_name(&name, "^2.0.0")).unwrap();
    println!("resolved   {} (signed, ttl {:?})", answer.endpoint, answer.ttl);

    let mut renew = RenewalRequest::new(&name, &reg.agent_uuid, rfc3339(clock.unix()));
    renew.sign_with(&key);
    let renewed = registry.renew(&renew).unwrap();
    println!("renewed    new serial {}", renewed.certificate.serial_number);

    let mut bye = DeregistrationRequest::new(&name, rfc3339(clock.unix()));
    bye.sign_with(&key);
    registry.deregister(&bye).unwrap();
    match registry.resolve(&CapabilityRequest::for_name(&name, "*")) {
        Err(e) => println!("after deregistration: {} ({e})", e.code()),
        Ok(_) => unreachable!("deregistered agents do not resolve"),
    }
    drop(registry);

    let reopened = open(dir.path(), &ca, &ca_key);
    let head = reopened.verify_audit().unwrap();
    println!("\naudit chain intact, {} entries:", head.seq);
    for e in reopened.audit_entries().unwrap() {
        println!("  #{} {:<10} {} {}", e.seq, e.op, e.agent_uuid, &e.entry_hash[..16]);
    }
}
