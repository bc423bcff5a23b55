mod common;

use std::sync::Arc;

use ans_core::clock::{Clock, ManualClock};
use ans_core::messages::{CapabilityRequest, DeregistrationRequest, RenewalRequest, RevocationRequest, SignedRequest};
use ans_core::pki::{verify_cert_chain, PrivateKey, SignatureAlgorithm};
use ans_core::registry::{derive_agent_uuid, AgentStatus, AuditLog, Registry, Store};
use ans_core::{AnsName, RegistryError};
use common::*;
use serde_json::json;
use uuid::Uuid;

fn resolve_any(fx: &Fixture, name: &str) -> Result<ans_core::messages::CapabilityResponse, RegistryError> {
    let n: AnsName = name.parse().unwrap();
    fx.registry.resolve(&CapabilityRequest::for_name(&n, "*"))
}

#[test]
fn registration_issues_a_certificate_chained_to_the_ca() {
    let fx = Fixture::new();
    let (key, resp) = fx.register("a2a://translator.Translate.Acme.v1.0.0");
    assert_eq!(resp.agent_uuid, derive_agent_uuid(&key.public_key()).to_string());
    assert_eq!(resp.endpoint, "https://translator.acme.example.com/v1.0.0");

    let bundle = ans_core::pki::CertificateBundle::from_pem(&resp.certificate.pem).unwrap();
    assert_eq!(bundle.certificate().subject().common_name, "translator");
    assert_eq!(bundle.certificate().public_key(), &key.public_key());
    let crl = fx.registry.crl().unwrap();
    verify_cert_chain(&bundle, fx.registry.trust_anchor(), &[crl], fx.clock.unix()).unwrap();
}

#[test]
fn full_lifecycle_ends_in_agent_not_found() {
    let fx = Fixture::new();
    let name = "mcp://sentiment.Analyze.Acme.v2.0.0";
    let (key, reg) = fx.register(name);
    let n: AnsName = name.parse().unwrap();

    assert_eq!(resolve_any(&fx, name).unwrap().endpoint, reg.endpoint);

    fx.advance(60);
    let mut renew = RenewalRequest::new(&n, &reg.agent_uuid, fx.now());
    renew.sign_with(&key);
    let renewed = fx.registry.renew(&renew).unwrap();
    assert_eq!(renewed.revoked_serial_number, reg.certificate.serial_number);
    assert_ne!(renewed.certificate.serial_number, reg.certificate.serial_number);
    assert!(fx.registry.crl().unwrap().contains(&reg.certificate.serial_number));

    let mut dereg = DeregistrationRequest::new(&n, fx.now());
    dereg.sign_with(&key);
    let ack = fx.registry.deregister(&dereg).unwrap();
    assert_eq!(ack.status, "deregistered");
    assert!(fx.registry.crl().unwrap().contains(&renewed.certificate.serial_number));

    assert!(matches!(resolve_any(&fx, name), Err(RegistryError::AgentNotFound(_))));
    // A second withdrawal is a no-op.
    fx.registry.deregister(&dereg).unwrap();
}

#[test]
fn duplicate_name_and_reused_key_are_refused() {
    let fx = Fixture::new();
    let name = "acp://planner.Plan.Acme.v1.0.0";
    let (key, _) = fx.register(name);

    let other = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    assert!(matches!(
        fx.register_with(name, &other),
        Err(RegistryError::DuplicateName(_))
    ));
    assert!(matches!(
        fx.register_with("acp://planner.Plan.Acme.v1.1.0", &key),
        Err(RegistryError::KeyInUse(_))
    ));
    // A second version under its own key is fine.
    fx.register("acp://planner.Plan.Acme.v1.1.0");
}

#[test]
fn adapter_rejects_missing_protocol_metadata() {
    let fx = Fixture::new();
    let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let mut req = request("mcp://tool.Search.Acme.v1.0.0", &key);
    req.protocol_extensions.as_object_mut().unwrap().remove("mcpEndpoint");
    assert!(matches!(
        fx.registry.register(&req),
        Err(RegistryError::AdapterRejection(_))
    ));
}

#[test]
fn schema_violations_are_reported_before_anything_else() {
    let fx = Fixture::new();
    let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let mut body = serde_json::to_value(request("a2a://x.Y.Z.v1.0.0", &key)).unwrap();
    body.as_object_mut().unwrap().remove("certificate");
    match fx.registry.register_json(&body) {
        Err(RegistryError::SchemaViolation(report)) => assert_eq!(report.paths(), vec!["/certificate"]),
        other => panic!("expected schema violation, got {other:?}"),
    }
    body["protocol"] = json!("smtp");
    assert!(matches!(
        fx.registry.register_json(&body),
        Err(RegistryError::UnknownProtocol(_))
    ));
}

#[test]
fn plain_http_endpoints_are_refused_by_default() {
    let fx = Fixture::new();
    let key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let name: AnsName = "a2a://x.Y.Z.v1.0.0".parse().unwrap();
    let req = ans_core::messages::RegistrationRequest::for_key(
        &name,
        &key,
        Some("http://x.example.com".into()),
        extensions(&name),
    )
    .unwrap();
    assert!(matches!(
        fx.registry.register(&req),
        Err(RegistryError::InvalidRequest(_))
    ));
}

#[test]
fn renewal_needs_the_owner_key_and_a_fresh_timestamp() {
    let fx = Fixture::new();
    let name = "a2a://bot.Chat.Acme.v1.0.0";
    let (key, reg) = fx.register(name);
    let n: AnsName = name.parse().unwrap();

    let stranger = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let mut forged = RenewalRequest::new(&n, &reg.agent_uuid, fx.now());
    forged.sign_with(&stranger);
    assert!(matches!(fx.registry.renew(&forged), Err(RegistryError::BadProof(_))));

    let mut stale = RenewalRequest::new(&n, &reg.agent_uuid, fx.now());
    stale.sign_with(&key);
    fx.advance(3600);
    assert!(matches!(fx.registry.renew(&stale), Err(RegistryError::BadProof(_))));
}

#[test]
fn operator_revocation_blocks_renewal_and_resolution() {
    let clock = Arc::new(ManualClock::at_unix(T0));
    let operator = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let registry = Registry::builder(clock.clone())
        .operator(operator.public_key())
        .build()
        .unwrap();
    let fx = Fixture {
        clock,
        registry: Arc::new(registry),
    };
    let name = "a2a://bot.Chat.Acme.v1.0.0";
    let (key, reg) = fx.register(name);
    let n: AnsName = name.parse().unwrap();

    let mut not_operator = RevocationRequest::new(&n, "keyCompromise", fx.now());
    not_operator.sign_with(&key);
    assert!(matches!(
        fx.registry.revoke(&not_operator),
        Err(RegistryError::BadProof(_))
    ));

    let mut rev = RevocationRequest::new(&n, "keyCompromise", fx.now());
    rev.sign_with(&operator);
    let ack = fx.registry.revoke(&rev).unwrap();
    assert_eq!(
        ack.revoked_serial_number.as_deref(),
        Some(reg.certificate.serial_number.as_str())
    );

    let mut renew = RenewalRequest::new(&n, &reg.agent_uuid, fx.now());
    renew.sign_with(&key);
    assert!(matches!(fx.registry.renew(&renew), Err(RegistryError::RevokedAgent)));
    assert!(matches!(resolve_any(&fx, name), Err(RegistryError::AgentNotFound(_))));
}

#[test]
fn expired_records_stop_resolving() {
    let fx = Fixture::new();
    let name = "acp://worker.Summarize.Acme.v1.0.0";
    fx.register(name);
    fx.advance(366 * 86_400);
    assert!(matches!(resolve_any(&fx, name), Err(RegistryError::AgentNotFound(_))));
    assert_eq!(fx.registry.sweep_expired().unwrap(), 1);
    let rec = &fx.registry.all_records().unwrap()[0];
    assert_eq!(rec.status, AgentStatus::Expired);
}

#[test]
fn every_mutation_is_audited_and_the_chain_verifies() {
    let fx = Fixture::new();
    let name = "a2a://bot.Chat.Acme.v1.0.0";
    let (key, reg) = fx.register(name);
    let n: AnsName = name.parse().unwrap();
    let mut renew = RenewalRequest::new(&n, &reg.agent_uuid, fx.now());
    renew.sign_with(&key);
    fx.registry.renew(&renew).unwrap();

    let ops: Vec<String> = fx.registry.audit_entries().unwrap().into_iter().map(|e| e.op).collect();
    assert_eq!(ops, ["register", "renew"]);
    let head = fx.registry.verify_audit().unwrap();
    assert_eq!(head.seq, 2);
}

#[test]
fn edited_record_is_detected_as_an_integrity_violation() {
    let fx = Fixture::new();
    let (_, reg) = fx.register("a2a://bot.Chat.Acme.v1.0.0");
    let uuid = Uuid::parse_str(&reg.agent_uuid).unwrap();
    let mut rec = fx.registry.get(&uuid).unwrap().unwrap();
    rec.endpoint = "https://attacker.example.net".into();
    fx.registry
        .store()
        .overwrite_raw(&reg.agent_uuid, &serde_json::to_vec(&rec).unwrap())
        .unwrap();
    assert!(matches!(
        fx.registry.get_agent_endpoint_record(&uuid),
        Err(RegistryError::IntegrityViolation(_))
    ));
}

#[test]
fn state_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::at_unix(T0));
    let ca_key = PrivateKey::generate(SignatureAlgorithm::Ed25519);
    let open = |clock: Arc<ManualClock>| {
        let mut subject = ans_core::pki::SubjectName::new("Test CA");
        subject.organization = Some("Test".into());
        let ca = ans_core::pki::CertificateAuthority::new_root(
            &subject,
            ca_key.clone(),
            3650,
            Arc::new(ManualClock::at_unix(T0)),
        )
        .unwrap();
        Registry::builder(clock)
            .store(Store::open(dir.path()).unwrap())
            .audit(AuditLog::open(dir.path().join("audit.ndjson")).unwrap())
            .authority(ca.certificate().clone(), Vec::new(), ca_key.clone())
            .build()
            .unwrap()
    };
    let name = "mcp://tool.Search.Acme.v1.0.0";
    let first_serial = {
        let registry = open(clock.clone());
        let fx = Fixture {
            clock: clock.clone(),
            registry: Arc::new(registry),
        };
        let (_, reg) = fx.register(name);
        fx.registry.revoke_serial(&reg.certificate.serial_number).ok();
        reg.certificate.serial_number
    };
    let registry = open(clock.clone());
    assert_eq!(registry.all_records().unwrap().len(), 1);
    assert!(registry.crl().unwrap().contains(&first_serial));
    assert_eq!(registry.verify_audit().unwrap().seq, 1);

    let fx = Fixture {
        clock,
        registry: Arc::new(registry),
    };
    let (_, second) = fx.register("mcp://tool.Search.Acme.v1.1.0");
    assert_ne!(second.certificate.serial_number, first_serial);
}

#[test]
fn truncated_audit_log_refuses_to_open() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::at_unix(T0));
    let log = dir.path().join("audit.ndjson");
    {
        let registry = Registry::builder(clock.clone())
            .store(Store::open(dir.path()).unwrap())
            .audit(AuditLog::open(&log).unwrap())
            .build()
            .unwrap();
        let fx = Fixture {
            clock: clock.clone(),
            registry: Arc::new(registry),
        };
        fx.register("a2a://a.B.C.v1.0.0");
        fx.register("a2a://d.E.F.v1.0.0");
    }
    let text = std::fs::read_to_string(&log).unwrap();
    let first_line = text.lines().next().unwrap();
    std::fs::write(&log, format!("{first_line}\n")).unwrap();
    let reopened = Registry::builder(clock)
        .store(Store::open(dir.path()).unwrap())
        .audit(AuditLog::open(&log).unwrap())
        .build();
    assert!(reopened.is_err());
}
