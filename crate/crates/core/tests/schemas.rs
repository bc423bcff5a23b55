mod common;

use ans_core::messages::{CapabilityRequest, RenewalRequest, SignedRequest};
use ans_core::schemas::{MessageKind, SchemaSet};
use ans_core::AnsName;
use common::*;
use serde_json::Value;

/// One valid document of every kind, all produced by a live registry.
fn corpus() -> Vec<(MessageKind, Value)> {
    let fx = Fixture::new();
    let name = "a2a://bot.Chat.Acme.v1.2.0.eu";
    let key = ans_core::pki::PrivateKey::generate(ans_core::pki::SignatureAlgorithm::Ed25519);
    let req = request(name, &key);
    let reg = fx.registry.register(&req).unwrap();
    let n: AnsName = name.parse().unwrap();
    let mut renew = RenewalRequest::new(&n, &reg.agent_uuid, fx.now());
    renew.sign_with(&key);
    let renewed = fx.registry.renew(&renew).unwrap();
    let query = CapabilityRequest::for_name(&n, "^1.0.0");
    let answer = fx.registry.resolve(&query).unwrap();
    vec![
        (MessageKind::RegistrationRequest, v(&req)),
        (MessageKind::RegistrationResponse, v(&reg)),
        (MessageKind::RenewalRequest, v(&renew)),
        (MessageKind::RenewalResponse, v(&renewed)),
        (MessageKind::CapabilityRequest, v(&query)),
        (MessageKind::CapabilityResponse, v(&answer)),
    ]
}

fn v<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap()
}

/// JSON pointers of every required member reachable through `properties`.
fn required_paths(schema: &Value, prefix: &str, doc: &Value, out: &mut Vec<String>) {
    if let Some(req) = schema.get("required").and_then(Value::as_array) {
        for r in req.iter().filter_map(Value::as_str) {
            out.push(format!("{prefix}/{r}"));
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        for (k, sub) in props {
            if let Some(child) = doc.get(k) {
                if child.is_object() {
                    required_paths(sub, &format!("{prefix}/{k}"), child, out);
                }
            }
        }
    }
}

fn delete(doc: &mut Value, pointer: &str) {
    let (parent, last) = pointer.rsplit_once('/').unwrap();
    let obj = doc.pointer_mut(parent).unwrap().as_object_mut().unwrap();
    obj.remove(last);
}

#[test]
fn live_documents_are_valid() {
    let set = SchemaSet::shared();
    for (kind, doc) in corpus() {
        let report = set.validate(kind, &doc);
        assert!(report.valid, "{}: {:?}", kind.as_str(), report.violations);
    }
}

#[test]
fn every_required_member_deletion_is_rejected() {
    let set = SchemaSet::shared();
    let mut total = 0;
    for (kind, doc) in corpus() {
        let mut paths = Vec::new();
        required_paths(&set.schema(kind), "", &doc, &mut paths);
        assert!(!paths.is_empty(), "{} has no required members", kind.as_str());
        for p in paths {
            let mut mutant = doc.clone();
            delete(&mut mutant, &p);
            let report = set.validate(kind, &mutant);
            assert!(!report.valid, "{}: deleting {p} went unnoticed", kind.as_str());
            assert!(
                report.paths().contains(&p.as_str()),
                "{}: {p} not reported in {:?}",
                kind.as_str(),
                report.paths()
            );
            total += 1;
        }
    }
    assert!(total >= 25, "only {total} mutants");
}

#[test]
fn capability_response_needs_the_signed_triple() {
    let set = SchemaSet::shared();
    let doc = corpus().pop().unwrap().1;
    for member in ["Endpoint", "signature", "cert"] {
        let mut m = doc.clone();
        m.as_object_mut().unwrap().remove(member);
        assert!(!set.validate(MessageKind::CapabilityResponse, &m).valid);
    }
}
