use ans_core::ansname::{format_ansname, parse_ansname, NameError, Protocol, SemVer};
use ans_core::AnsName;
use proptest::prelude::*;

fn label() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_-]{0,11}"
}

fn pre_ident() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z][a-z0-9-]{0,6}", "0|[1-9][0-9]{0,3}"]
}

fn version() -> impl Strategy<Value = SemVer> {
    (
        0u64..50,
        0u64..50,
        0u64..50,
        proptest::option::of(pre_ident()),
        proptest::option::of("[a-z0-9]{1,6}"),
    )
        .prop_map(|(a, b, c, pre, build)| {
            let mut s = format!("{a}.{b}.{c}");
            if let Some(p) = pre {
                s.push('-');
                s.push_str(&p);
            }
            if let Some(b) = build {
                s.push('+');
                s.push_str(&b);
            }
            s.parse().expect("generated version is valid")
        })
}

fn protocol() -> impl Strategy<Value = Protocol> {
    prop_oneof![
        Just(Protocol::A2a),
        Just(Protocol::Mcp),
        Just(Protocol::Acp),
        "[a-z][a-z0-9]{0,5}".prop_map(|s| s.parse().unwrap()),
    ]
}

prop_compose! {
    fn ans_name()(
        protocol in protocol(),
        agent in label(),
        capability in label(),
        provider in label(),
        version in version(),
        extension in proptest::option::of(proptest::collection::vec(label(), 1..3)),
    ) -> AnsName {
        AnsName::new(protocol, agent, capability, provider, version, extension.map(|l| l.join("."))).unwrap()
    }
}

proptest! {
    #[test]
    fn format_then_parse_is_identity(name in ans_name()) {
        let text = format_ansname(&name);
        let back = parse_ansname(&text).unwrap();
        prop_assert_eq!(&back, &name);
        prop_assert_eq!(back.version().build.clone(), name.version().build.clone());
        prop_assert_eq!(format_ansname(&back), text);
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,60}") {
        let _ = parse_ansname(&s);
    }

    #[test]
    fn short_versions_pad_with_zeros(major in 0u64..1000, minor in proptest::option::of(0u64..1000)) {
        let text = match minor {
            Some(m) => format!("mcp://a.b.c.v{major}.{m}"),
            None => format!("mcp://a.b.c.v{major}"),
        };
        let n = parse_ansname(&text).unwrap();
        prop_assert_eq!(n.version(), &SemVer::new(major, minor.unwrap_or(0), 0));
        prop_assert_eq!(n.extension(), None);
    }
}

#[test]
fn translation_example_parses_into_its_parts() {
    let n = parse_ansname("a2a://textProcessor.DocumentTranslation.AcmeCorp.v2.1.hipaa").unwrap();
    assert_eq!(n.protocol(), &Protocol::A2a);
    assert_eq!(n.agent_id(), "textProcessor");
    assert_eq!(n.capability(), "DocumentTranslation");
    assert_eq!(n.provider(), "AcmeCorp");
    assert_eq!(n.version(), &SemVer::new(2, 1, 0));
    assert_eq!(n.extension(), Some("hipaa"));
}

#[test]
fn sentiment_example_parses_into_its_parts() {
    let n = parse_ansname("mcp://sentimentAnalyzer.textAnalysis.ExampleCorp.v1.0").unwrap();
    assert_eq!(n.protocol(), &Protocol::Mcp);
    assert_eq!(n.agent_id(), "sentimentAnalyzer");
    assert_eq!(n.capability(), "textAnalysis");
    assert_eq!(n.provider(), "ExampleCorp");
    assert_eq!(n.version(), &SemVer::new(1, 0, 0));
    assert_eq!(n.extension(), None);
}

#[test]
fn formatting_spells_out_the_full_version() {
    let n = AnsName::new(
        Protocol::A2a,
        "translatorBot",
        "DocumentTranslation",
        "exampleCorp",
        SemVer::new(1, 2, 3),
        Some("secure".into()),
    )
    .unwrap();
    assert_eq!(
        n.to_string(),
        "a2a://translatorBot.DocumentTranslation.exampleCorp.v1.2.3.secure"
    );
    let zero = AnsName::new(Protocol::Mcp, "a", "b", "c", SemVer::new(0, 0, 0), None).unwrap();
    assert_eq!(zero.to_string(), "mcp://a.b.c.v0.0.0");
}

#[test]
fn malformed_names_are_rejected() {
    for bad in [
        "a2a://broken",
        "textProcessor.DocumentTranslation.AcmeCorp.v2",
        "a2a://a.b.c.d",
        "a2a://a..c.v1",
        "a2a://a.b.c.v01",
        "a2a://a b.c.d.v1",
    ] {
        assert!(matches!(parse_ansname(bad), Err(NameError::MalformedName(_))), "{bad}");
    }
}

#[test]
fn unknown_protocols_parse_but_are_flagged() {
    let n = parse_ansname("XMPP://bot.Chat.Acme.v1").unwrap();
    assert_eq!(n.protocol().as_str(), "xmpp");
    assert!(n.has_unknown_protocol());
}
