use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::version::{parse_numeric, SemVer};
use super::NameError;

/// Communication protocol named by the ANSName scheme.
///
/// Unknown schemes parse into [`Protocol::Extensible`] so that names from
/// newer deployments can still be read; the registry refuses to register them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    A2a,
    Mcp,
    Acp,
    Extensible(String),
}

impl Protocol {
    pub fn as_str(&self) -> &str {
        match self {
            Protocol::A2a => "a2a",
            Protocol::Mcp => "mcp",
            Protocol::Acp => "acp",
            Protocol::Extensible(s) => s,
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, Protocol::Extensible(_))
    }

    pub const KNOWN: [Protocol; 3] = [Protocol::A2a, Protocol::Mcp, Protocol::Acp];
}

impl FromStr for Protocol {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let valid = lower.bytes().next().is_some_and(|b| b.is_ascii_lowercase())
            && lower
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.'));
        if !valid {
            return Err(NameError::MalformedName(format!("invalid protocol scheme {s:?}")));
        }
        Ok(match lower.as_str() {
            "a2a" => Protocol::A2a,
            "mcp" => Protocol::Mcp,
            "acp" => Protocol::Acp,
            _ => Protocol::Extensible(lower),
        })
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Protocol {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Protocol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) fn is_label(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn check_label(what: &str, s: &str) -> Result<(), NameError> {
    if is_label(s) {
        Ok(())
    } else {
        Err(NameError::MalformedName(format!(
            "{what} {s:?} is not a label of [A-Za-z0-9_-]"
        )))
    }
}

/// The four keys a registry lookup matches on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NameKey {
    pub protocol: Protocol,
    pub agent_id: String,
    pub capability: String,
    pub provider: String,
}

impl NameKey {
    /// Stable string form used as a storage index key.
    pub fn index_key(&self) -> String {
        format!(
            "{}://{}.{}.{}",
            self.protocol, self.agent_id, self.capability, self.provider
        )
    }
}

impl fmt::Display for NameKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.index_key())
    }
}

/// A structured agent name:
/// `protocol://agentID.capability.provider.vMAJOR.MINOR.PATCH[.extension]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnsName {
    protocol: Protocol,
    agent_id: String,
    capability: String,
    provider: String,
    version: SemVer,
    extension: Option<String>,
}

impl AnsName {
    pub fn new(
        protocol: Protocol,
        agent_id: impl Into<String>,
        capability: impl Into<String>,
        provider: impl Into<String>,
        version: SemVer,
        extension: Option<String>,
    ) -> Result<Self, NameError> {
        let name = AnsName {
            protocol,
            agent_id: agent_id.into(),
            capability: capability.into(),
            provider: provider.into(),
            version,
            extension: extension.filter(|e| !e.is_empty()),
        };
        check_label("agentID", &name.agent_id)?;
        check_label("capability", &name.capability)?;
        check_label("provider", &name.provider)?;
        if let Some(ext) = &name.extension {
            for label in ext.split('.') {
                check_label("extension label", label)?;
            }
        }
        // The pre-release and build parts ride on a single dot-label, so
        // they cannot themselves contain dots.
        if name.version.pre.len() > 1 || name.version.build.len() > 1 {
            return Err(NameError::MalformedName(format!(
                "version {} has dotted pre-release or build identifiers",
                name.version
            )));
        }
        Ok(name)
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    pub fn capability(&self) -> &str {
        &self.capability
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn version(&self) -> &SemVer {
        &self.version
    }

    pub fn extension(&self) -> Option<&str> {
        self.extension.as_deref()
    }

    /// True when the scheme is not one of the built-in protocols.
    pub fn has_unknown_protocol(&self) -> bool {
        !self.protocol.is_known()
    }

    pub fn key(&self) -> NameKey {
        NameKey {
            protocol: self.protocol.clone(),
            agent_id: self.agent_id.clone(),
            capability: self.capability.clone(),
            provider: self.provider.clone(),
        }
    }
}

/// Parses an ANSName string.
///
/// The fourth dot-label must be the version label `v<digits>`. Up to two
/// following purely numeric labels extend it to minor and patch; the last
/// version label may carry a `-pre` and/or `+build` suffix, which ends the
/// version. Remaining labels form the extension. Missing components are 0.
pub fn parse_ansname(s: &str) -> Result<AnsName, NameError> {
    let malformed = |why: &str| NameError::MalformedName(format!("{s:?}: {why}"));
    let (scheme, rest) = s.split_once("://").ok_or_else(|| malformed("missing \"://\""))?;
    let protocol: Protocol = scheme.parse()?;
    let labels: Vec<&str> = rest.split('.').collect();
    if labels.len() < 4 {
        return Err(malformed("fewer than 4 labels"));
    }
    if labels.iter().any(|l| l.is_empty()) {
        return Err(malformed("empty label"));
    }

    let version_label = labels[3];
    let first = version_label
        .strip_prefix('v')
        .filter(|r| r.starts_with(|c: char| c.is_ascii_digit()))
        .ok_or_else(|| malformed("no version label"))?;

    let mut components = Vec::with_capacity(3);
    let mut suffix = String::new();
    let mut idx = 3;
    let mut current = first;
    loop {
        let digits_end = current.find(|c: char| !c.is_ascii_digit()).unwrap_or(current.len());
        let (digits, tail) = current.split_at(digits_end);
        components.push(parse_numeric(digits).map_err(|_| malformed("bad version number"))?);
        idx += 1;
        if !tail.is_empty() {
            if !tail.starts_with(['-', '+']) {
                return Err(malformed("bad version label"));
            }
            suffix = tail.to_string();
            break;
        }
        if components.len() == 3 {
            break;
        }
        match labels.get(idx) {
            Some(next)
                if next.starts_with(|c: char| c.is_ascii_digit())
                    && next
                        .find(|c: char| !c.is_ascii_digit())
                        .is_none_or(|i| next[i..].starts_with(['-', '+'])) =>
            {
                current = next;
            }
            _ => break,
        }
    }
    components.resize(3, 0);
    let mut version = SemVer::new(components[0], components[1], components[2]);
    version
        .parse_suffix(&suffix)
        .map_err(|_| malformed("bad pre-release or build suffix"))?;

    let extension = (idx < labels.len()).then(|| labels[idx..].join("."));
    AnsName::new(protocol, labels[0], labels[1], labels[2], version, extension)
}

/// Canonical text form: full `MAJOR.MINOR.PATCH`, lowercase scheme.
pub fn format_ansname(n: &AnsName) -> String {
    let mut out = format!(
        "{}://{}.{}.{}.v{}",
        n.protocol, n.agent_id, n.capability, n.provider, n.version
    );
    if let Some(ext) = &n.extension {
        out.push('.');
        out.push_str(ext);
    }
    out
}

impl FromStr for AnsName {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_ansname(s)
    }
}

impl fmt::Display for AnsName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_ansname(self))
    }
}

impl Serialize for AnsName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ansname(self))
    }
}

impl<'de> Deserialize<'de> for AnsName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_ansname(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_examples_parse_to_tuples() {
        let n = parse_ansname("a2a://textProcessor.DocumentTranslation.AcmeCorp.v2.1.hipaa").unwrap();
        assert_eq!(n.protocol(), &Protocol::A2a);
        assert_eq!(n.agent_id(), "textProcessor");
        assert_eq!(n.capability(), "DocumentTranslation");
        assert_eq!(n.provider(), "AcmeCorp");
        assert_eq!(n.version(), &SemVer::new(2, 1, 0));
        assert_eq!(n.extension(), Some("hipaa"));

        let n = parse_ansname("mcp://sentimentAnalyzer.textAnalysis.ExampleCorp.v1.0").unwrap();
        assert_eq!(n.protocol(), &Protocol::Mcp);
        assert_eq!(n.agent_id(), "sentimentAnalyzer");
        assert_eq!(n.capability(), "textAnalysis");
        assert_eq!(n.provider(), "ExampleCorp");
        assert_eq!(n.version(), &SemVer::new(1, 0, 0));
        assert_eq!(n.extension(), None);
    }

    #[test]
    fn formats_canonically() {
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
            format_ansname(&n),
            "a2a://translatorBot.DocumentTranslation.exampleCorp.v1.2.3.secure"
        );
        let z = AnsName::new(Protocol::Mcp, "a", "b", "c", SemVer::new(0, 0, 0), None).unwrap();
        assert_eq!(format_ansname(&z), "mcp://a.b.c.v0.0.0");
    }

    #[test]
    fn version_suffixes_and_extensions() {
        let n = parse_ansname("acp://a.b.c.v1.0.0-rc1.eu.west").unwrap();
        assert_eq!(n.version().to_string(), "1.0.0-rc1");
        assert_eq!(n.extension(), Some("eu.west"));

        let n = parse_ansname("acp://a.b.c.v3-beta.x").unwrap();
        assert_eq!(n.version().to_string(), "3.0.0-beta");
        assert_eq!(n.extension(), Some("x"));

        let n = parse_ansname("acp://a.b.c.v1.2.3.4").unwrap();
        assert_eq!(n.version(), &SemVer::new(1, 2, 3));
        assert_eq!(n.extension(), Some("4"));

        let n = parse_ansname("acp://a.b.c.v1.2.3+build7").unwrap();
        assert_eq!(n.version().build, vec!["build7".to_string()]);
        assert_eq!(n.to_string(), "acp://a.b.c.v1.2.3+build7");
    }

    #[test]
    fn unknown_protocol_is_flagged_not_rejected() {
        let n = parse_ansname("xyz://a.b.c.v1").unwrap();
        assert!(n.has_unknown_protocol());
        assert_eq!(n.protocol().as_str(), "xyz");
    }

    #[test]
    fn malformed_names() {
        for bad in [
            "a2a://broken",
            "a2a:/a.b.c.v1",
            "a2a://a.b.c.1.0",
            "a2a://a..c.v1",
            "a2a://a.b.c.v1.",
            "a2a://a/x.b.c.v1",
            "a2a://a.b.c.d.v1",
            "a2a://a.b.c.vx",
            "a2a://a.b.c.v1-",
            "://a.b.c.v1",
        ] {
            assert!(matches!(parse_ansname(bad), Err(NameError::MalformedName(_))), "{bad}");
        }
    }

    #[test]
    fn dotted_prerelease_is_not_representable() {
        let v: SemVer = "1.0.0-rc.1".parse().unwrap();
        assert!(AnsName::new(Protocol::A2a, "a", "b", "c", v, None).is_err());
    }
}
