//! Semantic versions with SemVer 2.0.0 precedence.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use super::NameError;

/// One dot-separated pre-release identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Identifier {
    Numeric(u64),
    AlphaNumeric(String),
}

impl Identifier {
    fn parse(s: &str) -> Result<Self, NameError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-') {
            return Err(NameError::MalformedVersion(s.to_string()));
        }
        if s.bytes().all(|b| b.is_ascii_digit()) {
            if s.len() > 1 && s.starts_with('0') {
                return Err(NameError::MalformedVersion(s.to_string()));
            }
            let n = s.parse().map_err(|_| NameError::MalformedVersion(s.to_string()))?;
            Ok(Identifier::Numeric(n))
        } else {
            Ok(Identifier::AlphaNumeric(s.to_string()))
        }
    }
}

impl Ord for Identifier {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Identifier::Numeric(a), Identifier::Numeric(b)) => a.cmp(b),
            (Identifier::Numeric(_), Identifier::AlphaNumeric(_)) => Ordering::Less,
            (Identifier::AlphaNumeric(_), Identifier::Numeric(_)) => Ordering::Greater,
            (Identifier::AlphaNumeric(a), Identifier::AlphaNumeric(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Identifier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identifier::Numeric(n) => write!(f, "{n}"),
            Identifier::AlphaNumeric(s) => f.write_str(s),
        }
    }
}

/// A `MAJOR.MINOR.PATCH[-PRE][+BUILD]` version.
///
/// Equality and ordering follow SemVer precedence, so build metadata is
/// ignored by both.
#[derive(Debug, Clone)]
pub struct SemVer {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub pre: Vec<Identifier>,
    pub build: Vec<String>,
}

impl SemVer {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        SemVer {
            major,
            minor,
            patch,
            pre: Vec::new(),
            build: Vec::new(),
        }
    }

    pub fn is_prerelease(&self) -> bool {
        !self.pre.is_empty()
    }

    pub(crate) fn triple(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }

    /// Copy of this version without build metadata.
    pub fn without_build(&self) -> SemVer {
        SemVer {
            build: Vec::new(),
            ..self.clone()
        }
    }

    /// Parses the `-PRE` and `+BUILD` tail following the numeric core.
    pub(crate) fn parse_suffix(&mut self, suffix: &str) -> Result<(), NameError> {
        let bad = || NameError::MalformedVersion(suffix.to_string());
        let (pre, build) = match suffix.split_once('+') {
            Some((pre, build)) => (pre, Some(build)),
            None => (suffix, None),
        };
        if let Some(pre) = pre.strip_prefix('-') {
            self.pre = pre.split('.').map(Identifier::parse).collect::<Result<_, _>>()?;
        } else if !pre.is_empty() {
            return Err(bad());
        }
        if let Some(build) = build {
            self.build = build
                .split('.')
                .map(|id| {
                    if !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-') {
                        Ok(id.to_string())
                    } else {
                        Err(bad())
                    }
                })
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }
}

pub(crate) fn parse_numeric(s: &str) -> Result<u64, NameError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
        return Err(NameError::MalformedVersion(s.to_string()));
    }
    s.parse().map_err(|_| NameError::MalformedVersion(s.to_string()))
}

impl FromStr for SemVer {
    type Err = NameError;

    /// Strict SemVer 2.0.0: all three numeric components are required.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let core_end = s.find(['-', '+']).unwrap_or(s.len());
        let (core, suffix) = s.split_at(core_end);
        let parts: Vec<&str> = core.split('.').collect();
        if parts.len() != 3 {
            return Err(NameError::MalformedVersion(s.to_string()));
        }
        let mut v = SemVer::new(
            parse_numeric(parts[0])?,
            parse_numeric(parts[1])?,
            parse_numeric(parts[2])?,
        );
        v.parse_suffix(suffix)?;
        Ok(v)
    }
}

impl fmt::Display for SemVer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)?;
        if !self.pre.is_empty() {
            f.write_str("-")?;
            for (i, id) in self.pre.iter().enumerate() {
                if i > 0 {
                    f.write_str(".")?;
                }
                write!(f, "{id}")?;
            }
        }
        if !self.build.is_empty() {
            write!(f, "+{}", self.build.join("."))?;
        }
        Ok(())
    }
}

/// Total order over versions: numeric core first, then a pre-release sorts
/// below the matching release, then identifier-wise comparison.
pub fn compare_versions(a: &SemVer, b: &SemVer) -> Ordering {
    a.triple().cmp(&b.triple()).then_with(|| {
        match (a.pre.is_empty(), b.pre.is_empty()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            // Vec ordering is lexicographic with shorter prefixes first,
            // which is exactly the SemVer rule for identifier lists.
            (false, false) => a.pre.cmp(&b.pre),
        }
    })
}

impl PartialEq for SemVer {
    fn eq(&self, other: &Self) -> bool {
        compare_versions(self, other) == Ordering::Equal
    }
}

impl Eq for SemVer {}

impl Ord for SemVer {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_versions(self, other)
    }
}

impl PartialOrd for SemVer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::hash::Hash for SemVer {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.triple().hash(state);
        self.pre.hash(state);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> SemVer {
        s.parse().unwrap()
    }

    #[test]
    fn prerelease_sorts_below_release() {
        assert_eq!(compare_versions(&v("1.0.0-rc1"), &v("1.0.0")), Ordering::Less);
        assert_eq!(compare_versions(&v("1.0.0"), &v("1.0.0")), Ordering::Equal);
        assert_eq!(compare_versions(&v("2.0.0"), &v("1.9.9")), Ordering::Greater);
    }

    #[test]
    fn semver_spec_precedence_chain() {
        let chain = [
            "1.0.0-alpha",
            "1.0.0-alpha.1",
            "1.0.0-alpha.beta",
            "1.0.0-beta",
            "1.0.0-beta.2",
            "1.0.0-beta.11",
            "1.0.0-rc.1",
            "1.0.0",
        ];
        for w in chain.windows(2) {
            assert!(v(w[0]) < v(w[1]), "{} < {}", w[0], w[1]);
        }
    }

    #[test]
    fn build_metadata_is_ignored() {
        assert_eq!(v("1.0.0+a"), v("1.0.0+b"));
        assert_eq!(v("1.0.0+exp.sha.5114f85").to_string(), "1.0.0+exp.sha.5114f85");
    }

    #[test]
    fn brute_force_triples_follow_lexicographic_order() {
        let mut all = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    all.push((a, b, c));
                }
            }
        }
        for x in &all {
            for y in &all {
                let got = compare_versions(&SemVer::new(x.0, x.1, x.2), &SemVer::new(y.0, y.1, y.2));
                assert_eq!(got, x.cmp(y));
            }
        }
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["1.2", "01.0.0", "1.0.0-", "1.0.0-01", "1.0.0+", "a.b.c", "1.0.0-rc..1"] {
            assert!(bad.parse::<SemVer>().is_err(), "{bad}");
        }
    }
}
