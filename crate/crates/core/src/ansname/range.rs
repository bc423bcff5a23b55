//! Version range expressions in the npm `node-semver` dialect.
//!
//! Supported forms: `*`, exact versions (`1.2.3`, `=1.2.3`), caret and tilde
//! ranges, x-ranges (`1.x`, `1.2`), primitive comparators (`>=1.0.0 <2.0.0`)
//! and `||` unions. A pre-release version only satisfies a comparator set
//! when one of the set's comparators names a pre-release on the same
//! `MAJOR.MINOR.PATCH`. The wildcard `*` matches every version.

use std::fmt;
use std::str::FromStr;

use super::version::{parse_numeric, SemVer};
use super::NameError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeKind {
    Wildcard,
    Exact,
    Caret,
    Tilde,
    ComparatorSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Eq,
    Gt,
    Ge,
    Lt,
    Le,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Comparator {
    op: Op,
    version: SemVer,
}

impl Comparator {
    fn new(op: Op, version: SemVer) -> Self {
        Comparator { op, version }
    }

    fn matches(&self, v: &SemVer) -> bool {
        match self.op {
            Op::Eq => v == &self.version,
            Op::Gt => v > &self.version,
            Op::Ge => v >= &self.version,
            Op::Lt => v < &self.version,
            Op::Le => v <= &self.version,
        }
    }
}

/// A parsed range. `raw` keeps the caller's spelling.
#[derive(Debug, Clone)]
pub struct VersionRange {
    raw: String,
    kind: RangeKind,
    alternatives: Vec<Vec<Comparator>>,
}

impl VersionRange {
    pub fn wildcard() -> Self {
        VersionRange {
            raw: "*".to_string(),
            kind: RangeKind::Wildcard,
            alternatives: vec![Vec::new()],
        }
    }

    /// The range satisfied by exactly `v` (build metadata ignored).
    pub fn exact(v: &SemVer) -> Self {
        VersionRange {
            raw: v.to_string(),
            kind: RangeKind::Exact,
            alternatives: vec![vec![Comparator::new(Op::Eq, v.without_build())]],
        }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn kind(&self) -> RangeKind {
        self.kind
    }

    pub fn satisfies(&self, v: &SemVer) -> bool {
        if self.kind == RangeKind::Wildcard {
            return true;
        }
        self.alternatives.iter().any(|set| {
            set.iter().all(|c| c.matches(v))
                && (!v.is_prerelease()
                    || set
                        .iter()
                        .any(|c| c.version.is_prerelease() && c.version.triple() == v.triple()))
        })
    }
}

impl PartialEq for VersionRange {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.alternatives == other.alternatives
    }
}

impl fmt::Display for VersionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// A possibly partial version as written inside a range: missing or `x`
/// components are `None`.
struct Partial {
    major: Option<u64>,
    minor: Option<u64>,
    patch: Option<u64>,
    suffix: String,
}

impl Partial {
    fn parse(s: &str) -> Result<Self, NameError> {
        let s = s.strip_prefix('v').unwrap_or(s);
        let core_end = s.find(['-', '+']).unwrap_or(s.len());
        let (core, suffix) = s.split_at(core_end);
        let parts: Vec<&str> = core.split('.').collect();
        if parts.is_empty() || parts.len() > 3 {
            return Err(NameError::MalformedRange(s.to_string()));
        }
        let mut nums = [None; 3];
        let mut seen_wild = false;
        for (i, p) in parts.iter().enumerate() {
            if matches!(*p, "x" | "X" | "*") {
                seen_wild = true;
            } else if seen_wild {
                return Err(NameError::MalformedRange(s.to_string()));
            } else {
                nums[i] = Some(parse_numeric(p).map_err(|_| NameError::MalformedRange(s.to_string()))?);
            }
        }
        let partial = Partial {
            major: nums[0],
            minor: nums[1],
            patch: nums[2],
            suffix: suffix.to_string(),
        };
        if !partial.suffix.is_empty() && partial.patch.is_none() {
            return Err(NameError::MalformedRange(s.to_string()));
        }
        Ok(partial)
    }

    fn is_full(&self) -> bool {
        self.patch.is_some()
    }

    fn floor(&self) -> Result<SemVer, NameError> {
        let mut v = SemVer::new(
            self.major.unwrap_or(0),
            self.minor.unwrap_or(0),
            self.patch.unwrap_or(0),
        );
        v.parse_suffix(&self.suffix)
            .map_err(|_| NameError::MalformedRange(self.suffix.clone()))?;
        Ok(v.without_build())
    }
}

fn bump(major: u64, minor: u64, patch: u64) -> SemVer {
    SemVer::new(major, minor, patch)
}

fn overflow(s: &str) -> NameError {
    NameError::MalformedRange(s.to_string())
}

fn next(n: u64, token: &str) -> Result<u64, NameError> {
    n.checked_add(1).ok_or_else(|| overflow(token))
}

/// Desugars one whitespace-separated token into primitive comparators.
fn desugar(token: &str) -> Result<Vec<Comparator>, NameError> {
    if matches!(token, "*" | "x" | "X") {
        return Ok(Vec::new());
    }
    if let Some(rest) = token.strip_prefix('^') {
        let p = Partial::parse(rest)?;
        let floor = p.floor()?;
        let upper = match (p.major, p.minor, p.patch) {
            (None, _, _) => return Ok(Vec::new()),
            (Some(m), _, _) if m > 0 => bump(next(m, token)?, 0, 0),
            (Some(0), None, _) => bump(1, 0, 0),
            (Some(0), Some(n), _) if n > 0 => bump(0, next(n, token)?, 0),
            (Some(0), Some(0), None) => bump(0, 1, 0),
            (Some(0), Some(0), Some(q)) => bump(0, 0, next(q, token)?),
            _ => unreachable!(),
        };
        return Ok(vec![Comparator::new(Op::Ge, floor), Comparator::new(Op::Lt, upper)]);
    }
    if let Some(rest) = token.strip_prefix('~') {
        let rest = rest.strip_prefix('>').unwrap_or(rest);
        let p = Partial::parse(rest)?;
        let floor = p.floor()?;
        let upper = match (p.major, p.minor) {
            (None, _) => return Ok(Vec::new()),
            (Some(m), None) => bump(next(m, token)?, 0, 0),
            (Some(m), Some(n)) => bump(m, next(n, token)?, 0),
        };
        return Ok(vec![Comparator::new(Op::Ge, floor), Comparator::new(Op::Lt, upper)]);
    }

    let (op, rest) = if let Some(r) = token.strip_prefix(">=") {
        (Op::Ge, r)
    } else if let Some(r) = token.strip_prefix("<=") {
        (Op::Le, r)
    } else if let Some(r) = token.strip_prefix('>') {
        (Op::Gt, r)
    } else if let Some(r) = token.strip_prefix('<') {
        (Op::Lt, r)
    } else if let Some(r) = token.strip_prefix('=') {
        (Op::Eq, r)
    } else {
        (Op::Eq, token)
    };
    let p = Partial::parse(rest)?;
    if p.is_full() {
        return Ok(vec![Comparator::new(op, p.floor()?)]);
    }
    // x-range: the partial version names an interval [floor, ceiling).
    let Some(major) = p.major else {
        return Ok(match op {
            Op::Gt | Op::Lt => vec![Comparator::new(Op::Lt, bump(0, 0, 0))],
            _ => Vec::new(),
        });
    };
    let floor = p.floor()?;
    let ceiling = match p.minor {
        None => bump(next(major, token)?, 0, 0),
        Some(minor) => bump(major, next(minor, token)?, 0),
    };
    Ok(match op {
        Op::Eq => vec![Comparator::new(Op::Ge, floor), Comparator::new(Op::Lt, ceiling)],
        Op::Ge => vec![Comparator::new(Op::Ge, floor)],
        Op::Gt => vec![Comparator::new(Op::Ge, ceiling)],
        Op::Lt => vec![Comparator::new(Op::Lt, floor)],
        Op::Le => vec![Comparator::new(Op::Lt, ceiling)],
    })
}

impl FromStr for VersionRange {
    type Err = NameError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let trimmed = raw.trim();
        if matches!(trimmed, "" | "*" | "x" | "X") {
            return Ok(VersionRange {
                raw: raw.to_string(),
                ..VersionRange::wildcard()
            });
        }
        let mut alternatives = Vec::new();
        let mut tokens_total = 0;
        for alt in trimmed.split("||") {
            let tokens: Vec<&str> = alt.split_whitespace().collect();
            if tokens.is_empty() {
                return Err(NameError::MalformedRange(raw.to_string()));
            }
            tokens_total += tokens.len();
            let mut set = Vec::new();
            for t in tokens {
                set.extend(desugar(t).map_err(|_| NameError::MalformedRange(raw.to_string()))?);
            }
            alternatives.push(set);
        }

        let kind = if alternatives.len() == 1 && tokens_total == 1 {
            let t = trimmed;
            if t.starts_with('^') {
                RangeKind::Caret
            } else if t.starts_with('~') {
                RangeKind::Tilde
            } else if Partial::parse(t.strip_prefix('=').unwrap_or(t))
                .map(|p| p.is_full())
                .unwrap_or(false)
            {
                RangeKind::Exact
            } else {
                RangeKind::ComparatorSet
            }
        } else {
            RangeKind::ComparatorSet
        };
        Ok(VersionRange {
            raw: raw.to_string(),
            kind,
            alternatives,
        })
    }
}

/// Parses `range` (falling back to a single version) and checks `v` against it.
pub fn is_version_compatible(v: &SemVer, range: &str) -> Result<bool, NameError> {
    let parsed = match range.parse::<VersionRange>() {
        Ok(r) => r,
        Err(_) => VersionRange::exact(
            &range
                .parse::<SemVer>()
                .map_err(|_| NameError::MalformedRange(range.to_string()))?,
        ),
    };
    Ok(parsed.satisfies(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> SemVer {
        s.parse().unwrap()
    }

    fn sat(ver: &str, range: &str) -> bool {
        is_version_compatible(&v(ver), range).unwrap()
    }

    #[test]
    fn kinds() {
        assert_eq!("*".parse::<VersionRange>().unwrap().kind(), RangeKind::Wildcard);
        assert_eq!("1.0.0".parse::<VersionRange>().unwrap().kind(), RangeKind::Exact);
        assert_eq!("=1.0.0".parse::<VersionRange>().unwrap().kind(), RangeKind::Exact);
        assert_eq!("^1.0.0".parse::<VersionRange>().unwrap().kind(), RangeKind::Caret);
        assert_eq!("~1.2.0".parse::<VersionRange>().unwrap().kind(), RangeKind::Tilde);
        assert_eq!(
            ">=1.0.0 <2.0.0".parse::<VersionRange>().unwrap().kind(),
            RangeKind::ComparatorSet
        );
        assert_eq!("1.2".parse::<VersionRange>().unwrap().kind(), RangeKind::ComparatorSet);
    }

    #[test]
    fn examples() {
        assert!(sat("1.2.3", "*"));
        assert!(!sat("1.0.0-rc1", "1.0.0"));
        assert!(sat("1.2.3", "^1.0.0"));
        assert!(sat("1.0.0-rc1", "1.0.0-rc1"));
        assert!(sat("1.0.0-rc2", "^1.0.0-rc1"));
        assert!(!sat("1.1.0-beta", "^1.0.0-rc1"));
        assert!(!sat("2.0.0-alpha", "^1.0.0"));
    }

    #[test]
    fn partials_and_unions() {
        assert!(sat("1.2.9", "1.2"));
        assert!(!sat("1.3.0", "1.2.x"));
        assert!(sat("1.9.0", "1.x"));
        assert!(sat("1.3.0", ">1.2"));
        assert!(!sat("1.2.5", ">1.2"));
        assert!(sat("1.2.5", "<=1.2"));
        assert!(sat("3.0.0", "^1.0.0 || ^3.0.0"));
        assert!(sat("0.2.5", "^0.2"));
        assert!(!sat("0.3.0", "^0.2"));
        assert!(sat("0.0.3", "^0.0.3"));
        assert!(!sat("0.0.4", "^0.0.3"));
    }

    #[test]
    fn single_version_fallback_and_errors() {
        assert!(sat("1.0.0", "1.0.0+build.5"));
        for bad in ["^", "banana", ">=1.0.0 ||", "1.x.2", "^1.2-rc"] {
            assert!(is_version_compatible(&v("1.0.0"), bad).is_err(), "{bad}");
        }
    }
}
