//! Agent names, semantic versions and version negotiation.

mod name;
mod range;
mod version;

pub use name::{format_ansname, parse_ansname, AnsName, NameKey, Protocol};
pub use range::{is_version_compatible, RangeKind, VersionRange};
pub use version::{compare_versions, Identifier, SemVer};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("malformed ANSName: {0}")]
    MalformedName(String),
    #[error("malformed version: {0}")]
    MalformedVersion(String),
    #[error("malformed version range: {0}")]
    MalformedRange(String),
    #[error("incompatible version")]
    IncompatibleVersion,
}

/// Anything that carries a version and can take part in negotiation.
pub trait Versioned {
    fn version(&self) -> &SemVer;
}

impl Versioned for SemVer {
    fn version(&self) -> &SemVer {
        self
    }
}

impl Versioned for AnsName {
    fn version(&self) -> &SemVer {
        AnsName::version(self)
    }
}

/// Picks the highest-versioned match satisfying `range`.
///
/// Candidates are walked from highest to lowest precedence, so a stable
/// release always wins over its own pre-releases. The result does not depend
/// on input order.
pub fn version_negotiation<'a, T: Versioned>(matches: &'a [T], range: &VersionRange) -> Result<&'a T, NameError> {
    let mut sorted: Vec<&T> = matches.iter().collect();
    sorted.sort_by(|a, b| {
        compare_versions(b.version(), a.version()).then_with(|| b.version().build.cmp(&a.version().build))
    });
    sorted
        .into_iter()
        .find(|m| range.raw().trim() == "*" || range.satisfies(m.version()))
        .ok_or(NameError::IncompatibleVersion)
}
