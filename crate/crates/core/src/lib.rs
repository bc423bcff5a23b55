//! Agent Name Service: structured agent names, a PKI-backed registry and a
//! verifying resolver.
//!
//! An agent registers under a name such as
//! `mcp://sentimentAnalyzer.SentimentAnalysis.exampleCorp.v1.0.0`, receives a
//! certificate from the registry's CA, and is then discoverable by protocol,
//! agent ID, capability, provider and a version range. Resolution answers are
//! signed by the registry and verified by the client against a pinned trust
//! anchor and the current CRL.

pub mod adapters;
pub mod ansname;
pub mod canonical;
pub mod clock;
pub mod messages;
pub mod pki;
pub mod registry;
pub mod resolver;
pub mod schemas;

pub use ansname::{AnsName, NameError, Protocol, SemVer, VersionRange};
pub use registry::{Registry, RegistryError};
pub use resolver::{ResolvedEndpoint, Resolver, ResolverError};
