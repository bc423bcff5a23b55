//! The `ans` command line.
//!
//! Client verbs print JSON on stdout and map failures onto exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage or local configuration error |
//! | 2 | request failed schema or syntax validation |
//! | 3 | registry unreachable |
//! | 4 | response failed verification |
//! | 5 | agent or compatible version not found |
//! | 6 | registry refused the request (conflict, bad proof, rate limit) |

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use ans_core::clock::{rfc3339, Clock, SystemClock};
use ans_core::messages::{
    CapabilityRequest, ChallengeRequest, DeregistrationRequest, RegistrationRequest, RenewalRequest, RevocationRequest,
    SignedRequest,
};
use ans_core::pki::{Certificate, PrivateKey, SignatureAlgorithm, PASSPHRASE_ENV};
use ans_core::schemas::{MessageKind, SchemaSet};
use ans_core::{AnsName, Resolver, ResolverError};

use crate::client::{AnsClient, ClientError};
use crate::config::ServiceConfig;
use crate::home::{self, InitOptions};
use crate::http::{AppState, TlsMaterial};
use crate::probe::HttpProbe;
use crate::ratelimit::RateLimiter;
use crate::ServiceError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NETWORK: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_NOT_FOUND: i32 = 5;
pub const EXIT_REFUSED: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "ans", version, about = "Agent Name Service registry and resolver")]
pub struct Cli {
    /// Service configuration file.
    #[arg(long, global = true, env = "ANS_CONFIG")]
    pub config: Option<PathBuf>,
    /// Registry base URL for client verbs.
    #[arg(long, global = true, env = "ANS_SERVER")]
    pub server: Option<String>,
    /// CA certificate trusted for TLS and for resolution answers.
    #[arg(long, global = true)]
    pub trust_anchor: Option<PathBuf>,
    /// Listen address for `serve`.
    #[arg(long, global = true)]
    pub listen: Option<SocketAddr>,
    /// Resolution TTL in seconds for `serve`.
    #[arg(long, global = true)]
    pub ttl: Option<u64>,
    /// Serve plain HTTP. For local development only.
    #[arg(long, global = true)]
    pub dev_no_tls: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a registry node: CA, signing identity, TLS certificate, config.
    Init(InitArgs),
    /// Run the registry service.
    Serve,
    /// Generate an encrypted private key and its public key.
    Keygen(KeygenArgs),
    /// Register an agent.
    Register(RegisterArgs),
    /// Renew an agent's certificate.
    Renew(RenewArgs),
    /// Resolve an ANS name to a verified endpoint.
    Resolve(ResolveArgs),
    /// Withdraw an agent (owner or operator).
    Deregister(NameKeyArgs),
    /// Revoke an agent's certificate (operator).
    Revoke(RevokeArgs),
    /// Fetch the current CRL.
    Crl(CrlArgs),
    /// Challenge an agent's claimed capability (operator).
    Challenge(ChallengeArgs),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Directory for the node's files.
    #[arg(long, default_value = ".")]
    pub dir: PathBuf,
    /// Host name or address for the TLS certificate (repeatable).
    #[arg(long = "host")]
    pub hosts: Vec<String>,
    #[arg(long, default_value = "ed25519")]
    pub alg: String,
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long, default_value = "ed25519")]
    pub alg: String,
    /// Private key path; the public key goes to `<out>.pub`.
    #[arg(long, default_value = "agent.key.pem")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Agent private key (encrypted PKCS#8).
    #[arg(long)]
    pub key: PathBuf,
    /// Full ANS name, e.g. `a2a://bot.Translate.Acme.v1.0.0`.
    #[arg(long)]
    pub name: String,
    /// Network address the agent serves on.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// JSON file with the protocol extensions object.
    #[arg(long)]
    pub extensions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenewArgs {
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub name: String,
    /// Agent UUID as returned at registration.
    #[arg(long)]
    pub uuid: String,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    /// ANS name; its version is ignored in favour of `--range`.
    pub name: String,
    #[arg(long, default_value = "*")]
    pub range: String,
}

#[derive(Debug, Args)]
pub struct NameKeyArgs {
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct RevokeArgs {
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value = "unspecified")]
    pub reason: String,
}

#[derive(Debug, Args)]
pub struct CrlArgs {
    /// Write the PEM here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChallengeArgs {
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub uuid: String,
    #[arg(long)]
    pub input: String,
    #[arg(long)]
    pub expected: String,
    /// Accuracy the agent claims, in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub accuracy: f64,
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub body: Option<Value>,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
            body: None,
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Failure::new(EXIT_USAGE, e.to_string())
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let code = match &e {
            ClientError::Network(_) => EXIT_NETWORK,
            ClientError::Decode(_) => EXIT_VERIFY,
            ClientError::Api { status, .. } => match status {
                400 => EXIT_SCHEMA,
                404 | 410 => EXIT_NOT_FOUND,
                _ => EXIT_REFUSED,
            },
        };
        let body = match &e {
            ClientError::Api { body, .. } => serde_json::to_value(body).ok(),
            _ => None,
        };
        Failure {
            code,
            message: e.to_string(),
            body,
        }
    }
}

impl From<ResolverError> for Failure {
    fn from(e: ResolverError) -> Self {
        let code = match &e {
            ResolverError::AgentNotFound(_) | ResolverError::IncompatibleVersion(_) => EXIT_NOT_FOUND,
            ResolverError::InvalidEndpoint(_) => EXIT_VERIFY,
            ResolverError::MalformedName(_) | ResolverError::MalformedRange(_) => EXIT_SCHEMA,
            ResolverError::Transport(_) => EXIT_NETWORK,
            ResolverError::Rejected { code, .. } => match code.as_str() {
                "SchemaViolation" | "MalformedName" | "MalformedRange" | "InvalidRequest" => EXIT_SCHEMA,
                _ => EXIT_REFUSED,
            },
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome = Result<Value, Failure>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cli, err) {
        Ok(Value::Null) => EXIT_OK,
        Ok(Value::String(s)) => {
            let _ = write!(out, "{s}");
            EXIT_OK
        }
        Ok(v) => {
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&v).expect("json value serializes")
            );
            EXIT_OK
        }
        Err(f) => {
            let _ = writeln!(err, "ans: {}", f.message);
            if let Some(body) = f.body {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&body).expect("json value serializes")
                );
            }
            f.code
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

fn execute(cli: &Cli, err: &mut dyn Write) -> Outcome {
    match &cli.command {
        Command::Init(a) => init(cli, a),
        Command::Serve => serve(cli, err),
        Command::Keygen(a) => keygen(a),
        Command::Register(a) => register(cli, a),
        Command::Renew(a) => renew(cli, a),
        Command::Resolve(a) => resolve(cli, a),
        Command::Deregister(a) => deregister(cli, a),
        Command::Revoke(a) => revoke(cli, a),
        Command::Crl(a) => crl(cli, a),
        Command::Challenge(a) => challenge(cli, a),
    }
}

fn passphrase() -> Result<String, Failure> {
    std::env::var(PASSPHRASE_ENV)
        .map_err(|_| Failure::new(EXIT_USAGE, format!("set {PASSPHRASE_ENV} to the key passphrase")))
}

fn load_key(path: &Path) -> Result<PrivateKey, Failure> {
    let pass = passphrase()?;
    PrivateKey::load(path, &pass).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn parse_alg(s: &str) -> Result<SignatureAlgorithm, Failure> {
    s.parse()
        .map_err(|e: ans_core::pki::PkiError| Failure::new(EXIT_USAGE, e.to_string()))
}

fn parse_name(s: &str) -> Result<AnsName, Failure> {
    s.parse()
        .map_err(|e: ans_core::NameError| Failure::new(EXIT_SCHEMA, format!("{s}: {e}")))
}

fn now_rfc3339() -> String {
    rfc3339(SystemClock.unix())
}

/// The config file if one was named or `./ans.toml` exists.
fn config(cli: &Cli) -> Result<Option<ServiceConfig>, Failure> {
    let path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            let p = PathBuf::from(home::CONFIG_FILE);
            if !p.exists() {
                return Ok(None);
            }
            p
        }
    };
    Ok(Some(ServiceConfig::load(&path)?))
}

fn trust_anchor(cli: &Cli, cfg: Option<&ServiceConfig>) -> Result<Option<Certificate>, Failure> {
    let path = cli.trust_anchor.clone().or_else(|| cfg.map(|c| c.trust_anchor.clone()));
    match path {
        None => Ok(None),
        Some(p) => {
            let text =
                std::fs::read_to_string(&p).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", p.display())))?;
            Certificate::from_pem(&text)
                .map(Some)
                .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", p.display())))
        }
    }
}

fn client(cli: &Cli) -> Result<(AnsClient, Option<Certificate>), Failure> {
    let cfg = config(cli)?;
    let server = cli
        .server
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.server_url.clone()))
        .unwrap_or_else(|| ServiceConfig::default().server_url);
    let anchor = trust_anchor(cli, cfg.as_ref())?;
    let client = AnsClient::new(&server, anchor.as_ref()).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    Ok((client, anchor))
}

/// Checks an outgoing document against its schema before it leaves.
fn conform<T: Serialize>(kind: MessageKind, doc: &T) -> Result<(), Failure> {
    let v = serde_json::to_value(doc).expect("request serializes");
    let report = SchemaSet::shared().validate(kind, &v);
    if report.valid {
        Ok(())
    } else {
        let list: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        Err(Failure::new(
            EXIT_SCHEMA,
            format!("{} is not schema-valid: {}", kind.as_str(), list.join("; ")),
        ))
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("response serializes")
}

fn init(cli: &Cli, a: &InitArgs) -> Outcome {
    let pass = passphrase()?;
    let mut opts = InitOptions {
        algorithm: parse_alg(&a.alg)?,
        ..InitOptions::default()
    };
    if !a.hosts.is_empty() {
        opts.hosts = a.hosts.clone();
    }
    if let Some(l) = cli.listen {
        opts.listen = l;
    }
    let cfg = home::init(&a.dir, &pass, &opts, Arc::new(SystemClock))?;
    Ok(json!({
        "config": a.dir.join(home::CONFIG_FILE),
        "trustAnchor": cfg.trust_anchor,
        "serverUrl": cfg.server_url,
    }))
}

fn serve(cli: &Cli, err: &mut dyn Write) -> Outcome {
    let mut cfg = config(cli)?.unwrap_or_default();
    if let Some(l) = cli.listen {
        cfg.listen = l;
    }
    if let Some(ttl) = cli.ttl {
        cfg.default_ttl_seconds = ttl;
    }
    if let Some(t) = &cli.trust_anchor {
        cfg.trust_anchor = t.clone();
    }
    cfg.dev_no_tls |= cli.dev_no_tls;
    cfg.check()?;
    let pass = passphrase()?;
    let tls = if cfg.dev_no_tls {
        None
    } else {
        if !cfg.tls.cert.exists() || !cfg.tls.key.exists() {
            return Err(Failure::new(
                EXIT_USAGE,
                format!(
                    "TLS certificate {} or key {} missing; run `ans init` or pass --dev-no-tls",
                    cfg.tls.cert.display(),
                    cfg.tls.key.display()
                ),
            ));
        }
        let (certs, key) = home::tls_material(&cfg, &pass)?;
        Some(TlsMaterial { certs, key })
    };
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let registry = Arc::new(home::open_registry(&cfg, &pass, clock.clone())?);
    let state = AppState {
        registry,
        limiter: Arc::new(RateLimiter::new(cfg.rate_limit, clock)),
        probe: Arc::new(HttpProbe::new()),
        crl_file: Some(cfg.data_dir.join(home::CRL_FILE)),
    };
    let listener = std::net::TcpListener::bind(cfg.listen)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", cfg.listen)))?;
    let scheme = if tls.is_some() { "https" } else { "http" };
    let _ = writeln!(err, "ans: serving on {scheme}://{}", cfg.listen);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    rt.block_on(crate::http::serve_on(
        listener,
        crate::http::router(state),
        tls,
        async {
            let _ = tokio::signal::ctrl_c().await;
        },
    ))?;
    Ok(Value::Null)
}

fn keygen(a: &KeygenArgs) -> Outcome {
    let pass = passphrase()?;
    let key = PrivateKey::generate(parse_alg(&a.alg)?);
    key.save(&a.out, &pass)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", a.out.display())))?;
    let mut pub_path = a.out.clone().into_os_string();
    pub_path.push(".pub");
    let pub_path = PathBuf::from(pub_path);
    let public = key.public_key();
    std::fs::write(&pub_path, public.to_pem())
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", pub_path.display())))?;
    Ok(json!({
        "algorithm": key.algorithm(),
        "privateKey": a.out,
        "publicKey": pub_path,
        "agentUUID": ans_core::registry::derive_agent_uuid(&public).to_string(),
    }))
}

fn register(cli: &Cli, a: &RegisterArgs) -> Outcome {
    let name = parse_name(&a.name)?;
    let key = load_key(&a.key)?;
    let extensions = match &a.extensions {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_SCHEMA, format!("{}: {e}", p.display())))?
        }
        None => json!({}),
    };
    let req = RegistrationRequest::for_key(&name, &key, a.endpoint.clone(), extensions)
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    conform(MessageKind::RegistrationRequest, &req)?;
    let (client, _) = client(cli)?;
    let resp = client.register(&req)?;
    conform(MessageKind::RegistrationResponse, &resp).map_err(|f| Failure::new(EXIT_VERIFY, f.message))?;
    Ok(to_json(&resp))
}

fn renew(cli: &Cli, a: &RenewArgs) -> Outcome {
    let name = parse_name(&a.name)?;
    let key = load_key(&a.key)?;
    let mut req = RenewalRequest::new(&name, &a.uuid, now_rfc3339());
    req.sign_with(&key);
    conform(MessageKind::RenewalRequest, &req)?;
    let (client, _) = client(cli)?;
    let resp = client.renew(&req)?;
    conform(MessageKind::RenewalResponse, &resp).map_err(|f| Failure::new(EXIT_VERIFY, f.message))?;
    Ok(to_json(&resp))
}

fn resolve(cli: &Cli, a: &ResolveArgs) -> Outcome {
    let name = parse_name(&a.name)?;
    let probe = CapabilityRequest::for_name(&name, &a.range);
    conform(MessageKind::CapabilityRequest, &probe)?;
    let (client, anchor) = client(cli)?;
    let anchor = anchor.ok_or_else(|| Failure::new(EXIT_USAGE, "resolve needs --trust-anchor or a config file"))?;
    let resolver = Resolver::new(client, anchor, Arc::new(SystemClock));
    let found = resolver.resolve_key(&name.key(), name.extension(), &a.range)?;
    Ok(json!({
        "ansName": found.ans_name,
        "agentUUID": found.agent_uuid,
        "endpoint": found.endpoint,
        "agentCertificate": found.agent_certificate.certificate().to_pem(),
        "verifiedAt": rfc3339(found.verified_at),
        "expiresAt": rfc3339(found.expires_at),
    }))
}

fn deregister(cli: &Cli, a: &NameKeyArgs) -> Outcome {
    let name = parse_name(&a.name)?;
    let key = load_key(&a.key)?;
    let mut req = DeregistrationRequest::new(&name, now_rfc3339());
    req.sign_with(&key);
    let (client, _) = client(cli)?;
    Ok(to_json(&client.deregister(&req)?))
}

fn revoke(cli: &Cli, a: &RevokeArgs) -> Outcome {
    let name = parse_name(&a.name)?;
    let key = load_key(&a.key)?;
    let mut req = RevocationRequest::new(&name, &a.reason, now_rfc3339());
    req.sign_with(&key);
    let (client, _) = client(cli)?;
    Ok(to_json(&client.revoke(&req)?))
}

fn crl(cli: &Cli, a: &CrlArgs) -> Outcome {
    let (client, anchor) = client(cli)?;
    let pem = client.crl()?;
    if let Some(ca) = anchor {
        ans_core::pki::RevocationList::from_pem_verified(&pem, &ca)
            .map_err(|e| Failure::new(EXIT_VERIFY, e.to_string()))?;
    }
    match &a.out {
        Some(p) => {
            std::fs::write(p, &pem).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", p.display())))?;
            Ok(Value::Null)
        }
        None => Ok(Value::String(pem)),
    }
}

fn challenge(cli: &Cli, a: &ChallengeArgs) -> Outcome {
    let key = load_key(&a.key)?;
    let mut req = ChallengeRequest::new(&a.uuid, &a.input, &a.expected, a.accuracy, now_rfc3339());
    req.sign_with(&key);
    let (client, _) = client(cli)?;
    Ok(to_json(&client.challenge(&req)?))
}
