//! HTTP/JSON front end for a [`Registry`].

use std::convert::Infallible;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, FromRequestParts, Path, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::Value;

use ans_core::clock::rfc3339;
use ans_core::messages::{ChallengeRequest, DeregistrationRequest, ErrorBody, RevocationRequest};
use ans_core::registry::{CapabilityProbe, Registry, RegistryError};
use ans_core::schemas::{MessageKind, SchemaSet};

use crate::ratelimit::RateLimiter;
use crate::ServiceError;

/// Header carrying the cache lifetime of a resolution answer, in seconds.
pub const TTL_HEADER: &str = "x-ans-ttl";
/// Header carrying the CRL's next-update time (RFC 3339).
pub const NEXT_UPDATE_HEADER: &str = "x-ans-next-update";

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
    pub limiter: Arc<RateLimiter>,
    pub probe: Arc<dyn CapabilityProbe>,
    /// Where to mirror the CRL after it changes.
    pub crl_file: Option<PathBuf>,
}

/// Rate-limiting identity of the caller: its source address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientId(pub String);

impl<S: Send + Sync> FromRequestParts<S> for ClientId {
    type Rejection = Infallible;

    async fn from_request_parts(parts: &mut Parts, _state: &S) -> Result<Self, Self::Rejection> {
        let id = parts
            .extensions
            .get::<ConnectInfo<SocketAddr>>()
            .map(|c| c.0.ip().to_string())
            .unwrap_or_else(|| "local".to_string());
        Ok(ClientId(id))
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                details: Vec::new(),
            },
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    fn rate_limited() -> Self {
        ApiError::new(StatusCode::TOO_MANY_REQUESTS, "RateLimited", "rate limit exceeded")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// HTTP status for each registry error class.
pub fn status_for(e: &RegistryError) -> StatusCode {
    use RegistryError as E;
    match e {
        E::SchemaViolation(_)
        | E::MalformedName(_)
        | E::MalformedRange(_)
        | E::InvalidRequest(_)
        | E::InvalidCsr(_) => StatusCode::BAD_REQUEST,
        E::Vault(_) => StatusCode::BAD_REQUEST,
        E::UnknownProtocol(_) | E::AdapterRejection(_) => StatusCode::UNPROCESSABLE_ENTITY,
        E::DuplicateName(_) | E::KeyInUse(_) | E::IncompatibleVersion(_) => StatusCode::CONFLICT,
        E::BadProof(_) | E::RevokedAgent => StatusCode::FORBIDDEN,
        E::UnknownAgent(_) | E::AgentNotFound(_) => StatusCode::NOT_FOUND,
        E::InactiveAgent(_) => StatusCode::GONE,
        E::ChallengeTimeout(_) => StatusCode::GATEWAY_TIMEOUT,
        E::IntegrityViolation(_) | E::Storage(_) | E::Audit(_) | E::Pki(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        ApiError {
            status: status_for(&e),
            body: ErrorBody {
                code: e.code().to_string(),
                message: e.to_string(),
                details: e.details(),
            },
        }
    }
}

fn parse_json(body: &Bytes) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "SchemaViolation", e.to_string()))
}

fn parse_as<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "SchemaViolation", e.to_string()))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

impl AppState {
    fn admit(&self, client: &ClientId, capability: Option<&str>) -> Result<(), ApiError> {
        if self.limiter.check(&client.0, capability) {
            Ok(())
        } else {
            Err(ApiError::rate_limited())
        }
    }

    fn mirror_crl(&self) {
        if let (Some(path), Ok(crl)) = (&self.crl_file, self.registry.crl()) {
            let _ = std::fs::write(path, crl.to_pem());
        }
    }
}

/// Refuses to emit a document that does not match its own schema.
fn conforming<T: Serialize>(kind: MessageKind, value: &T) -> Result<Value, ApiError> {
    let v = serde_json::to_value(value).map_err(|e| ApiError::internal(e.to_string()))?;
    let report = SchemaSet::shared().validate(kind, &v);
    if report.valid {
        Ok(v)
    } else {
        let mut err = ApiError::internal(format!("outgoing {kind} failed its schema"));
        err.body.details = report.violations.iter().map(ToString::to_string).collect();
        Err(err)
    }
}

fn capability_of(v: &Value) -> Option<String> {
    v.get("agentCapability").and_then(Value::as_str).map(str::to_string)
}

async fn register(State(st): State<AppState>, client: ClientId, body: Bytes) -> Result<Response, ApiError> {
    let v = parse_json(&body)?;
    st.admit(&client, capability_of(&v).as_deref())?;
    let reg = st.registry.clone();
    let resp = blocking(move || Ok(reg.register_json(&v)?)).await?;
    let out = conforming(MessageKind::RegistrationResponse, &resp)?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn resolve(State(st): State<AppState>, client: ClientId, body: Bytes) -> Result<Response, ApiError> {
    let v = parse_json(&body)?;
    st.admit(&client, capability_of(&v).as_deref())?;
    let reg = st.registry.clone();
    let resp = blocking(move || Ok(reg.resolve_json(&v)?)).await?;
    let out = conforming(MessageKind::CapabilityResponse, &resp)?;
    let ttl = resp.ttl.unwrap_or(st.registry.config().ttl_seconds);
    let mut r = Json(out).into_response();
    let h = r.headers_mut();
    h.insert(TTL_HEADER, HeaderValue::from(ttl));
    h.insert(
        header::CACHE_CONTROL,
        HeaderValue::from_str(&format!("max-age={ttl}")).expect("ascii header"),
    );
    Ok(r)
}

async fn renew(State(st): State<AppState>, client: ClientId, body: Bytes) -> Result<Response, ApiError> {
    let v = parse_json(&body)?;
    st.admit(&client, None)?;
    let reg = st.registry.clone();
    let resp = blocking(move || Ok(reg.renew_json(&v)?)).await?;
    st.mirror_crl();
    Ok(Json(conforming(MessageKind::RenewalResponse, &resp)?).into_response())
}

async fn deregister(State(st): State<AppState>, client: ClientId, body: Bytes) -> Result<Response, ApiError> {
    let req: DeregistrationRequest = parse_as(&body)?;
    st.admit(&client, None)?;
    let reg = st.registry.clone();
    let ack = blocking(move || Ok(reg.deregister(&req)?)).await?;
    st.mirror_crl();
    Ok(Json(ack).into_response())
}

async fn revoke(State(st): State<AppState>, client: ClientId, body: Bytes) -> Result<Response, ApiError> {
    let req: RevocationRequest = parse_as(&body)?;
    st.admit(&client, None)?;
    let reg = st.registry.clone();
    let ack = blocking(move || Ok(reg.revoke(&req)?)).await?;
    st.mirror_crl();
    Ok(Json(ack).into_response())
}

async fn challenge(State(st): State<AppState>, client: ClientId, body: Bytes) -> Result<Response, ApiError> {
    let req: ChallengeRequest = parse_as(&body)?;
    st.admit(&client, None)?;
    let reg = st.registry.clone();
    let probe = st.probe.clone();
    let outcome = blocking(move || match reg.challenge(&req, probe.as_ref()) {
        Ok(o) => Ok(o),
        Err(RegistryError::ChallengeTimeout(o)) => {
            let mut err = ApiError::from(RegistryError::ChallengeTimeout(o.clone()));
            err.body.details = vec![serde_json::to_string(&o).unwrap_or_default()];
            Err(err)
        }
        Err(e) => Err(e.into()),
    })
    .await?;
    Ok(Json(outcome).into_response())
}

async fn crl(State(st): State<AppState>, client: ClientId) -> Result<Response, ApiError> {
    st.admit(&client, None)?;
    let reg = st.registry.clone();
    let list = blocking(move || Ok(reg.crl()?)).await?;
    let pem = list.to_pem();
    if let Some(path) = &st.crl_file {
        let _ = std::fs::write(path, &pem);
    }
    let mut r = pem.into_response();
    let h = r.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/x-pem-file"));
    h.insert(
        NEXT_UPDATE_HEADER,
        HeaderValue::from_str(&rfc3339(list.next_update())).expect("ascii header"),
    );
    Ok(r)
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    store: String,
    ca: String,
    #[serde(rename = "auditHead")]
    audit_head: u64,
}

async fn healthz(State(st): State<AppState>) -> Response {
    let reg = st.registry.clone();
    let health = tokio::task::spawn_blocking(move || {
        let store = reg
            .store()
            .meta("audit_head")
            .map(|_| "ok".to_string())
            .unwrap_or_else(|e| e.to_string());
        let ca = reg.crl().map(|_| "ok".to_string()).unwrap_or_else(|e| e.to_string());
        let head = reg.verify_audit().map(|h| h.seq);
        let healthy = store == "ok" && ca == "ok" && head.is_ok();
        Health {
            status: if healthy { "ok" } else { "degraded" },
            store,
            ca,
            audit_head: head.unwrap_or(0),
        }
    })
    .await;
    match health {
        Ok(h) if h.status == "ok" => Json(h).into_response(),
        Ok(h) => (StatusCode::SERVICE_UNAVAILABLE, Json(h)).into_response(),
        Err(e) => ApiError::internal(e.to_string()).into_response(),
    }
}

async fn discovery(
    State(st): State<AppState>,
    client: ClientId,
    Path(uuid): Path<String>,
) -> Result<Response, ApiError> {
    st.admit(&client, None)?;
    let id = uuid::Uuid::parse_str(&uuid).map_err(|_| ApiError::from(RegistryError::UnknownAgent(uuid.clone())))?;
    let reg = st.registry.clone();
    let doc = blocking(move || Ok(reg.discovery_document(&id)?)).await?;
    Ok(Json(doc).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/register", post(register))
        .route("/v1/resolve", post(resolve))
        .route("/v1/renew", post(renew))
        .route("/v1/deregister", post(deregister))
        .route("/v1/revoke", post(revoke))
        .route("/v1/challenge", post(challenge))
        .route("/v1/crl", get(crl))
        .route("/v1/healthz", get(healthz))
        .route("/v1/agents/{uuid}", get(discovery))
        .with_state(state)
}

/// TLS material for the listener: DER certificate chain and PKCS#8 key.
pub struct TlsMaterial {
    pub certs: Vec<Vec<u8>>,
    pub key: Vec<u8>,
}

/// Installs the process-wide rustls crypto provider. Safe to call twice.
pub fn install_crypto_provider() {
    let _ = rustls::crypto::ring::default_provider().install_default();
}

/// Serves `app` on an already bound listener until `shutdown` resolves,
/// then drains in-flight requests. Plain HTTP when `tls` is `None`.
pub async fn serve_on(
    listener: std::net::TcpListener,
    app: Router,
    tls: Option<TlsMaterial>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    listener
        .set_nonblocking(true)
        .map_err(|e| ServiceError::Io(e.to_string()))?;
    let make = app.into_make_service_with_connect_info::<SocketAddr>();
    match tls {
        Some(tls) => {
            install_crypto_provider();
            let config = axum_server::tls_rustls::RustlsConfig::from_der(tls.certs, tls.key)
                .await
                .map_err(|e| ServiceError::Tls(e.to_string()))?;
            let handle = axum_server::Handle::new();
            let h = handle.clone();
            tokio::spawn(async move {
                shutdown.await;
                h.graceful_shutdown(Some(Duration::from_secs(10)));
            });
            axum_server::from_tcp_rustls(listener, config)
                .handle(handle)
                .serve(make)
                .await
                .map_err(|e| ServiceError::Io(e.to_string()))
        }
        None => {
            let listener = tokio::net::TcpListener::from_std(listener).map_err(|e| ServiceError::Io(e.to_string()))?;
            axum::serve(listener, make)
                .with_graceful_shutdown(shutdown)
                .await
                .map_err(|e| ServiceError::Io(e.to_string()))
        }
    }
}
