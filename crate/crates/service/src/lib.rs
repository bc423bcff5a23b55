//! Network face of the Agent Name Service: the HTTPS registry service, a
//! blocking client, an HTTP capability probe and the `ans` command line.
//!
//! Most callers want [`spawn`] to run a registry in-process, and
//! [`client::AnsClient`] to talk to one.

pub mod cli;
pub mod client;
pub mod config;
pub mod home;
pub mod http;
pub mod probe;
pub mod ratelimit;

use std::net::SocketAddr;
use std::thread::JoinHandle;

use thiserror::Error;
use tokio::sync::oneshot;

use ans_core::pki::PkiError;
use ans_core::registry::{AuditError, StoreError};
use ans_core::RegistryError;

pub use client::{AnsClient, ClientError};
pub use config::ServiceConfig;
pub use http::{router, AppState, TlsMaterial};
pub use ratelimit::{RateLimitConfig, RateLimiter};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("tls: {0}")]
    Tls(String),
    #[error(transparent)]
    Pki(#[from] PkiError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// A registry service running on a background thread.
///
/// Dropping it shuts the listener down and waits for in-flight requests.
pub struct RunningService {
    addr: SocketAddr,
    tls: bool,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<Result<(), ServiceError>>>,
}

impl RunningService {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL for clients, e.g. `https://127.0.0.1:40123`.
    pub fn url(&self) -> String {
        let scheme = if self.tls { "https" } else { "http" };
        format!("{scheme}://{}", self.addr)
    }

    /// Stops accepting connections and drains in-flight requests.
    pub fn shutdown(mut self) -> Result<(), ServiceError> {
        self.stop_inner()
    }

    fn stop_inner(&mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .map_err(|_| ServiceError::Io("server thread panicked".into()))?,
            None => Ok(()),
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        let _ = self.stop_inner();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves the registry API on
/// its own runtime.
pub fn spawn(state: AppState, addr: SocketAddr, tls: Option<TlsMaterial>) -> Result<RunningService, ServiceError> {
    let listener = std::net::TcpListener::bind(addr).map_err(|e| ServiceError::Io(format!("{addr}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;
    let is_tls = tls.is_some();
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state);
    let thread = std::thread::Builder::new()
        .name("ans-service".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| ServiceError::Io(e.to_string()))?;
            rt.block_on(http::serve_on(listener, app, tls, async move {
                let _ = rx.await;
            }))
        })
        .map_err(|e| ServiceError::Io(e.to_string()))?;
    Ok(RunningService {
        addr,
        tls: is_tls,
        stop: Some(tx),
        thread: Some(thread),
    })
}
