//! Read-only HTTP service over an immutable graph snapshot.
//!
//! Endpoints live under `/api`; anything else falls through to an optional
//! static directory holding the UI bundle.

mod layout;
mod routes;
mod snapshot;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::Router;
use tower_http::services::ServeDir;
use txgraph_core::models::ModelError;

pub use layout::{build_layout, LayoutMode, ProjectionLayout};
pub use routes::{api_router, ApiError, NodeView, SliceView, StepStats, TxDetail};
pub use snapshot::{transfer_matrix, Snapshot};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("layout: {0}")]
    Layout(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

/// API routes plus static hosting of `static_dir` at `/`.
pub fn router(snapshot: Arc<Snapshot>, static_dir: Option<&Path>) -> Router {
    let api = api_router(snapshot);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process receives Ctrl-C.
pub async fn serve(snapshot: Arc<Snapshot>, addr: SocketAddr, static_dir: Option<PathBuf>) -> Result<(), ServerError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServerError::Bind { addr, source })?;
    let local = listener.local_addr().map_err(|source| ServerError::Bind { addr, source })?;
    log::info!("listening on http://{local}");
    let app = router(snapshot, static_dir.as_deref());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| ServerError::Bind { addr, source })
}
