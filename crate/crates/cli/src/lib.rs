//! Operator surface for `convsearch-core`: batch commands, the HTTP session
//! service and a stub model server for testing the HTTP plugins.

pub mod commands;
pub mod service;
pub mod stub;

use axum::Router;
use tokio::net::TcpListener;

/// Serves `app` on `listener` until Ctrl-C.
pub async fn serve(listener: TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
