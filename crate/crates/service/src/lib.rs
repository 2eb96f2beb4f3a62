//! Game backend: players open a session, click points of a hidden
//! benchmark function, and finish to see their regret. Finished games are
//! appended to a trace store in the line format of
//! [`activesearch_core::gamestore`].

pub mod api;
mod error;
pub mod sessions;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

pub use error::ServiceError;
pub use sessions::{GameService, ServiceConfig};

/// Serves the API on `addr` until the process is stopped, expiring idle
/// sessions in the background.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let service = Arc::new(GameService::new(config).map_err(std::io::Error::other)?);
    let sweeper = service.clone();
    let period = (service.config().session_timeout / 4).max(Duration::from_secs(1));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.sweep();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, api::router(service)).await
}
