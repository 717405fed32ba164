//! Session service for interactive episodes.
//!
//! Requests and responses are HTTP+JSON. State ticks, operator commands
//! and their acks travel over one WebSocket per session. Each session
//! advances on its own paced task and saves its record to the run store
//! when it ends.

mod app;
pub mod protocol;
pub mod session;

pub use app::{ApiError, AppState, ServiceConfig};
pub use protocol::WIRE_VERSION;

/// Binds `addr` and serves until the task is cancelled.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, state.router()).await
}
