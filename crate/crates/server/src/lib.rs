//! WebSocket bridge exposing live retargeting sessions.
//!
//! `GET /session/{id}` upgrades to a WebSocket speaking the JSON schema in
//! [`protocol`].

pub mod hub;
pub mod protocol;
mod ws;

use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::WebSocketUpgrade;
use axum::extract::{Path, State};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;

pub use hub::{Hub, LiveSession};
pub use protocol::{ClientMessage, Lifecycle, ServerMessage, SessionDescriptor, Snapshot, PROTOCOL_VERSION};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Default snapshot rate, Hz.
    pub broadcast_rate: f64,
    /// How long a session outlives its last client.
    pub linger: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { broadcast_rate: 50.0, linger: ws::DEFAULT_LINGER }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub hub: Arc<Hub>,
    pub config: ServerConfig,
}

pub fn router(state: AppState) -> Router {
    Router::new().route("/session/{id}", get(upgrade)).with_state(state)
}

async fn upgrade(ws: WebSocketUpgrade, Path(id): Path<String>, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| ws::handle(socket, app, id))
}

/// Serve until the listener fails. Sessions are closed on return.
pub async fn serve(listener: TcpListener, config: ServerConfig) -> std::io::Result<()> {
    let hub = Arc::new(Hub::default());
    let result = axum::serve(listener, router(AppState { hub: Arc::clone(&hub), config })).await;
    tokio::task::spawn_blocking(move || hub.close_all()).await.ok();
    result
}
