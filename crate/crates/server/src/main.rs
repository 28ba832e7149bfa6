use std::net::SocketAddr;
use std::time::Duration;

use clap::Parser;
use retarget_server::{serve, ServerConfig};

#[derive(Debug, Parser)]
#[command(name = "retarget-server", version, about = "WebSocket bridge for live retargeting sessions")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Default snapshot rate, Hz.
    #[arg(long, default_value_t = 50.0)]
    broadcast_rate: f64,
    /// Seconds a session outlives its last client.
    #[arg(long, default_value_t = 30.0)]
    linger: f64,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    eprintln!("listening on ws://{}/session/{{id}}", listener.local_addr()?);
    let config = ServerConfig { broadcast_rate: args.broadcast_rate, linger: Duration::from_secs_f64(args.linger.max(0.0)) };
    serve(listener, config).await
}
