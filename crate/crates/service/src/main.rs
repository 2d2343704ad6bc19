use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;

use nsp_service::{router, AppState, ServiceConfig};

/// Serve roster sessions over HTTP.
#[derive(Debug, Parser)]
#[command(name = "nsp-service", version)]
struct Args {
    #[arg(long, env = "NSP_SERVICE_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for persisted sessions. Omit to keep sessions in memory.
    #[arg(long, env = "NSP_SERVICE_STORE")]
    store: Option<PathBuf>,
    /// Static bearer token. Omit to disable authentication.
    #[arg(long, env = "NSP_SERVICE_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[arg(long, default_value_t = 256)]
    event_capacity: usize,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let args = Args::parse();
    let state = AppState::new(ServiceConfig {
        token: args.token,
        store_dir: args.store,
        event_capacity: args.event_capacity,
    })?;
    log::info!("recovered {} sessions", state.session_count());
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
