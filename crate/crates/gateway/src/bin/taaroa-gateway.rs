use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use taaroa_core::config::Config;
use taaroa_gateway::{router, GatewayConfig};
use tracing::{error, info};

#[derive(Parser)]
#[command(name = "taaroa-gateway", version, about = "HTTP/JSON gateway for TAAROA")]
struct Args {
    /// KEY=value configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .init();
    let args = Args::parse();
    let cfg = match Config::from_env(args.config.as_deref()).and_then(|c| GatewayConfig::from_config(&c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("taaroa-gateway: {e}");
            return ExitCode::FAILURE;
        }
    };
    let listener = match tokio::net::TcpListener::bind(("0.0.0.0", cfg.port)).await {
        Ok(l) => l,
        Err(e) => {
            error!("cannot listen on port {}: {e}", cfg.port);
            return ExitCode::FAILURE;
        }
    };
    info!(port = cfg.port, is = %cfg.is_addr, sc = %cfg.sc_addr, "gateway listening");
    let served = axum::serve(listener, router(&cfg))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    match served {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
