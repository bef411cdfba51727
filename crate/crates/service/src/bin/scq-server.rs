use std::path::PathBuf;

use clap::Parser;
use scq_service::{serve, ServiceConfig};

/// ScQ task service: syntax checking, task queue, results and agent protocol.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// TOML config file; SCQ_* environment variables override it.
    #[arg(long, env = "SCQ_CONFIG")]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();
    let config = match ServiceConfig::load(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let addr = format!("{}:{}", config.bind, config.port);
    let listener = match tokio::net::TcpListener::bind(&addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {addr}: {e}");
            std::process::exit(1);
        }
    };
    tracing::info!("listening on {addr}");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = serve(listener, &config, shutdown).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
