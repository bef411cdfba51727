use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use scq_core::DeviceSpec;
use scq_service::agent::{run_loop, AgentClient};

/// Lab agent: pulls tasks from the service, runs them on the simulated
/// processor and reports results.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long, env = "SCQ_SERVER_URL", default_value = "http://127.0.0.1:8080")]
    server: String,
    #[arg(long, env = "SCQ_AGENT_TOKEN")]
    token: String,
    /// Device document; the built-in scq10 table when absent.
    #[arg(long, env = "SCQ_DEVICE_SPEC")]
    device: Option<PathBuf>,
    /// Long-poll duration in seconds.
    #[arg(long, default_value_t = 20)]
    wait: u64,
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();
    let device = match &args.device {
        Some(p) => DeviceSpec::load(p).unwrap_or_else(|e| {
            eprintln!("error: {e}");
            std::process::exit(2);
        }),
        None => DeviceSpec::scq10(),
    };
    tracing::info!("agent polling {}", args.server);
    let client = AgentClient::new(args.server, args.token);
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    run_loop(client, device, Duration::from_secs(args.wait), shutdown).await;
}
