//! Task service of the emulator: the web server that checks and queues
//! submissions, and the agent protocol through which the lab-side worker
//! pulls tasks and reports results.

pub mod agent;
pub mod api;
pub mod config;
pub mod store;

use std::sync::Arc;

use scq_core::DeviceSpec;
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::{router, AppState};
pub use config::ServiceConfig;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Device(#[from] scq_core::device::DeviceError),
    #[error(transparent)]
    Store(#[from] store::StoreError),
    #[error("network: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the store and device named by the config.
pub fn build_state(config: &ServiceConfig) -> Result<Arc<AppState>, ServeError> {
    let token = config.agent_token()?.to_string();
    let device = match &config.device_spec {
        Some(p) => DeviceSpec::load(p)?,
        None => DeviceSpec::scq10(),
    };
    let store = store::Store::open(&config.data_dir)?;
    Ok(Arc::new(AppState::new(store, device, config, token)))
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    config: &ServiceConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let state = build_state(config)?;
    let app = router(state, config.static_dir.as_deref());
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}
