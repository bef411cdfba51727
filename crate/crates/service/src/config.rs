//! Service configuration: an optional TOML file, then `SCQ_*` environment
//! overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Malformed(#[from] toml::de::Error),
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
    #[error("agent_token must be set (config file or SCQ_AGENT_TOKEN)")]
    MissingAgentToken,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Device document; the built-in `scq10` table when absent.
    pub device_spec: Option<PathBuf>,
    pub agent_token: Option<String>,
    /// When set, `/api/*` requires this bearer token.
    pub user_token: Option<String>,
    pub lease_seconds: u64,
    /// Upper bound on the `wait` of an agent long-poll.
    pub max_wait_seconds: u64,
    pub data_dir: PathBuf,
    /// Directory served at `/` (the browser front end).
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            device_spec: None,
            agent_token: None,
            user_token: None,
            lease_seconds: 300,
            max_wait_seconds: 60,
            data_dir: PathBuf::from("scq-data"),
            static_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` if given, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml_str(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Overrides from `SCQ_BIND`, `SCQ_PORT`, `SCQ_DEVICE_SPEC`,
    /// `SCQ_AGENT_TOKEN`, `SCQ_USER_TOKEN`, `SCQ_LEASE_SECONDS`,
    /// `SCQ_DATA_DIR` and `SCQ_STATIC_DIR`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(name: &'static str, v: &str) -> Result<T, ConfigError> {
            v.parse().map_err(|_| ConfigError::Env {
                name,
                message: format!("not a valid number: {v:?}"),
            })
        }
        if let Some(v) = get("SCQ_BIND") {
            self.bind = v;
        }
        if let Some(v) = get("SCQ_PORT") {
            self.port = num("SCQ_PORT", &v)?;
        }
        if let Some(v) = get("SCQ_DEVICE_SPEC") {
            self.device_spec = Some(v.into());
        }
        if let Some(v) = get("SCQ_AGENT_TOKEN") {
            self.agent_token = Some(v);
        }
        if let Some(v) = get("SCQ_USER_TOKEN") {
            self.user_token = Some(v);
        }
        if let Some(v) = get("SCQ_LEASE_SECONDS") {
            self.lease_seconds = num("SCQ_LEASE_SECONDS", &v)?;
        }
        if let Some(v) = get("SCQ_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = get("SCQ_STATIC_DIR") {
            self.static_dir = Some(v.into());
        }
        Ok(())
    }

    pub fn agent_token(&self) -> Result<&str, ConfigError> {
        self.agent_token
            .as_deref()
            .filter(|t| !t.is_empty())
            .ok_or(ConfigError::MissingAgentToken)
    }
}
