#![allow(dead_code)]

use std::path::Path;
use std::time::Duration;

use scq_core::circuit::{append_parity_stage, build_ghz, ScanSpec};
use scq_core::protocol::{SubmitAccepted, TaskStatus, TaskView};
use scq_core::qasm;
use scq_core::task::{Backend, TaskSpec};
use scq_service::ServiceConfig;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub const AGENT_TOKEN: &str = "agent-secret";

pub struct Server {
    pub base: String,
    stop: Option<oneshot::Sender<()>>,
    join: Option<JoinHandle<()>>,
}

impl Server {
    pub async fn start(data_dir: &Path, tweak: impl FnOnce(&mut ServiceConfig)) -> Self {
        let mut config = ServiceConfig {
            agent_token: Some(AGENT_TOKEN.into()),
            data_dir: data_dir.to_path_buf(),
            ..ServiceConfig::default()
        };
        tweak(&mut config);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel::<()>();
        let join = tokio::spawn(async move {
            scq_service::serve(listener, &config, async {
                let _ = rx.await;
            })
            .await
            .expect("server failed");
        });
        Self {
            base,
            stop: Some(tx),
            join: Some(join),
        }
    }

    /// Graceful shutdown; returns once the store is released.
    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(j) = self.join.take() {
            let _ = tokio::time::timeout(Duration::from_secs(10), j).await;
        }
    }
}

pub fn ghz_scan_source(n: usize, points: usize) -> String {
    let ghz = build_ghz(n, 0, 10).unwrap();
    let scan = append_parity_stage(&ghz, ScanSpec::linspace(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, points)).unwrap();
    qasm::serialize(&scan)
}

pub fn ghz_source(n: usize) -> String {
    qasm::serialize(&build_ghz(n, 0, 10).unwrap())
}

pub fn spec(source: String, shots: u64, seed: u64) -> TaskSpec {
    TaskSpec {
        source,
        shots,
        backend: Backend::Calibrated,
        apply_correction: true,
        seed: Some(seed),
    }
}

pub async fn submit(http: &reqwest::Client, base: &str, spec: &TaskSpec) -> String {
    let resp = http.post(format!("{base}/api/tasks")).json(spec).send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 202);
    let body: SubmitAccepted = resp.json().await.unwrap();
    assert_eq!(body.status, TaskStatus::Queued);
    body.id
}

pub async fn status(http: &reqwest::Client, base: &str, id: &str) -> TaskView {
    http.get(format!("{base}/api/tasks/{id}"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap()
}
