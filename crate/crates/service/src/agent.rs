//! The lab-side worker: long-polls the service, runs tasks on the simulated
//! processor (including readout correction) and reports the results.

use std::time::Duration;

use reqwest::StatusCode;
use scq_core::protocol::{AgentReport, AgentTask, ErrorBody, Outcome, ReportAck};
use scq_core::task;
use scq_core::DeviceSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server answered {status}: {message}")]
    Server { status: u16, message: String },
}

#[derive(Clone)]
pub struct AgentClient {
    http: reqwest::Client,
    base: String,
    token: String,
}

async fn server_error(resp: reqwest::Response) -> AgentError {
    let status = resp.status().as_u16();
    let message = match resp.json::<ErrorBody>().await {
        Ok(b) => b.error,
        Err(_) => "unexpected response".into(),
    };
    AgentError::Server { status, message }
}

impl AgentClient {
    pub fn new(base: impl Into<String>, token: impl Into<String>) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_string(),
            token: token.into(),
        }
    }

    /// Long-polls for up to `wait`; `None` when no task arrived.
    pub async fn next(&self, wait: Duration) -> Result<Option<AgentTask>, AgentError> {
        let resp = self
            .http
            .get(format!("{}/agent/tasks/next?wait={}", self.base, wait.as_secs_f64()))
            .bearer_auth(&self.token)
            .timeout(wait + Duration::from_secs(30))
            .send()
            .await?;
        match resp.status() {
            StatusCode::OK => Ok(Some(resp.json().await?)),
            StatusCode::NO_CONTENT => Ok(None),
            _ => Err(server_error(resp).await),
        }
    }

    pub async fn report(&self, task_id: &str, report: &AgentReport) -> Result<ReportAck, AgentError> {
        let resp = self
            .http
            .post(format!("{}/agent/tasks/{task_id}/result", self.base))
            .bearer_auth(&self.token)
            .json(report)
            .send()
            .await?;
        if resp.status().is_success() {
            Ok(resp.json().await?)
        } else {
            Err(server_error(resp).await)
        }
    }

    /// Reports with a few retries on transport errors. Retrying is safe:
    /// the service treats an identical repeated report as a no-op.
    pub async fn report_with_retry(&self, task_id: &str, report: &AgentReport) -> Result<ReportAck, AgentError> {
        let mut delay = Duration::from_millis(200);
        for _ in 0..4 {
            match self.report(task_id, report).await {
                Err(AgentError::Http(e)) => {
                    tracing::warn!("report for {task_id} failed ({e}); retrying");
                    tokio::time::sleep(delay).await;
                    delay *= 2;
                }
                other => return other,
            }
        }
        self.report(task_id, report).await
    }
}

/// Runs one leased task and builds the report.
pub fn process(task: &AgentTask, device: &DeviceSpec) -> AgentReport {
    let seed = task.spec.seed.unwrap_or_default();
    let outcome = match task::execute(&task.task_id, &task.spec, device, seed) {
        Ok(doc) => Outcome::Done(doc),
        Err(e) => Outcome::Failed { error: e.to_string() },
    };
    AgentReport {
        lease_id: task.lease_id.clone(),
        outcome,
    }
}

/// Polls once and, if a task arrives, executes and reports it.
pub async fn run_once(
    client: &AgentClient,
    device: &DeviceSpec,
    wait: Duration,
) -> Result<Option<ReportAck>, AgentError> {
    let Some(task) = client.next(wait).await? else {
        return Ok(None);
    };
    tracing::info!(task = %task.task_id, "executing");
    let device = device.clone();
    let t = task.clone();
    let report = tokio::task::spawn_blocking(move || process(&t, &device))
        .await
        .unwrap_or_else(|e| AgentReport {
            lease_id: task.lease_id.clone(),
            outcome: Outcome::Failed {
                error: format!("worker panicked: {e}"),
            },
        });
    client.report_with_retry(&task.task_id, &report).await.map(Some)
}

/// Serves tasks until `shutdown` resolves.
pub async fn run_loop(
    client: AgentClient,
    device: DeviceSpec,
    wait: Duration,
    shutdown: impl std::future::Future<Output = ()>,
) {
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            _ = &mut shutdown => break,
            r = run_once(&client, &device, wait) => {
                if let Err(e) = r {
                    tracing::warn!("agent cycle failed: {e}");
                    tokio::time::sleep(Duration::from_secs(1)).await;
                }
            }
        }
    }
}
