//! JSON bodies of the HTTP API, shared by the service, the agent and clients.

use serde::{Deserialize, Serialize};

use crate::task::{Backend, Rejection, ResultDocument, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Done | TaskStatus::Failed)
    }
}

/// `202` body of `POST /api/tasks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitAccepted {
    pub id: String,
    pub status: TaskStatus,
}

/// `422` body of `POST /api/tasks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitRejected {
    pub errors: Vec<Rejection>,
}

/// Body of `GET /api/tasks/{id}`. Timestamps are Unix milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub id: String,
    pub status: TaskStatus,
    pub shots: u64,
    pub backend: Backend,
    pub apply_correction: bool,
    pub seed: u64,
    pub submitted_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    pub result_ref: Option<String>,
    pub error: Option<String>,
}

/// Generic error body; `status` is set for "not ready" answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<TaskStatus>,
}

/// `200` body of `GET /agent/tasks/next`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTask {
    pub task_id: String,
    pub lease_id: String,
    pub lease_expires_at: u64,
    /// Canonical assembly text with every field resolved (the seed is set).
    pub spec: TaskSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Done(ResultDocument),
    Failed { error: String },
}

/// Body of `POST /agent/tasks/{id}/result`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub lease_id: String,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportAck {
    pub id: String,
    pub status: TaskStatus,
}
