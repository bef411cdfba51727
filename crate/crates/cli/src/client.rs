//! Blocking HTTP client for the public API.

use std::thread::sleep;
use std::time::Duration;

use reqwest::blocking::{Client as Http, RequestBuilder, Response};
use reqwest::StatusCode;
use scq_core::campaign::Runner;
use scq_core::protocol::{ErrorBody, SubmitAccepted, SubmitRejected, TaskStatus, TaskView};
use scq_core::qpt::BoxError;
use scq_core::task::{Rejection, ResultDocument, TaskSpec};
use scq_core::DeviceSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("rejected by the syntax check")]
    Rejected(Vec<Rejection>),
    #[error("network: {0}")]
    Network(String),
    #[error("task {id} is {status:?}")]
    Pending { id: String, status: TaskStatus },
    #[error("task {id} failed: {error}")]
    Failed { id: String, error: String },
    #[error("unknown task {0}")]
    NotFound(String),
    #[error("server answered {status}: {message}")]
    Server { status: u16, message: String },
}

impl From<reqwest::Error> for ClientError {
    fn from(e: reqwest::Error) -> Self {
        ClientError::Network(e.to_string())
    }
}

pub struct Client {
    http: Http,
    base: String,
    token: Option<String>,
    pub poll: Duration,
}

fn server_error(resp: Response) -> ClientError {
    let status = resp.status().as_u16();
    let message = resp
        .json::<ErrorBody>()
        .map(|b| b.error)
        .unwrap_or_else(|_| "unexpected response".into());
    ClientError::Server { status, message }
}

impl Client {
    pub fn new(base: &str, token: Option<String>) -> Self {
        Self {
            http: Http::new(),
            base: base.trim_end_matches('/').to_string(),
            token,
            poll: Duration::from_millis(200),
        }
    }

    fn auth(&self, req: RequestBuilder) -> RequestBuilder {
        match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }

    /// The device document the service runs against.
    pub fn device(&self) -> Result<DeviceSpec, ClientError> {
        let resp = self.auth(self.http.get(format!("{}/api/device", self.base))).send()?;
        match resp.status() {
            StatusCode::OK => Ok(resp.json()?),
            _ => Err(server_error(resp)),
        }
    }

    pub fn submit(&self, spec: &TaskSpec) -> Result<String, ClientError> {
        let resp = self.auth(self.http.post(format!("{}/api/tasks", self.base))).json(spec).send()?;
        match resp.status() {
            StatusCode::ACCEPTED => Ok(resp.json::<SubmitAccepted>()?.id),
            StatusCode::UNPROCESSABLE_ENTITY => Err(ClientError::Rejected(resp.json::<SubmitRejected>()?.errors)),
            _ => Err(server_error(resp)),
        }
    }

    pub fn status(&self, id: &str) -> Result<TaskView, ClientError> {
        let resp = self.auth(self.http.get(format!("{}/api/tasks/{id}", self.base))).send()?;
        match resp.status() {
            StatusCode::OK => Ok(resp.json()?),
            StatusCode::NOT_FOUND => Err(ClientError::NotFound(id.to_string())),
            _ => Err(server_error(resp)),
        }
    }

    fn fetch(&self, id: &str, suffix: &str) -> Result<Response, ClientError> {
        let resp = self.auth(self.http.get(format!("{}/api/tasks/{id}/{suffix}", self.base))).send()?;
        match resp.status() {
            StatusCode::OK => Ok(resp),
            StatusCode::NOT_FOUND => Err(ClientError::NotFound(id.to_string())),
            StatusCode::CONFLICT => {
                let body: ErrorBody = resp.json()?;
                match body.status {
                    Some(TaskStatus::Failed) => Err(ClientError::Failed {
                        id: id.to_string(),
                        error: body.error,
                    }),
                    Some(status) => Err(ClientError::Pending { id: id.to_string(), status }),
                    None => Err(ClientError::Server { status: 409, message: body.error }),
                }
            }
            _ => Err(server_error(resp)),
        }
    }

    pub fn result(&self, id: &str) -> Result<ResultDocument, ClientError> {
        Ok(self.fetch(id, "result")?.json()?)
    }

    pub fn result_csv(&self, id: &str) -> Result<String, ClientError> {
        Ok(self.fetch(id, "result.csv")?.text()?)
    }

    /// Polls until the task is terminal and returns its result.
    pub fn wait(&self, id: &str) -> Result<ResultDocument, ClientError> {
        let mut delay = self.poll;
        loop {
            let view = self.status(id)?;
            match view.status {
                TaskStatus::Done => return self.result(id),
                TaskStatus::Failed => {
                    return Err(ClientError::Failed {
                        id: id.to_string(),
                        error: view.error.unwrap_or_default(),
                    })
                }
                _ => {
                    sleep(delay);
                    delay = (delay * 2).min(Duration::from_secs(2));
                }
            }
        }
    }
}

/// Runs task batches on the service: submits everything first, then
/// collects results in submission order.
pub struct RemoteRunner<'a> {
    pub client: &'a Client,
}

impl Runner for RemoteRunner<'_> {
    fn run_tasks(&mut self, specs: &[TaskSpec]) -> Result<Vec<ResultDocument>, BoxError> {
        let ids = specs
            .iter()
            .map(|s| self.client.submit(s))
            .collect::<Result<Vec<_>, _>>()?;
        ids.iter()
            .map(|id| self.client.wait(id).map_err(BoxError::from))
            .collect()
    }
}
