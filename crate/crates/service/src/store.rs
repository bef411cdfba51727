//! Durable task store: an append-only JSON-lines write-ahead log replayed on
//! open, plus one file per result.
//!
//! Every state change is appended and fsynced before it is acknowledged. A
//! torn final line (crash mid-append) is discarded on replay; results are
//! written to a temporary file, synced and renamed into place before the
//! `finished` event that references them.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use scq_core::protocol::{Outcome, ReportAck, TaskStatus, TaskView};
use scq_core::rng::splitmix64;
use scq_core::task::{ResultDocument, TaskSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const WAL_FILE: &str = "tasks.wal";
const RESULTS_DIR: &str = "results";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage I/O: {0}")]
    Io(#[from] io::Error),
    #[error("log line {line} is corrupt: {message}")]
    Corrupt { line: usize, message: String },
    #[error("unknown task {0}")]
    NotFound(String),
    #[error("task {id} is {status:?}; lease {lease_id} does not hold it")]
    LeaseMismatch {
        id: String,
        status: TaskStatus,
        lease_id: String,
    },
    #[error("task {0} already finished with a different result")]
    Conflict(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lease {
    pub lease_id: String,
    pub expires_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    /// Submission order; FIFO key.
    pub seq: u64,
    /// Canonical source with the seed resolved.
    pub spec: TaskSpec,
    pub status: TaskStatus,
    pub submitted_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    pub result_ref: Option<String>,
    pub error: Option<String>,
    pub lease: Option<Lease>,
    /// Lease that finished the task; makes duplicate reports idempotent.
    #[serde(default)]
    pub finished_by: Option<String>,
}

impl TaskRecord {
    pub fn view(&self) -> TaskView {
        TaskView {
            id: self.id.clone(),
            status: self.status,
            shots: self.spec.shots,
            backend: self.spec.backend,
            apply_correction: self.spec.apply_correction,
            seed: self.spec.seed.unwrap_or_default(),
            submitted_at: self.submitted_at,
            started_at: self.started_at,
            finished_at: self.finished_at,
            result_ref: self.result_ref.clone(),
            error: self.error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum Event {
    Submitted {
        record: TaskRecord,
    },
    Leased {
        id: String,
        lease_id: String,
        at: u64,
        expires_at: u64,
    },
    Requeued {
        id: String,
        at: u64,
    },
    Finished {
        id: String,
        lease_id: String,
        at: u64,
        status: TaskStatus,
        result_ref: Option<String>,
        error: Option<String>,
    },
}

/// Default seed of a task: a 64-bit mix of its id.
pub fn seed_from_id(id: &str) -> u64 {
    id.bytes()
        .fold(0x5C0_u64, |h, b| splitmix64(h ^ u64::from(b)))
}

pub struct Store {
    dir: PathBuf,
    wal: File,
    tasks: HashMap<String, TaskRecord>,
    queued: BTreeMap<u64, String>,
    next_seq: u64,
}

impl Store {
    /// Opens (creating if needed) the store in `dir` and replays its log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join(RESULTS_DIR))?;
        let path = dir.join(WAL_FILE);
        let mut wal = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut store = Self {
            dir,
            wal: wal.try_clone()?,
            tasks: HashMap::new(),
            queued: BTreeMap::new(),
            next_seq: 0,
        };
        let valid_len = store.replay(&mut wal)?;
        if valid_len < wal.metadata()?.len() {
            // Drop a torn tail so the next append starts on a fresh line.
            wal.set_len(valid_len)?;
            wal.sync_all()?;
        }
        Ok(store)
    }

    fn replay(&mut self, wal: &mut File) -> Result<u64, StoreError> {
        wal.seek(SeekFrom::Start(0))?;
        let mut reader = BufReader::new(wal);
        let mut valid = 0u64;
        let mut line_no = 0;
        let mut buf = Vec::new();
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let complete = buf.last() == Some(&b'\n');
            match serde_json::from_slice::<Event>(&buf) {
                Ok(ev) if complete => {
                    self.apply(ev);
                    valid += n as u64;
                }
                Ok(_) => break,
                Err(e) => {
                    // Only a torn final line is tolerated.
                    let mut rest = Vec::new();
                    reader.read_to_end(&mut rest)?;
                    if complete && !rest.iter().all(u8::is_ascii_whitespace) {
                        return Err(StoreError::Corrupt {
                            line: line_no,
                            message: e.to_string(),
                        });
                    }
                    break;
                }
            }
        }
        Ok(valid)
    }

    fn apply(&mut self, ev: Event) {
        match ev {
            Event::Submitted { record } => {
                self.next_seq = self.next_seq.max(record.seq + 1);
                if record.status == TaskStatus::Queued {
                    self.queued.insert(record.seq, record.id.clone());
                }
                self.tasks.insert(record.id.clone(), record);
            }
            Event::Leased {
                id,
                lease_id,
                at,
                expires_at,
            } => {
                if let Some(t) = self.tasks.get_mut(&id) {
                    self.queued.remove(&t.seq);
                    t.status = TaskStatus::Running;
                    t.started_at = Some(at);
                    t.lease = Some(Lease {
                        lease_id,
                        expires_at,
                    });
                }
            }
            Event::Requeued { id, .. } => {
                if let Some(t) = self.tasks.get_mut(&id) {
                    t.status = TaskStatus::Queued;
                    t.lease = None;
                    t.started_at = None;
                    self.queued.insert(t.seq, id);
                }
            }
            Event::Finished {
                id,
                lease_id,
                at,
                status,
                result_ref,
                error,
            } => {
                if let Some(t) = self.tasks.get_mut(&id) {
                    self.queued.remove(&t.seq);
                    t.status = status;
                    t.finished_at = Some(at);
                    t.result_ref = result_ref;
                    t.error = error;
                    t.lease = None;
                    t.finished_by = Some(lease_id);
                }
            }
        }
    }

    fn append(&mut self, ev: Event) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(&ev).expect("events serialize");
        line.push(b'\n');
        self.wal.write_all(&line)?;
        self.wal.sync_data()?;
        self.apply(ev);
        Ok(())
    }

    /// Persists a new queued task. `spec.seed` is filled from the id when absent.
    pub fn submit(&mut self, id: String, mut spec: TaskSpec, now: u64) -> Result<TaskRecord, StoreError> {
        spec.seed.get_or_insert_with(|| seed_from_id(&id));
        let record = TaskRecord {
            id: id.clone(),
            seq: self.next_seq,
            spec,
            status: TaskStatus::Queued,
            submitted_at: now,
            started_at: None,
            finished_at: None,
            result_ref: None,
            error: None,
            lease: None,
            finished_by: None,
        };
        self.append(Event::Submitted {
            record: record.clone(),
        })?;
        Ok(record)
    }

    /// Returns running tasks whose lease ran out to the queue.
    pub fn sweep(&mut self, now: u64) -> Result<usize, StoreError> {
        let expired: Vec<String> = self
            .tasks
            .values()
            .filter(|t| {
                t.status == TaskStatus::Running && t.lease.as_ref().is_some_and(|l| l.expires_at <= now)
            })
            .map(|t| t.id.clone())
            .collect();
        for id in &expired {
            self.append(Event::Requeued {
                id: id.clone(),
                at: now,
            })?;
        }
        Ok(expired.len())
    }

    /// Atomically leases the oldest queued task.
    pub fn lease_next(
        &mut self,
        now: u64,
        lease_ms: u64,
        lease_id: String,
    ) -> Result<Option<TaskRecord>, StoreError> {
        self.sweep(now)?;
        let Some((_, id)) = self.queued.first_key_value() else {
            return Ok(None);
        };
        let id = id.clone();
        self.append(Event::Leased {
            id: id.clone(),
            lease_id,
            at: now,
            expires_at: now + lease_ms,
        })?;
        Ok(self.tasks.get(&id).cloned())
    }

    /// Earliest lease expiry among running tasks.
    pub fn next_expiry(&self) -> Option<u64> {
        self.tasks
            .values()
            .filter_map(|t| t.lease.as_ref().map(|l| l.expires_at))
            .min()
    }

    pub fn get(&self, id: &str) -> Option<&TaskRecord> {
        self.tasks.get(id)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn queued_len(&self) -> usize {
        self.queued.len()
    }

    fn result_path(&self, result_ref: &str) -> PathBuf {
        self.dir.join(result_ref)
    }

    fn write_result(&self, id: &str, bytes: &[u8]) -> Result<String, StoreError> {
        let rel = format!("{RESULTS_DIR}/{id}.json");
        let tmp = self.dir.join(format!("{RESULTS_DIR}/{id}.json.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.result_path(&rel))?;
        if let Ok(d) = File::open(self.dir.join(RESULTS_DIR)) {
            let _ = d.sync_all();
        }
        Ok(rel)
    }

    /// Stored result bytes of a finished task.
    pub fn result_bytes(&self, id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        let t = self
            .tasks
            .get(id)
            .ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        match &t.result_ref {
            Some(r) => Ok(Some(fs::read(self.result_path(r))?)),
            None => Ok(None),
        }
    }

    pub fn result(&self, id: &str) -> Result<Option<ResultDocument>, StoreError> {
        match self.result_bytes(id)? {
            Some(b) => serde_json::from_slice(&b)
                .map(Some)
                .map_err(|e| StoreError::Corrupt {
                    line: 0,
                    message: format!("result of {id}: {e}"),
                }),
            None => Ok(None),
        }
    }

    /// Records an agent's outcome. Repeating the same report for the same
    /// lease is a no-op that returns the same acknowledgment.
    pub fn finish(
        &mut self,
        id: &str,
        lease_id: &str,
        outcome: &Outcome,
        now: u64,
    ) -> Result<ReportAck, StoreError> {
        let t = self
            .tasks
            .get(id)
            .ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        let mismatch = || StoreError::LeaseMismatch {
            id: id.to_string(),
            status: t.status,
            lease_id: lease_id.to_string(),
        };
        if t.status.is_terminal() {
            if t.finished_by.as_deref() != Some(lease_id) {
                return Err(mismatch());
            }
            let same = match outcome {
                Outcome::Done(doc) => {
                    t.status == TaskStatus::Done
                        && self.result_bytes(id)?.as_deref() == Some(&serde_json::to_vec(doc).expect("serialize")[..])
                }
                Outcome::Failed { error } => {
                    t.status == TaskStatus::Failed && t.error.as_deref() == Some(error)
                }
            };
            return if same {
                Ok(ReportAck {
                    id: id.to_string(),
                    status: t.status,
                })
            } else {
                Err(StoreError::Conflict(id.to_string()))
            };
        }
        if t.status != TaskStatus::Running || t.lease.as_ref().map(|l| l.lease_id.as_str()) != Some(lease_id) {
            return Err(mismatch());
        }
        let (status, result_ref, error) = match outcome {
            Outcome::Done(doc) => {
                let bytes = serde_json::to_vec(doc).expect("serialize");
                (TaskStatus::Done, Some(self.write_result(id, &bytes)?), None)
            }
            Outcome::Failed { error } => (TaskStatus::Failed, None, Some(error.clone())),
        };
        self.append(Event::Finished {
            id: id.to_string(),
            lease_id: lease_id.to_string(),
            at: now,
            status,
            result_ref,
            error,
        })?;
        Ok(ReportAck {
            id: id.to_string(),
            status,
        })
    }
}
