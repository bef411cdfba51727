//! Task execution as performed by the lab-side agent, and the result
//! document served to users (JSON and CSV).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{readout_correct_with, AnalysisError, ProbabilityTable};
use crate::circuit::{validate, Circuit, ScanSpec, Violation};
use crate::device::{Confusion, DeviceSpec};
use crate::qasm::{self, SourceError};
use crate::sim::{self, NoiseModel, SimError};

pub use crate::sim::NoiseMode as Backend;

pub const MAX_SHOTS: u64 = 1_000_000;
pub const DEFAULT_SHOTS: u64 = 3000;

pub const CSV_HEADER: &str = "scan_index,gamma,bitstring,count,prob_raw,prob_corrected";

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

fn default_backend() -> Backend {
    Backend::Calibrated
}

/// What a user submits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub source: String,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default)]
    pub apply_correction: bool,
    /// Sampling seed; the service derives one from the task id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TaskSpec {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            shots: DEFAULT_SHOTS,
            backend: default_backend(),
            apply_correction: false,
            seed: None,
        }
    }
}

/// Why a submission was refused. Locations are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl From<SourceError> for Rejection {
    fn from(e: SourceError) -> Self {
        Self {
            line: e.line,
            column: e.column,
            message: e.message,
        }
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("task rejected: {}", summarize(.0))]
    Rejected(Vec<Rejection>),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

fn summarize(errors: &[Rejection]) -> String {
    errors
        .iter()
        .map(|e| format!("{}:{}: {}", e.line, e.column, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Line of the statement behind gate `index` (statements are one per line,
/// so the k-th gate is the k-th gate-bearing line).
fn gate_lines(source: &str) -> Vec<usize> {
    source
        .lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let code = line.split('#').next().unwrap_or("").trim();
            let word = code.split_whitespace().next()?.to_ascii_lowercase();
            (word != "qubits" && word != "scan").then_some(i + 1)
        })
        .collect()
}

fn violation_to_rejection(v: &Violation, lines: &[usize]) -> Rejection {
    let line = v
        .gate_index
        .and_then(|i| lines.get(i).copied())
        .unwrap_or(1);
    Rejection {
        line,
        column: 1,
        message: v.message.clone(),
    }
}

/// Parses and validates a submission against the device.
pub fn check(spec: &TaskSpec, device: &DeviceSpec) -> Result<Circuit, Vec<Rejection>> {
    if spec.shots == 0 || spec.shots > MAX_SHOTS {
        return Err(vec![Rejection {
            line: 0,
            column: 0,
            message: format!("shots must be in [1, {MAX_SHOTS}], got {}", spec.shots),
        }]);
    }
    let circuit =
        qasm::parse(&spec.source).map_err(|errs| errs.into_iter().map(Rejection::from).collect::<Vec<_>>())?;
    let report = validate(&circuit, device);
    if !report.is_valid() {
        let lines = gate_lines(&spec.source);
        return Err(report
            .violations
            .iter()
            .map(|v| violation_to_rejection(v, &lines))
            .collect());
    }
    Ok(circuit)
}

pub fn noise_model(backend: Backend, device: &DeviceSpec) -> NoiseModel {
    match backend {
        Backend::Ideal => NoiseModel::ideal(device.num_qubits()),
        Backend::Calibrated => NoiseModel::calibrated(device),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultPoint {
    pub index: usize,
    pub gamma: f64,
    /// Observed bitstrings only.
    pub counts: BTreeMap<String, u64>,
    /// Observed bitstrings only.
    pub probs_raw: BTreeMap<String, f64>,
    /// Every bitstring over the measured qubits (entries may be negative).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs_corrected: Option<BTreeMap<String, f64>>,
}

impl ResultPoint {
    /// Dense raw table in [`ProbabilityTable`] order.
    pub fn raw_table(&self, qubits: &[usize]) -> ProbabilityTable {
        dense(qubits, &self.probs_raw)
    }

    pub fn corrected_table(&self, qubits: &[usize]) -> Option<ProbabilityTable> {
        self.probs_corrected.as_ref().map(|m| dense(qubits, m))
    }

    pub fn dense_counts(&self, qubits: &[usize]) -> Vec<u64> {
        let mut out = vec![0; 1 << qubits.len()];
        for (bits, &c) in &self.counts {
            if let Some(i) = crate::analysis::parse_bitstring(bits, qubits.len()) {
                out[i] = c;
            }
        }
        out
    }
}

fn dense(qubits: &[usize], map: &BTreeMap<String, f64>) -> ProbabilityTable {
    let mut probs = vec![0.0; 1 << qubits.len()];
    for (bits, &p) in map {
        if let Some(i) = crate::analysis::parse_bitstring(bits, qubits.len()) {
            probs[i] = p;
        }
    }
    ProbabilityTable {
        qubits: qubits.to_vec(),
        probs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub task_id: String,
    pub device: String,
    pub backend: Backend,
    pub shots: u64,
    pub seed: u64,
    pub measured: Vec<usize>,
    pub scan: Option<ScanSpec>,
    pub points: Vec<ResultPoint>,
}

impl ResultDocument {
    pub fn corrected(&self) -> bool {
        self.points.iter().any(|p| p.probs_corrected.is_some())
    }

    /// Corrected table when present, raw otherwise.
    pub fn best_table(&self, k: usize) -> ProbabilityTable {
        let p = &self.points[k];
        p.corrected_table(&self.measured)
            .unwrap_or_else(|| p.raw_table(&self.measured))
    }
}

/// Runs a task exactly as the agent does: parse, validate, sample with the
/// backend's noise model and optionally apply readout correction.
pub fn execute(
    task_id: &str,
    spec: &TaskSpec,
    device: &DeviceSpec,
    seed: u64,
) -> Result<ResultDocument, TaskError> {
    let circuit = check(spec, device).map_err(TaskError::Rejected)?;
    let noise = noise_model(spec.backend, device);
    let run = sim::run_shots(&circuit, spec.shots, &noise, seed)?;
    let confusions: Vec<Confusion> = run.measured.iter().map(|&q| noise.confusion[q]).collect();
    let width = run.measured.len();
    let mut points = Vec::with_capacity(run.points.len());
    for (k, p) in run.points.iter().enumerate() {
        let raw = run.probs_raw(k);
        let mut counts = BTreeMap::new();
        let mut probs_raw = BTreeMap::new();
        for (i, &c) in p.counts.iter().enumerate() {
            if c > 0 {
                let bits = crate::analysis::bitstring(i, width);
                counts.insert(bits.clone(), c);
                probs_raw.insert(bits, raw.probs[i]);
            }
        }
        let probs_corrected = if spec.apply_correction {
            let t = readout_correct_with(&raw, &confusions)?;
            Some(
                t.probs
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (crate::analysis::bitstring(i, width), v))
                    .collect(),
            )
        } else {
            None
        };
        points.push(ResultPoint {
            index: p.index,
            gamma: p.gamma,
            counts,
            probs_raw,
            probs_corrected,
        });
    }
    Ok(ResultDocument {
        task_id: task_id.to_string(),
        device: device.name.clone(),
        backend: spec.backend,
        shots: spec.shots,
        seed,
        measured: run.measured,
        scan: circuit.scan,
        points,
    })
}

/// Fixed-point with 8 decimals; negative zero prints as zero.
pub fn fixed8(v: f64) -> String {
    let s = format!("{v:.8}");
    if s == "-0.00000000" {
        "0.00000000".to_string()
    } else {
        s
    }
}

/// CSV download: one row per observed bitstring per scan point, ordered by
/// scan index then bitstring.
pub fn render_csv(doc: &ResultDocument) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut points: Vec<&ResultPoint> = doc.points.iter().collect();
    points.sort_by_key(|p| p.index);
    for p in points {
        for (bits, count) in &p.counts {
            let raw = p.probs_raw.get(bits).copied().unwrap_or(0.0);
            let corrected = p
                .probs_corrected
                .as_ref()
                .and_then(|m| m.get(bits))
                .map(|&v| fixed8(v))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.index,
                fixed8(p.gamma),
                bits,
                count,
                fixed8(raw),
                corrected
            );
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Bad { line: usize, message: String },
}

/// One parsed CSV data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scan_index: usize,
    pub gamma: f64,
    pub bitstring: String,
    pub count: u64,
    pub prob_raw: f64,
    pub prob_corrected: Option<f64>,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(CsvError::Bad {
                line: 1,
                message: "unexpected header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let bad = |message: &str| CsvError::Bad {
            line: i + 1,
            message: message.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        rows.push(CsvRow {
            scan_index: f[0].parse().map_err(|_| bad("scan_index"))?,
            gamma: f[1].parse().map_err(|_| bad("gamma"))?,
            bitstring: f[2].to_string(),
            count: f[3].parse().map_err(|_| bad("count"))?,
            prob_raw: f[4].parse().map_err(|_| bad("prob_raw"))?,
            prob_corrected: if f[5].is_empty() {
                None
            } else {
                Some(f[5].parse().map_err(|_| bad("prob_corrected"))?)
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device() -> DeviceSpec {
        DeviceSpec::scq10()
    }

    #[test]
    fn rejects_non_adjacent() {
        let spec = TaskSpec::new("qubits 10\ncnot 0 2\nmeasure 0");
        let errs = check(&spec, &device()).unwrap_err();
        assert!(errs[0].message.contains("non-adjacent pair"), "{errs:?}");
        assert_eq!(errs[0].line, 2);
    }

    #[test]
    fn rejects_garbage_on_line_one() {
        let errs = check(&TaskSpec::new("%%% nonsense"), &device()).unwrap_err();
        assert_eq!(errs[0].line, 1);
    }

    #[test]
    fn rejects_shot_bounds() {
        let mut spec = TaskSpec::new("qubits 1\nh 0\nmeasure 0");
        spec.shots = 0;
        assert!(check(&spec, &device()).is_err());
        spec.shots = MAX_SHOTS + 1;
        assert!(check(&spec, &device()).is_err());
        spec.shots = MAX_SHOTS;
        assert!(check(&spec, &device()).is_ok());
    }

    #[test]
    fn single_point_csv() {
        let mut spec = TaskSpec::new("qubits 1\nh 0\nmeasure 0");
        spec.backend = Backend::Ideal;
        let doc = execute("t1", &spec, &device(), 7).unwrap();
        let csv = render_csv(&doc);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0.00000000,0,"));
        assert!(lines[1].ends_with(','));
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.iter().map(|r| r.count).sum::<u64>(), DEFAULT_SHOTS);
    }

    #[test]
    fn corrected_column_present_when_requested() {
        let mut spec = TaskSpec::new("qubits 2\nx 0\nmeasure 0 1");
        spec.apply_correction = true;
        spec.shots = 2000;
        let doc = execute("t2", &spec, &device(), 1).unwrap();
        let rows = parse_csv(&render_csv(&doc)).unwrap();
        assert!(rows.iter().all(|r| r.prob_corrected.is_some()));
        let t = doc.best_table(0);
        assert!((t.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fixed8_formatting() {
        assert_eq!(fixed8(-1e-12), "0.00000000");
        assert_eq!(fixed8(-std::f64::consts::FRAC_PI_2), "-1.57079633");
        assert_eq!(fixed8(0.5), "0.50000000");
    }
}
