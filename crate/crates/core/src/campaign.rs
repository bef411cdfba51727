//! The GHZ benchmark campaign and task-level adapters.
//!
//! Every block `(offset, N)` of the chain gets two tasks: the population
//! circuit and the parity scan. Tasks go through a [`Runner`], so the same
//! code drives the in-process engine and a remote service; seeds are fixed
//! per task, so both give identical numbers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    bootstrap_errors, fit_parity, ghz_population, ghz_report_from_values, parity, AnalysisError,
    BlockCounts, GhzReport, ParityCurve, ProbabilityTable,
};
use crate::circuit::{append_parity_stage, build_ghz, ghz_blocks, Circuit, CircuitError, ScanSpec};
use crate::device::DeviceSpec;
use crate::qasm;
use crate::qpt::{BoxError, Executor, QptError};
use crate::rng;
use crate::task::{self, fixed8, Backend, ResultDocument, TaskSpec};

/// Executes task specs and returns their result documents, in order.
pub trait Runner {
    fn run_tasks(&mut self, specs: &[TaskSpec]) -> Result<Vec<ResultDocument>, BoxError>;
}

/// In-process runner; task ids are `local-<k>`.
pub struct LocalRunner {
    pub device: DeviceSpec,
}

impl Runner for LocalRunner {
    fn run_tasks(&mut self, specs: &[TaskSpec]) -> Result<Vec<ResultDocument>, BoxError> {
        specs
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let seed = s.seed.unwrap_or(0);
                task::execute(&format!("local-{k}"), s, &self.device, seed).map_err(BoxError::from)
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid qubit range {n_min}..={n_max} for a {width}-qubit device")]
    Range {
        n_min: usize,
        n_max: usize,
        width: usize,
    },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("task failed: {0}")]
    Runner(BoxError),
    #[error("result document for {0} is malformed")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub shots: u64,
    pub backend: Backend,
    pub scan: ScanSpec,
    pub apply_correction: bool,
    pub seed: u64,
    /// Bootstrap resamples for error bars; 0 disables them.
    pub resamples: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_min: 6,
            n_max: 10,
            shots: task::DEFAULT_SHOTS,
            backend: Backend::Calibrated,
            scan: ScanSpec::parity_default(),
            apply_correction: true,
            seed: 0,
            resamples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockResult {
    pub report: GhzReport,
    pub curve: ParityCurve,
}

/// All blocks `(offset, N)` with `n_min ≤ N ≤ n_max`, ordered by N then offset.
pub fn bench_blocks(n_min: usize, n_max: usize, width: usize) -> Vec<(usize, usize)> {
    (n_min..=n_max)
        .flat_map(|n| ghz_blocks(n, width).collect::<Vec<_>>())
        .collect()
}

/// The two task specs of block number `k`.
pub fn block_tasks(
    k: usize,
    offset: usize,
    n: usize,
    width: usize,
    config: &BenchConfig,
) -> Result<[TaskSpec; 2], BenchError> {
    let ghz = build_ghz(n, offset, width)?;
    let scan = append_parity_stage(&ghz, config.scan)?;
    let spec = |c: &Circuit, stream: u64| TaskSpec {
        source: qasm::serialize(c),
        shots: config.shots,
        backend: config.backend,
        apply_correction: config.apply_correction,
        seed: Some(rng::derive_seed(config.seed, stream)),
    };
    Ok([spec(&ghz, 2 * k as u64), spec(&scan, 2 * k as u64 + 1)])
}

fn analyse_block(
    offset: usize,
    n: usize,
    population: &ResultDocument,
    scan: &ResultDocument,
    device: &DeviceSpec,
    config: &BenchConfig,
) -> Result<BlockResult, BenchError> {
    let malformed = || BenchError::Malformed(format!("Q{}-Q{}", offset + 1, offset + n));
    if population.measured.len() != n || scan.measured.len() != n || population.points.is_empty() {
        return Err(malformed());
    }
    let pop_table = population.best_table(0);
    let curve = ParityCurve {
        n,
        gammas: scan.points.iter().map(|p| p.gamma).collect(),
        parities: (0..scan.points.len())
            .map(|k| parity(&scan.best_table(k)))
            .collect(),
    };
    let fit = fit_parity(&curve)?;
    let mut report = ghz_report_from_values(offset, n, ghz_population(&pop_table), fit);
    if config.resamples > 0 {
        let confusions = config.apply_correction.then(|| {
            let noise = task::noise_model(config.backend, device);
            population
                .measured
                .iter()
                .map(|&q| noise.confusion[q])
                .collect::<Vec<_>>()
        });
        let pop_counts = population.points[0].dense_counts(&population.measured);
        let scan_counts: Vec<Vec<u64>> = scan
            .points
            .iter()
            .map(|p| p.dense_counts(&scan.measured))
            .collect();
        let bars = bootstrap_errors(
            &BlockCounts {
                qubits: &population.measured,
                population: &pop_counts,
                gammas: &curve.gammas,
                parity_points: &scan_counts,
            },
            confusions.as_deref(),
            config.resamples,
            rng::derive_seed(config.seed, 0xE7707 + offset as u64 * 16 + n as u64),
        )?;
        report.sigma = Some(bars);
    }
    Ok(BlockResult { report, curve })
}

/// Runs the full campaign through `runner`.
pub fn run_bench(
    runner: &mut dyn Runner,
    device: &DeviceSpec,
    config: &BenchConfig,
) -> Result<Vec<BlockResult>, BenchError> {
    let width = device.num_qubits();
    if config.n_min == 0 || config.n_min > config.n_max || config.n_max > width {
        return Err(BenchError::Range {
            n_min: config.n_min,
            n_max: config.n_max,
            width,
        });
    }
    let blocks = bench_blocks(config.n_min, config.n_max, width);
    let mut specs = Vec::with_capacity(2 * blocks.len());
    for (k, &(offset, n)) in blocks.iter().enumerate() {
        specs.extend(block_tasks(k, offset, n, width, config)?);
    }
    let docs = runner.run_tasks(&specs).map_err(BenchError::Runner)?;
    if docs.len() != specs.len() {
        return Err(BenchError::Malformed("task batch".into()));
    }
    blocks
        .iter()
        .zip(docs.chunks(2))
        .map(|(&(offset, n), pair)| analyse_block(offset, n, &pair[0], &pair[1], device, config))
        .collect()
}

/// Mean fidelity per block size, ascending in N.
pub fn mean_fidelity_by_n(results: &[BlockResult]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64, usize)> = Vec::new();
    for r in results {
        match out.iter_mut().find(|e| e.0 == r.report.n) {
            Some(e) => {
                e.1 += r.report.fidelity;
                e.2 += 1;
            }
            None => out.push((r.report.n, r.report.fidelity, 1)),
        }
    }
    out.sort_by_key(|e| e.0);
    out.into_iter().map(|(n, s, c)| (n, s / c as f64)).collect()
}

pub const REPORT_CSV_HEADER: &str = "block,offset,n,population,coherence,phase,fidelity,genuine_entanglement,fit_rmse,sigma_population,sigma_coherence,sigma_fidelity";
pub const PARITY_CSV_HEADER: &str = "block,offset,n,scan_index,gamma,parity";

/// One row per block.
pub fn report_csv(results: &[BlockResult]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for r in results {
        let g = &r.report;
        let s = |f: fn(&crate::analysis::ErrorBars) -> f64| g.sigma.as_ref().map(|b| fixed8(f(b))).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            g.block_label(),
            g.offset,
            g.n,
            fixed8(g.population),
            fixed8(g.coherence),
            fixed8(g.phase),
            fixed8(g.fidelity),
            g.genuine_entanglement,
            fixed8(g.fit_rmse),
            s(|b| b.population),
            s(|b| b.coherence),
            s(|b| b.fidelity),
        );
    }
    out
}

/// Plot-ready parity curves, one row per block and scan point.
pub fn parity_csv(results: &[BlockResult]) -> String {
    let mut out = format!("{PARITY_CSV_HEADER}\n");
    for r in results {
        for (k, (g, p)) in r.curve.gammas.iter().zip(&r.curve.parities).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.report.block_label(),
                r.report.offset,
                r.report.n,
                k,
                fixed8(*g),
                fixed8(*p)
            );
        }
    }
    out
}

/// Tomography over task specs: each circuit becomes one task whose seed is
/// derived from `seed` and the circuit index.
pub struct RunnerExecutor<'a> {
    pub runner: &'a mut dyn Runner,
    pub shots: u64,
    pub backend: Backend,
    pub apply_correction: bool,
    pub seed: u64,
}

impl Executor for RunnerExecutor<'_> {
    fn run_batch(&mut self, circuits: &[Circuit]) -> Result<Vec<ProbabilityTable>, QptError> {
        let specs: Vec<TaskSpec> = circuits
            .iter()
            .enumerate()
            .map(|(i, c)| TaskSpec {
                source: qasm::serialize(c),
                shots: self.shots,
                backend: self.backend,
                apply_correction: self.apply_correction,
                seed: Some(rng::derive_seed(self.seed, i as u64)),
            })
            .collect();
        let docs = self.runner.run_tasks(&specs).map_err(QptError::Executor)?;
        Ok(docs.iter().map(|d| d.best_table(0)).collect())
    }
}
