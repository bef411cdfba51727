//! Subcommands and the exit-code taxonomy: 0 ok, 2 syntax or usage,
//! 3 network, 4 pending, 5 not found, 1 anything else.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scq_core::campaign::{
    mean_fidelity_by_n, parity_csv, report_csv, run_bench, BenchConfig, BenchError, BlockResult, LocalRunner,
    Runner, RunnerExecutor,
};
use scq_core::qpt::{ideal_chi, process_fidelity, qpt_two_qubit, ExactExecutor, ProcessMatrix, QptError};
use scq_core::task::{noise_model, Backend, TaskSpec, DEFAULT_SHOTS};
use scq_core::{DeviceSpec, Gate, ScanSpec};
use thiserror::Error;

use crate::client::{Client, ClientError, RemoteRunner};

#[derive(Parser)]
#[command(name = "scq", version, about = "Client for the ScQ cloud quantum emulator")]
pub struct Cli {
    #[command(flatten)]
    pub conn: Connection,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone)]
pub struct Connection {
    #[arg(long, global = true, env = "SCQ_SERVER_URL", default_value = "http://127.0.0.1:8080")]
    pub server: String,
    /// Bearer token for `/api/*` when the service requires one.
    #[arg(long, global = true, env = "SCQ_TOKEN")]
    pub token: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Ideal,
    Calibrated,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Ideal => Backend::Ideal,
            BackendArg::Calibrated => Backend::Calibrated,
        }
    }
}

#[derive(Args, Clone)]
pub struct Engine {
    /// Run in process instead of on the service.
    #[arg(long)]
    pub local: bool,
    /// Device document for --local; the built-in scq10 table by default.
    #[arg(long, requires = "local")]
    pub device: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Submit an assembly program; prints the task id.
    Submit {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SHOTS)]
        shots: u64,
        #[arg(long, value_enum, default_value = "calibrated")]
        backend: BackendArg,
        /// Ask for readout-corrected probabilities.
        #[arg(long)]
        correct: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Wait for the task and print its status when it ends.
        #[arg(long)]
        wait: bool,
    },
    /// Print the status of a task as JSON.
    Status { id: String },
    /// Download a result as CSV (with --csv) or JSON.
    Result {
        id: String,
        /// Write the CSV table here; `-` for stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the JSON document here; `-` for stdout (the default).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// GHZ campaign over every block of N neighbouring qubits.
    GhzBench {
        #[arg(long, default_value_t = 6)]
        n_min: usize,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = DEFAULT_SHOTS)]
        shots: u64,
        #[arg(long, value_enum, default_value = "calibrated")]
        backend: BackendArg,
        /// Skip readout correction.
        #[arg(long)]
        no_correction: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bootstrap resamples for σ; 0 turns error bars off.
        #[arg(long, default_value_t = 200)]
        resamples: usize,
        /// Scan points over γ ∈ [−π/2, π/2].
        #[arg(long, default_value_t = 51)]
        points: usize,
        /// Directory for ghz_report.csv and ghz_parity.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        engine: Engine,
    },
    /// Two-qubit process tomography of the CZ on a neighbouring pair.
    Qpt {
        /// `Q6Q7` (1-based labels) or `5,6` (0-based indices).
        #[arg(long)]
        pair: String,
        /// Shots per circuit; 0 uses exact probabilities (--local only).
        #[arg(long, default_value_t = DEFAULT_SHOTS)]
        shots: u64,
        #[arg(long, value_enum, default_value = "calibrated")]
        backend: BackendArg,
        #[arg(long)]
        no_correction: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write χ as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        engine: Engine,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Qpt(#[from] QptError),
    #[error(transparent)]
    Device(#[from] scq_core::device::DeviceError),
    #[error("{0}")]
    Check(String),
}

fn client_code(e: &ClientError) -> i32 {
    match e {
        ClientError::Rejected(_) => 2,
        ClientError::Network(_) => 3,
        ClientError::Pending { .. } => 4,
        ClientError::NotFound(_) => 5,
        ClientError::Failed { .. } | ClientError::Server { .. } => 1,
    }
}

fn boxed_code(e: &(dyn std::error::Error + 'static)) -> i32 {
    e.downcast_ref::<ClientError>().map(client_code).unwrap_or(1)
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Client(e) => client_code(e),
            CliError::Usage(_) => 2,
            CliError::Bench(BenchError::Runner(e)) => boxed_code(e.as_ref()),
            CliError::Qpt(QptError::Executor(e)) => boxed_code(e.as_ref()),
            _ => 1,
        }
    }
}

/// `Q6Q7`, `Q6-Q7` or `5,6`.
pub fn parse_pair(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("cannot read qubit pair {text:?}; use Q6Q7 or 5,6"));
    let t = text.trim();
    let (a, b) = if t.starts_with(['Q', 'q']) {
        let parts: Vec<&str> = t.split(['Q', 'q', '-']).filter(|s| !s.is_empty()).collect();
        match parts[..] {
            [a, b] => {
                let a: usize = a.parse().map_err(|_| bad())?;
                let b: usize = b.parse().map_err(|_| bad())?;
                if a == 0 || b == 0 {
                    return Err(bad());
                }
                (a - 1, b - 1)
            }
            _ => return Err(bad()),
        }
    } else {
        let (a, b) = t.split_once(',').ok_or_else(bad)?;
        (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
    };
    Ok((a, b))
}

fn write_to(path: &std::path::Path, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    if path.as_os_str() == "-" {
        out.write_all(text.as_bytes())?;
    } else {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn local_device(engine: &Engine) -> Result<DeviceSpec, CliError> {
    Ok(match &engine.device {
        Some(p) => DeviceSpec::load(p)?,
        None => DeviceSpec::scq10(),
    })
}

/// Fidelity grid: one row per N, one column per block offset.
pub fn fidelity_grid(results: &[BlockResult]) -> String {
    let max_offset = results.iter().map(|r| r.report.offset).max().unwrap_or(0);
    let mut s = String::from("  N |");
    for o in 0..=max_offset {
        let _ = write!(s, "  Q{:<5}", o + 1);
    }
    s.push_str(" | mean\n");
    for (n, mean) in mean_fidelity_by_n(results) {
        let _ = write!(s, "{n:>3} |");
        for o in 0..=max_offset {
            match results.iter().find(|r| r.report.n == n && r.report.offset == o) {
                Some(r) => {
                    let _ = write!(s, "  {:.4}", r.report.fidelity);
                }
                None => s.push_str("       -"),
            }
        }
        let _ = writeln!(s, " | {mean:.4}");
    }
    s
}

/// Runs one command. Normal output goes to `out`, diagnostics to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let client = Client::new(&cli.conn.server, cli.conn.token.clone());
    match cli.command {
        Command::Submit {
            file,
            shots,
            backend,
            correct,
            seed,
            wait,
        } => {
            let source = std::fs::read_to_string(&file)?;
            let spec = TaskSpec {
                source,
                shots,
                backend: backend.into(),
                apply_correction: correct,
                seed,
            };
            let id = match client.submit(&spec) {
                Ok(id) => id,
                Err(ClientError::Rejected(errors)) => {
                    for e in &errors {
                        writeln!(err, "{}:{}:{}: {}", file.display(), e.line, e.column, e.message)?;
                    }
                    return Err(ClientError::Rejected(errors).into());
                }
                Err(e) => return Err(e.into()),
            };
            writeln!(out, "{id}")?;
            if wait {
                client.wait(&id)?;
                writeln!(err, "{id}: done")?;
            }
        }
        Command::Status { id } => {
            let view = client.status(&id)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&view).expect("serializable"))?;
        }
        Command::Result { id, csv, json } => {
            if let Some(path) = &csv {
                write_to(path, &client.result_csv(&id)?, out)?;
            }
            if json.is_some() || csv.is_none() {
                let doc = client.result(&id)?;
                let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
                write_to(json.as_deref().unwrap_or("-".as_ref()), &text, out)?;
            }
        }
        Command::GhzBench {
            n_min,
            n_max,
            shots,
            backend,
            no_correction,
            seed,
            resamples,
            points,
            out_dir,
            engine,
        } => {
            if points < 3 {
                return Err(CliError::Usage("--points must be at least 3".into()));
            }
            let config = BenchConfig {
                n_min,
                n_max,
                shots,
                backend: backend.into(),
                scan: ScanSpec::linspace(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, points),
                apply_correction: !no_correction,
                seed,
                resamples,
            };
            let (device, mut runner): (DeviceSpec, Box<dyn Runner + '_>) = if engine.local {
                let device = local_device(&engine)?;
                (device.clone(), Box::new(LocalRunner { device }))
            } else {
                (client.device()?, Box::new(RemoteRunner { client: &client }))
            };
            let results = run_bench(runner.as_mut(), &device, &config)?;
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join("ghz_report.csv"), report_csv(&results))?;
            std::fs::write(out_dir.join("ghz_parity.csv"), parity_csv(&results))?;
            for r in &results {
                let g = &r.report;
                let sigma = g.sigma.map(|s| format!(" ± {:.4}", s.fidelity)).unwrap_or_default();
                writeln!(
                    out,
                    "{:<8} P = {:.4}  C = {:.4}  F = {:.4}{sigma}",
                    g.block_label(),
                    g.population,
                    g.coherence,
                    g.fidelity
                )?;
            }
            writeln!(out, "\n{}", fidelity_grid(&results))?;
            if config.backend == Backend::Ideal {
                if let Some(r) = results.iter().find(|r| r.report.fidelity < 0.99) {
                    return Err(CliError::Check(format!(
                        "ideal backend gave F = {:.4} on {}",
                        r.report.fidelity,
                        r.report.block_label()
                    )));
                }
            }
        }
        Command::Qpt {
            pair,
            shots,
            backend,
            no_correction,
            seed,
            out: chi_out,
            engine,
        } => {
            let pair = parse_pair(&pair)?;
            let backend: Backend = backend.into();
            let correct = !no_correction;
            let (device, chi) = if engine.local {
                let device = local_device(&engine)?;
                if !device.are_adjacent(pair.0, pair.1) {
                    return Err(CliError::Usage(format!("qubits {} and {} are not neighbours", pair.0, pair.1)));
                }
                let cz = [Gate::Cz(pair.0, pair.1)];
                let width = device.num_qubits();
                let chi = if shots == 0 {
                    let mut ex = ExactExecutor {
                        noise: noise_model(backend, &device),
                        correct,
                    };
                    qpt_two_qubit(&mut ex, width, pair, &cz)?
                } else {
                    let mut runner = LocalRunner { device: device.clone() };
                    let mut ex = RunnerExecutor {
                        runner: &mut runner,
                        shots,
                        backend,
                        apply_correction: correct,
                        seed,
                    };
                    qpt_two_qubit(&mut ex, width, pair, &cz)?
                };
                (device, chi)
            } else {
                if shots == 0 {
                    return Err(CliError::Usage("--shots 0 (exact mode) needs --local".into()));
                }
                let device = client.device()?;
                if !device.are_adjacent(pair.0, pair.1) {
                    return Err(CliError::Usage(format!("qubits {} and {} are not neighbours", pair.0, pair.1)));
                }
                let mut runner = RemoteRunner { client: &client };
                let mut ex = RunnerExecutor {
                    runner: &mut runner,
                    shots,
                    backend,
                    apply_correction: correct,
                    seed,
                };
                let chi = qpt_two_qubit(&mut ex, device.num_qubits(), pair, &[Gate::Cz(pair.0, pair.1)])?;
                (device, chi)
            };
            let _ = device;
            let ideal = ideal_chi(&[Gate::Cz(pair.0, pair.1)], pair)?;
            let (f, _) = process_fidelity(&chi, &ideal);
            writeln!(out, "Q{}Q{} F_chi = {f:.4}", pair.0 + 1, pair.1 + 1)?;
            if let Some(path) = chi_out {
                write_chi(&path, &chi, f)?;
            }
        }
    }
    Ok(())
}

fn write_chi(path: &std::path::Path, chi: &ProcessMatrix, fidelity: f64) -> Result<(), CliError> {
    let doc = serde_json::json!({ "process_fidelity": fidelity, "chi": chi.chi });
    std::fs::write(path, serde_json::to_string_pretty(&doc).expect("serializable") + "\n")?;
    Ok(())
}
