use scq_core::analysis::{fit_parity, ghz_population, parity, ParityCurve};
use scq_core::circuit::{append_parity_stage, build_ghz};
use scq_core::qpt::{ideal_chi, process_fidelity, qpt_two_qubit, ExactExecutor};
use scq_core::task::{self, noise_model, Backend, TaskSpec};
use scq_core::{qasm, DeviceSpec, Gate, ScanSpec};
use serde::Serialize;

fn backend(name: &str) -> Result<Backend, String> {
    match name {
        "ideal" => Ok(Backend::Ideal),
        "calibrated" => Ok(Backend::Calibrated),
        _ => Err(format!("unknown backend {name:?}")),
    }
}

pub fn device_json() -> String {
    serde_json::to_string(&DeviceSpec::scq10()).expect("serializable")
}

/// Parses, checks and samples a program. Syntax errors come back as
/// `line:column: message` lines.
pub fn run_program(source: &str, shots: u64, backend_name: &str, correct: bool, seed: u64) -> Result<String, String> {
    let spec = TaskSpec {
        source: source.to_string(),
        shots,
        backend: backend(backend_name)?,
        apply_correction: correct,
        seed: Some(seed),
    };
    let device = DeviceSpec::scq10();
    if let Err(errors) = task::check(&spec, &device) {
        return Err(errors
            .iter()
            .map(|e| format!("{}:{}: {}", e.line, e.column, e.message))
            .collect::<Vec<_>>()
            .join("\n"));
    }
    let doc = task::execute("browser", &spec, &device, seed).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&doc).expect("serializable"))
}

#[derive(Serialize)]
struct ParityOut {
    source: String,
    gammas: Vec<f64>,
    parities: Vec<f64>,
    population: f64,
    coherence: f64,
    phase: f64,
    fidelity: f64,
}

pub fn parity_scan(
    n: usize,
    offset: usize,
    backend_name: &str,
    shots: u64,
    points: usize,
    seed: u64,
) -> Result<String, String> {
    if points < 3 {
        return Err("need at least 3 scan points".into());
    }
    let device = DeviceSpec::scq10();
    let ghz = build_ghz(n, offset, device.num_qubits()).map_err(|e| e.to_string())?;
    let scan = ScanSpec::linspace(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, points);
    let with_scan = append_parity_stage(&ghz, scan).map_err(|e| e.to_string())?;
    let backend = backend(backend_name)?;
    let spec = |source: String, s: u64| TaskSpec {
        source,
        shots,
        backend,
        apply_correction: true,
        seed: Some(s),
    };
    let pop_spec = spec(qasm::serialize(&ghz), seed);
    let scan_source = qasm::serialize(&with_scan);
    let scan_spec = spec(scan_source.clone(), seed.wrapping_add(1));
    let pop = task::execute("browser", &pop_spec, &device, seed).map_err(|e| e.to_string())?;
    let sc = task::execute("browser", &scan_spec, &device, seed.wrapping_add(1)).map_err(|e| e.to_string())?;
    let curve = ParityCurve {
        n,
        gammas: sc.points.iter().map(|p| p.gamma).collect(),
        parities: (0..sc.points.len()).map(|k| parity(&sc.best_table(k))).collect(),
    };
    let fit = fit_parity(&curve).map_err(|e| e.to_string())?;
    let population = ghz_population(&pop.best_table(0));
    let out = ParityOut {
        source: scan_source,
        gammas: curve.gammas,
        parities: curve.parities,
        population,
        coherence: fit.coherence,
        phase: fit.phase,
        fidelity: (population + fit.coherence) / 2.0,
    };
    Ok(serde_json::to_string(&out).expect("serializable"))
}

#[derive(Serialize)]
struct ChiOut {
    pair: [usize; 2],
    fidelity: f64,
    re: Vec<f64>,
    im: Vec<f64>,
}

pub fn cz_tomography(q: usize, backend_name: &str) -> Result<String, String> {
    let device = DeviceSpec::scq10();
    if q + 1 >= device.num_qubits() {
        return Err(format!("no coupler after qubit {q}"));
    }
    let pair = (q, q + 1);
    let cz = [Gate::Cz(q, q + 1)];
    let mut ex = ExactExecutor {
        noise: noise_model(backend(backend_name)?, &device),
        correct: true,
    };
    let chi = qpt_two_qubit(&mut ex, device.num_qubits(), pair, &cz).map_err(|e| e.to_string())?;
    let (fidelity, _) = process_fidelity(&chi, &ideal_chi(&cz, pair).map_err(|e| e.to_string())?);
    let out = ChiOut {
        pair: [q, q + 1],
        fidelity,
        re: chi.chi.iter().map(|c| c.re).collect(),
        im: chi.chi.iter().map(|c| c.im).collect(),
    };
    Ok(serde_json::to_string(&out).expect("serializable"))
}
