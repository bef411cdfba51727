//! Dense statevector simulation standing in for the processor.
//!
//! Three execution modes share one compiled program form:
//!
//! * [`run_exact`]: noiseless outcome distribution.
//! * [`run_density_exact`]: exact density-matrix evolution through
//!   depolarizing channels and readout confusion (validation oracle).
//! * [`run_shots`]: Pauli-trajectory sampling with the same noise model.
//!
//! Internally qubit 0 is the least-significant amplitude index. Only the
//! qubits a circuit touches are simulated; idle qubits stay in |0⟩ and
//! carry no noise.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{contract_per_qubit, ProbabilityTable};
use crate::circuit::{decompose_cnot, Circuit, CircuitError, Gate, Param, ScanSpec};
use crate::device::{Confusion, DeviceSpec};
use crate::rng;

pub type C64 = Complex64;
pub type Mat2 = [[C64; 2]; 2];

/// Largest number of active qubits for statevector modes.
pub const MAX_STATEVECTOR_QUBITS: usize = 14;
/// Largest number of active qubits for the density-matrix oracle.
pub const MAX_DENSITY_QUBITS: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("circuit touches {active} qubits; this mode supports at most {limit}")]
    TooWide { active: usize, limit: usize },
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("no coupler between qubits {0} and {1}")]
    NoCoupler(usize, usize),
    #[error("noise model covers {covered} qubits but the circuit uses qubit {qubit}")]
    NoiseCoverage { covered: usize, qubit: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub const PAULI_I: Mat2 = [[ONE, ZERO], [ZERO, ONE]];
pub const PAULI_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub const PAULI_Y: Mat2 = [[ZERO, C64::new(0.0, -1.0)], [I, ZERO]];
pub const PAULI_Z: Mat2 = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];
pub const PAULIS: [Mat2; 4] = [PAULI_I, PAULI_X, PAULI_Y, PAULI_Z];

pub fn rx(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
}

pub fn ry(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
}

pub fn rz(theta: f64) -> Mat2 {
    [[C64::from_polar(1.0, -theta / 2.0), ZERO], [ZERO, C64::from_polar(1.0, theta / 2.0)]]
}

pub fn hadamard() -> Mat2 {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

fn literal(p: &Param) -> Result<f64, SimError> {
    match p {
        Param::Literal(v) => Ok(*v),
        Param::Scanned { .. } => Err(SimError::Circuit(CircuitError::UnboundScan)),
    }
}

/// 2×2 unitary of a concrete single-qubit gate.
pub fn single_qubit_matrix(gate: &Gate) -> Option<Mat2> {
    Some(match gate {
        Gate::H(_) => hadamard(),
        Gate::X(_) => PAULI_X,
        Gate::Y(_) => PAULI_Y,
        Gate::Z(_) => PAULI_Z,
        Gate::Rx(_, p) => rx(literal(p).ok()?),
        Gate::Ry(_, p) => ry(literal(p).ok()?),
        Gate::Rz(_, p) => rz(literal(p).ok()?),
        _ => return None,
    })
}

fn conj(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]]
}

fn apply_1q(amps: &mut [C64], bit: usize, m: &Mat2) {
    let stride = 1usize << bit;
    let len = amps.len();
    let mut base = 0;
    while base < len {
        for i in base..base + stride {
            let (a, b) = (amps[i], amps[i + stride]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[i + stride] = m[1][0] * a + m[1][1] * b;
        }
        base += stride << 1;
    }
}

fn apply_cz(amps: &mut [C64], a: usize, b: usize) {
    let mask = (1usize << a) | (1usize << b);
    for (i, amp) in amps.iter_mut().enumerate() {
        if i & mask == mask {
            *amp = -*amp;
        }
    }
}

fn apply_cnot(amps: &mut [C64], control: usize, target: usize) {
    let (cm, tm) = (1usize << control, 1usize << target);
    for i in 0..amps.len() {
        if i & cm != 0 && i & tm == 0 {
            amps.swap(i, i | tm);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub n: usize,
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn zero(n: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[0] = ONE;
        Self { n, amplitudes }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_matrix(&mut self, q: usize, m: &Mat2) {
        apply_1q(&mut self.amplitudes, q, m);
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) {
        apply_cz(&mut self.amplitudes, a, b);
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        apply_cnot(&mut self.amplitudes, control, target);
    }

    /// Applies a concrete gate; measurement is a no-op here.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<(), SimError> {
        match gate {
            Gate::Cnot { control, target } => self.apply_cnot(*control, *target),
            Gate::Cz(a, b) => self.apply_cz(*a, *b),
            Gate::Measure(_) => {}
            g => {
                let m = match g {
                    Gate::Rx(_, p) | Gate::Ry(_, p) | Gate::Rz(_, p) => {
                        literal(p)?;
                        single_qubit_matrix(g).expect("rotation")
                    }
                    _ => single_qubit_matrix(g).expect("single-qubit gate"),
                };
                self.apply_matrix(g.qubits()[0], &m);
            }
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Ideal,
    Calibrated,
}

/// Depolarizing gate errors and readout confusion.
///
/// A depolarizing channel of strength `p` on `d`-dimensional support maps
/// `ρ → (1-p)ρ + p·Tr_S(ρ)⊗I/d`, i.e. with probability `p` one of the `d²`
/// Paulis (identity included) is applied uniformly at random. Its process
/// fidelity is `1 - p + p/d²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    /// Per-qubit single-qubit gate depolarizing strength.
    pub p1: Vec<f64>,
    /// `p2[j]` is the CZ depolarizing strength on pair `(j, j+1)`.
    pub p2: Vec<f64>,
    pub confusion: Vec<Confusion>,
}

impl NoiseModel {
    pub fn ideal(n: usize) -> Self {
        Self {
            mode: NoiseMode::Ideal,
            p1: vec![0.0; n],
            p2: vec![0.0; n.saturating_sub(1)],
            confusion: vec![Confusion::IDENTITY; n],
        }
    }

    /// Gate errors from the device's X fidelities and CZ process fidelities:
    /// `p1 = 2(1 - F_X)` and `p2 = (16/15)(1 - F_χ)`.
    pub fn calibrated(device: &DeviceSpec) -> Self {
        Self {
            mode: NoiseMode::Calibrated,
            p1: device
                .qubits
                .iter()
                .map(|q| 2.0 * (1.0 - q.x_gate_fidelity.value()))
                .collect(),
            p2: device
                .couplers
                .iter()
                .map(|c| 16.0 / 15.0 * (1.0 - c.cz_process_fidelity.value()))
                .collect(),
            confusion: device.qubits.iter().map(|q| q.confusion()).collect(),
        }
    }

    /// Readout confusion only; gates are perfect.
    pub fn readout_only(device: &DeviceSpec) -> Self {
        let mut m = Self::calibrated(device);
        m.p1.iter_mut().for_each(|p| *p = 0.0);
        m.p2.iter_mut().for_each(|p| *p = 0.0);
        m
    }

    /// Gate errors only; readout is perfect.
    pub fn without_readout_error(mut self) -> Self {
        self.confusion.iter_mut().for_each(|c| *c = Confusion::IDENTITY);
        self
    }

    pub fn width(&self) -> usize {
        self.confusion.len()
    }

    fn p1_of(&self, q: usize) -> f64 {
        match self.mode {
            NoiseMode::Ideal => 0.0,
            NoiseMode::Calibrated => self.p1[q],
        }
    }

    fn p2_of(&self, a: usize, b: usize) -> Result<f64, SimError> {
        if self.mode == NoiseMode::Ideal {
            return Ok(0.0);
        }
        if a.abs_diff(b) != 1 {
            return Err(SimError::NoCoupler(a, b));
        }
        self.p2
            .get(a.min(b))
            .copied()
            .ok_or(SimError::NoCoupler(a, b))
    }

    fn confusion_of(&self, q: usize) -> Confusion {
        match self.mode {
            NoiseMode::Ideal => Confusion::IDENTITY,
            NoiseMode::Calibrated => self.confusion[q],
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    One(usize, Mat2),
    Cz(usize, usize),
    Cnot(usize, usize),
}

impl Op {
    fn apply(&self, amps: &mut [C64]) {
        match self {
            Op::One(q, m) => apply_1q(amps, *q, m),
            Op::Cz(a, b) => apply_cz(amps, *a, *b),
            Op::Cnot(c, t) => apply_cnot(amps, *c, *t),
        }
    }

    /// Density matrix stored as a 2n-qubit vector, row bits low.
    fn apply_density(&self, rho: &mut [C64], n: usize) {
        match self {
            Op::One(q, m) => {
                apply_1q(rho, *q, m);
                apply_1q(rho, *q + n, &conj(m));
            }
            Op::Cz(a, b) => {
                apply_cz(rho, *a, *b);
                apply_cz(rho, *a + n, *b + n);
            }
            Op::Cnot(c, t) => {
                apply_cnot(rho, *c, *t);
                apply_cnot(rho, *c + n, *t + n);
            }
        }
    }

    fn support(&self) -> Support {
        match self {
            Op::One(q, _) => Support::One(*q),
            Op::Cz(a, b) | Op::Cnot(a, b) => Support::Two(*a, *b),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Support {
    One(usize),
    Two(usize, usize),
}

impl Support {
    fn paulis(&self) -> usize {
        match self {
            Support::One(_) => 4,
            Support::Two(..) => 16,
        }
    }

    fn apply_pauli(&self, amps: &mut [C64], index: usize) {
        match *self {
            Support::One(q) => apply_1q(amps, q, &PAULIS[index]),
            Support::Two(a, b) => {
                apply_1q(amps, a, &PAULIS[index / 4]);
                apply_1q(amps, b, &PAULIS[index % 4]);
            }
        }
    }

    fn apply_pauli_density(&self, rho: &mut [C64], n: usize, index: usize) {
        let both = |rho: &mut [C64], q: usize, p: &Mat2| {
            apply_1q(rho, q, p);
            apply_1q(rho, q + n, &conj(p));
        };
        match *self {
            Support::One(q) => both(rho, q, &PAULIS[index]),
            Support::Two(a, b) => {
                both(rho, a, &PAULIS[index / 4]);
                both(rho, b, &PAULIS[index % 4]);
            }
        }
    }
}

#[derive(Debug, Clone)]
struct NoisyOp {
    op: Op,
    p: f64,
}

/// A concrete circuit lowered onto its active qubits.
#[derive(Debug, Clone)]
struct Program {
    n: usize,
    ops: Vec<NoisyOp>,
    measured: Vec<usize>,
    measured_global: Vec<usize>,
    confusion: Vec<Confusion>,
}

fn compile(
    circuit: &Circuit,
    noise: Option<&NoiseModel>,
    limit: usize,
) -> Result<Program, SimError> {
    if circuit.has_scanned_params() {
        return Err(SimError::Circuit(CircuitError::UnboundScan));
    }
    let native;
    let circuit = if noise.is_some_and(|m| m.mode == NoiseMode::Calibrated) {
        native = decompose_cnot(circuit);
        &native
    } else {
        circuit
    };
    let mut active: Vec<usize> = circuit.gates.iter().flat_map(|g| g.qubits()).collect();
    active.sort_unstable();
    active.dedup();
    if active.len() > limit {
        return Err(SimError::TooWide {
            active: active.len(),
            limit,
        });
    }
    if let Some(m) = noise {
        if let Some(&q) = active.iter().find(|&&q| q >= m.width()) {
            return Err(SimError::NoiseCoverage {
                covered: m.width(),
                qubit: q,
            });
        }
    }
    let local = |q: usize| active.binary_search(&q).expect("active qubit");
    let mut ops = Vec::new();
    for g in &circuit.gates {
        let (op, p) = match g {
            Gate::Measure(_) => continue,
            Gate::Cz(a, b) => (
                Op::Cz(local(*a), local(*b)),
                noise.map_or(Ok(0.0), |m| m.p2_of(*a, *b))?,
            ),
            Gate::Cnot { control, target } => (
                Op::Cnot(local(*control), local(*target)),
                noise.map_or(Ok(0.0), |m| m.p2_of(*control, *target))?,
            ),
            g => {
                let q = g.qubits()[0];
                let m = single_qubit_matrix(g).ok_or(SimError::Circuit(CircuitError::UnboundScan))?;
                (Op::One(local(q), m), noise.map_or(0.0, |m| m.p1_of(q)))
            }
        };
        ops.push(NoisyOp { op, p });
    }
    let measured_global = circuit.measured().to_vec();
    Ok(Program {
        n: active.len(),
        ops,
        measured: measured_global.iter().map(|&q| local(q)).collect(),
        confusion: measured_global
            .iter()
            .map(|&q| noise.map_or(Confusion::IDENTITY, |m| m.confusion_of(q)))
            .collect(),
        measured_global,
    })
}

impl Program {
    fn marginal(&self, diag: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut out = vec![0.0; 1 << self.measured.len()];
        for (i, p) in diag.enumerate() {
            let mut idx = 0;
            for (k, &q) in self.measured.iter().enumerate() {
                idx |= (i >> q & 1) << k;
            }
            out[idx] += p;
        }
        out
    }

    fn table(&self, probs: Vec<f64>) -> ProbabilityTable {
        ProbabilityTable {
            qubits: self.measured_global.clone(),
            probs,
        }
    }

    fn has_readout_error(&self) -> bool {
        self.confusion.iter().any(|c| !c.is_identity())
    }

    fn apply_confusion(&self, probs: &mut [f64]) {
        if self.has_readout_error() {
            let mats: Vec<_> = self.confusion.iter().map(|c| c.matrix()).collect();
            contract_per_qubit(probs, &mats);
        }
    }

    fn final_state(&self) -> StateVector {
        let mut sv = StateVector::zero(self.n);
        for op in &self.ops {
            op.op.apply(&mut sv.amplitudes);
        }
        sv
    }
}

/// Noiseless outcome distribution of a concrete circuit over its measured qubits.
pub fn run_exact(circuit: &Circuit) -> Result<ProbabilityTable, SimError> {
    let prog = compile(circuit, None, MAX_STATEVECTOR_QUBITS)?;
    let sv = prog.final_state();
    Ok(prog.table(prog.marginal(sv.amplitudes.iter().map(|a| a.norm_sqr()))))
}

/// [`run_exact`] at every scan point.
pub fn run_exact_scan(circuit: &Circuit) -> Result<Vec<ProbabilityTable>, SimError> {
    (0..circuit.scan_count())
        .map(|k| run_exact(&circuit.instantiate(k)?))
        .collect()
}

/// Final statevector over the circuit's active qubits, in ascending order.
pub fn final_state(circuit: &Circuit) -> Result<StateVector, SimError> {
    Ok(compile(circuit, None, MAX_STATEVECTOR_QUBITS)?.final_state())
}

fn depolarize(rho: &mut [C64], n: usize, support: Support, p: f64) {
    if p <= 0.0 {
        return;
    }
    let d2 = support.paulis();
    let mut acc = vec![ZERO; rho.len()];
    for k in 0..d2 {
        let mut term = rho.to_vec();
        support.apply_pauli_density(&mut term, n, k);
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    let w = p / d2 as f64;
    for (r, a) in rho.iter_mut().zip(&acc) {
        *r = *r * (1.0 - p) + a * w;
    }
}

/// Exact noisy distribution: density-matrix evolution with a depolarizing
/// channel after every gate, then the readout confusion applied exactly.
pub fn run_density_exact(circuit: &Circuit, noise: &NoiseModel) -> Result<ProbabilityTable, SimError> {
    let prog = compile(circuit, Some(noise), MAX_DENSITY_QUBITS)?;
    let n = prog.n;
    let dim = 1usize << n;
    let mut rho = vec![ZERO; dim * dim];
    rho[0] = ONE;
    for op in &prog.ops {
        op.op.apply_density(&mut rho, n);
        depolarize(&mut rho, n, op.op.support(), op.p);
    }
    let mut probs = prog.marginal((0..dim).map(|i| rho[i | i << n].re));
    prog.apply_confusion(&mut probs);
    Ok(prog.table(probs))
}

/// [`run_density_exact`] at every scan point.
pub fn run_density_exact_scan(
    circuit: &Circuit,
    noise: &NoiseModel,
) -> Result<Vec<ProbabilityTable>, SimError> {
    (0..circuit.scan_count())
        .map(|k| run_density_exact(&circuit.instantiate(k)?, noise))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub gamma: f64,
    /// Dense counts indexed like [`ProbabilityTable::probs`].
    pub counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs_exact: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub measured: Vec<usize>,
    pub shots: u64,
    pub scan: Option<ScanSpec>,
    pub points: Vec<PointResult>,
}

impl RunResult {
    pub fn probs_raw(&self, k: usize) -> ProbabilityTable {
        ProbabilityTable::from_counts(self.measured.clone(), &self.points[k].counts)
            .expect("shots >= 1")
    }
}

/// Cumulative distribution with trailing mass pinned to exactly 1.
fn cdf(probs: &[f64]) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p.max(0.0) / total;
            acc
        })
        .collect();
    if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
        out[last..].iter_mut().for_each(|c| *c = 1.0);
    }
    out
}

fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Bound on cached outcome distributions, in f64 entries.
const CACHE_BUDGET: usize = 1 << 23;

struct TrajectorySampler<'a> {
    prog: &'a Program,
    snapshots: Vec<Vec<C64>>,
    ideal_cdf: Vec<f64>,
    cache: HashMap<Vec<(u32, u8)>, Vec<f64>>,
}

impl<'a> TrajectorySampler<'a> {
    fn new(prog: &'a Program) -> Self {
        let noisy = prog.ops.iter().any(|o| o.p > 0.0);
        let mut state = StateVector::zero(prog.n).amplitudes;
        let mut snapshots = Vec::new();
        if noisy {
            snapshots.reserve(prog.ops.len() + 1);
            snapshots.push(state.clone());
        }
        for op in &prog.ops {
            op.op.apply(&mut state);
            if noisy {
                snapshots.push(state.clone());
            }
        }
        let ideal_cdf = cdf(&prog.marginal(state.iter().map(|a| a.norm_sqr())));
        Self {
            prog,
            snapshots,
            ideal_cdf,
            cache: HashMap::new(),
        }
    }

    fn simulate(&self, pattern: &[(u32, u8)]) -> Vec<f64> {
        let first = pattern[0].0 as usize;
        let mut state = self.snapshots[first + 1].clone();
        let mut faults = pattern.iter().peekable();
        for (i, op) in self.prog.ops.iter().enumerate().skip(first) {
            if i > first {
                op.op.apply(&mut state);
            }
            if let Some(&&(at, pauli)) = faults.peek() {
                if at as usize == i {
                    op.op.support().apply_pauli(&mut state, pauli as usize);
                    faults.next();
                }
            }
        }
        cdf(&self.prog.marginal(state.iter().map(|a| a.norm_sqr())))
    }

    fn outcome_cdf(&mut self, pattern: &[(u32, u8)]) -> &[f64] {
        if pattern.is_empty() {
            return &self.ideal_cdf;
        }
        if !self.cache.contains_key(pattern) {
            let entry = self.simulate(pattern);
            if (self.cache.len() + 1) * entry.len() > CACHE_BUDGET {
                self.cache.clear();
            }
            self.cache.insert(pattern.to_vec(), entry);
        }
        &self.cache[pattern]
    }
}

/// Samples `shots` repetitions at every scan point.
///
/// Scan point `k` draws from its own ChaCha8 stream seeded with
/// `rng::derive_seed(seed, k)`. Per shot, in order: one uniform per noisy
/// gate (and a Pauli index when it fires), one uniform for the outcome, then
/// one uniform per measured qubit with readout error. Results therefore
/// depend only on `(circuit, shots, noise, seed)`.
pub fn run_shots(
    circuit: &Circuit,
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<RunResult, SimError> {
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    let mut points = Vec::with_capacity(circuit.scan_count());
    let mut measured = circuit.measured().to_vec();
    for k in 0..circuit.scan_count() {
        let concrete = circuit.instantiate(k)?;
        let prog = compile(&concrete, Some(noise), MAX_STATEVECTOR_QUBITS)?;
        measured = prog.measured_global.clone();
        let mut rng = rng::stream(seed, k as u64);
        let mut sampler = TrajectorySampler::new(&prog);
        let noisy: Vec<(u32, f64, usize)> = prog
            .ops
            .iter()
            .enumerate()
            .filter(|(_, o)| o.p > 0.0)
            .map(|(i, o)| (i as u32, o.p, o.op.support().paulis()))
            .collect();
        let readout: Vec<(usize, f64, f64)> = prog
            .confusion
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_identity())
            .map(|(bit, c)| (bit, 1.0 - c.f0, 1.0 - c.f1))
            .collect();
        let mut counts = vec![0u64; 1 << prog.measured.len()];
        let mut pattern: Vec<(u32, u8)> = Vec::new();
        for _ in 0..shots {
            pattern.clear();
            for &(i, p, d2) in &noisy {
                if rng.random::<f64>() < p {
                    let pauli = rng.random_range(0..d2);
                    if pauli != 0 {
                        pattern.push((i, pauli as u8));
                    }
                }
            }
            let u = rng.random::<f64>();
            let mut outcome = sample_index(sampler.outcome_cdf(&pattern), u);
            for &(bit, flip0, flip1) in &readout {
                let flip = if outcome >> bit & 1 == 1 { flip1 } else { flip0 };
                if rng.random::<f64>() < flip {
                    outcome ^= 1 << bit;
                }
            }
            counts[outcome] += 1;
        }
        let probs_exact = (noise.mode == NoiseMode::Ideal).then(|| {
            let sv = prog.final_state();
            prog.marginal(sv.amplitudes.iter().map(|a| a.norm_sqr()))
        });
        points.push(PointResult {
            index: k,
            gamma: circuit.gamma(k),
            counts,
            probs_exact,
        });
    }
    Ok(RunResult {
        measured,
        shots,
        scan: circuit.scan,
        points,
    })
}

/// Unitary of a gate sequence on `n` qubits, column `j` = image of basis `j`.
pub fn unitary(gates: &[Gate], n: usize) -> Result<Vec<Vec<C64>>, SimError> {
    let dim = 1usize << n;
    let mut cols = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut sv = StateVector {
            n,
            amplitudes: vec![ZERO; dim],
        };
        sv.amplitudes[j] = ONE;
        for g in gates {
            sv.apply_gate(g)?;
        }
        cols.push(sv.amplitudes);
    }
    Ok((0..dim).map(|r| (0..dim).map(|c| cols[c][r]).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ProbabilityTable;
    use crate::circuit::{append_parity_stage, build_ghz};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hadamard_exact() {
        let mut c = Circuit::new(1);
        c.h(0).measure(&[0]);
        let t = run_exact(&c).unwrap();
        assert!(close(t.probs[0], 0.5, 1e-15) && close(t.probs[1], 0.5, 1e-15));
    }

    #[test]
    fn ghz3_exact() {
        let t = run_exact(&build_ghz(3, 0, 3).unwrap()).unwrap();
        for (i, p) in t.probs.iter().enumerate() {
            let want = if i == 0 || i == 7 { 0.5 } else { 0.0 };
            assert!(close(*p, want, 1e-12), "{i}: {p}");
        }
    }

    #[test]
    fn idle_qubits_are_skipped() {
        let mut c = Circuit::new(14);
        c.x(13).measure(&[13]);
        let t = run_exact(&c).unwrap();
        assert_eq!(t.qubits, vec![13]);
        assert!(close(t.probs[1], 1.0, 1e-15));
    }

    #[test]
    fn width_limits() {
        let mut c = Circuit::new(7);
        for q in 0..7 {
            c.h(q);
        }
        c.measure(&[0]);
        assert_eq!(
            run_density_exact(&c, &NoiseModel::ideal(7)),
            Err(SimError::TooWide { active: 7, limit: 6 })
        );
        assert_eq!(run_shots(&c, 0, &NoiseModel::ideal(7), 1), Err(SimError::ZeroShots));
    }

    #[test]
    fn gates_are_unitary() {
        for theta in [0.0, 0.3, -1.7, 2.9, 12.0] {
            for m in [rx(theta), ry(theta), rz(theta), hadamard(), PAULI_Y] {
                for i in 0..2 {
                    for j in 0..2 {
                        let v: C64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                        let want = if i == j { ONE } else { ZERO };
                        assert!((v - want).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn norm_preserved_by_every_gate() {
        let mut sv = StateVector::zero(3);
        let gates = [
            Gate::H(0),
            Gate::Rx(1, Param::Literal(0.7)),
            Gate::Cnot { control: 0, target: 2 },
            Gate::Ry(2, Param::Literal(-1.1)),
            Gate::Cz(1, 2),
            Gate::Rz(0, Param::Literal(2.2)),
            Gate::Y(1),
        ];
        for g in &gates {
            sv.apply_gate(g).unwrap();
            assert!(close(sv.norm_sqr(), 1.0, 1e-9));
        }
    }

    #[test]
    fn density_ideal_matches_statevector() {
        let c = append_parity_stage(&build_ghz(3, 2, 10).unwrap(), ScanSpec::parity_default()).unwrap();
        let c = c.instantiate(17).unwrap();
        let a = run_exact(&c).unwrap();
        let b = run_density_exact(&c, &NoiseModel::ideal(10)).unwrap();
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert!(close(*x, *y, 1e-10));
        }
    }

    #[test]
    fn full_depolarization_is_maximally_mixed() {
        let mut noise = NoiseModel::ideal(1);
        noise.mode = NoiseMode::Calibrated;
        noise.p1[0] = 1.0;
        let mut c = Circuit::new(1);
        c.h(0).measure(&[0]);
        let t = run_density_exact(&c, &noise).unwrap();
        assert!(close(t.probs[0], 0.5, 1e-12));
        let mut c = Circuit::new(1);
        c.x(0).measure(&[0]);
        let t = run_density_exact(&c, &noise).unwrap();
        assert!(close(t.probs[0], 0.5, 1e-12));
    }

    #[test]
    fn repeated_depolarizing_matches_bloch_contraction() {
        // Each channel shrinks the Bloch vector by (1 - p); X flips its sign.
        let p = 0.07;
        let mut noise = NoiseModel::ideal(1);
        noise.mode = NoiseMode::Calibrated;
        noise.p1[0] = p;
        for m in [1usize, 2, 5, 8] {
            let mut c = Circuit::new(1);
            for _ in 0..m {
                c.x(0);
            }
            c.measure(&[0]);
            let z = (1.0 - p).powi(m as i32) * if m % 2 == 0 { 1.0 } else { -1.0 };
            let p1 = (1.0 - z) / 2.0;
            let exact = run_density_exact(&c, &noise).unwrap();
            assert!(close(exact.probs[1], p1, 1e-12), "m={m}");
            let shots = run_shots(&c, 200_000, &noise, 11).unwrap();
            let est = shots.probs_raw(0).probs[1];
            assert!(close(est, p1, 0.005), "m={m}: {est} vs {p1}");
        }
    }

    #[test]
    fn calibrated_mapping() {
        let dev = DeviceSpec::scq10();
        let n = NoiseModel::calibrated(&dev);
        assert!(close(n.p1[0], 2.0 * (1.0 - 0.9995), 1e-15));
        assert!(close(n.p2[0], 16.0 / 15.0 * (1.0 - 0.9682), 1e-15));
        assert_eq!(n.confusion[0], Confusion::new(0.985, 0.942));
        let r = NoiseModel::readout_only(&dev);
        assert!(r.p1.iter().chain(&r.p2).all(|p| *p == 0.0));
    }

    #[test]
    fn readout_error_on_excited_qubit() {
        let dev = DeviceSpec::scq10();
        let mut c = Circuit::new(10);
        c.x(0).measure(&[0]);
        let r = run_shots(&c, 1_000_000, &NoiseModel::readout_only(&dev), 5).unwrap();
        let p1 = r.probs_raw(0).probs[1];
        assert!(close(p1, 0.9420, 0.001), "{p1}");
    }

    #[test]
    fn ideal_ghz_sampling() {
        let c = build_ghz(6, 0, 10).unwrap();
        let r = run_shots(&c, 100_000, &NoiseModel::ideal(10), 3).unwrap();
        let t = r.probs_raw(0);
        assert!(close(t.probs[0] + t.probs[63], 1.0, 0.005));
        assert!(r.points[0].probs_exact.is_some());
    }

    #[test]
    fn shots_are_deterministic() {
        let dev = DeviceSpec::scq10();
        let c = append_parity_stage(&build_ghz(4, 3, 10).unwrap(), ScanSpec::linspace(-1.0, 1.0, 5)).unwrap();
        let noise = NoiseModel::calibrated(&dev);
        let a = run_shots(&c, 3000, &noise, 99).unwrap();
        let b = run_shots(&c, 3000, &noise, 99).unwrap();
        let d = run_shots(&c, 3000, &noise, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
        for p in &a.points {
            assert_eq!(p.counts.iter().sum::<u64>(), 3000);
        }
    }

    #[test]
    fn ghz2_density_matches_trajectories() {
        let dev = DeviceSpec::scq10();
        let mut noise = NoiseModel::readout_only(&dev);
        noise.p2[0] = 0.045;
        let c = build_ghz(2, 0, 10).unwrap();
        let exact = run_density_exact(&c, &noise).unwrap();
        let sampled = run_shots(&c, 1_000_000, &noise, 2024).unwrap().probs_raw(0);
        let tv = exact.total_variation(&sampled);
        assert!(tv < 0.005, "tv = {tv}");
        let total: f64 = exact.probs.iter().sum();
        assert!(close(total, 1.0, 1e-12));
    }

    #[test]
    fn unitary_of_cnot() {
        let u = unitary(&[Gate::Cnot { control: 0, target: 1 }], 2).unwrap();
        // |01> (qubit 0 set, index 1) maps to |11> (index 3).
        assert_eq!(u[3][1], ONE);
        assert_eq!(u[0][0], ONE);
    }

    #[test]
    fn cdf_skips_zero_mass() {
        let c = cdf(&[0.0, 0.5, 0.0, 0.5, 0.0]);
        assert_eq!(sample_index(&c, 0.0), 1);
        assert_eq!(sample_index(&c, 0.4999), 1);
        assert_eq!(sample_index(&c, 0.5), 3);
        assert_eq!(sample_index(&c, 0.9999999), 3);
        let _ = ProbabilityTable::new(vec![0], vec![0.5, 0.5]).unwrap();
    }
}
