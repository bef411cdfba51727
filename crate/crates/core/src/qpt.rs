//! Two-qubit quantum process tomography.
//!
//! Sixteen product input states from `{|0⟩, |1⟩, |+⟩, (|0⟩-i|1⟩)/√2}` are
//! pushed through the process, each output is reconstructed by linear
//! inversion from nine Pauli measurement settings, and the χ matrix is
//! obtained by inverting the fixed linear map `χ ↦ {Σ χ_mn E_m ρ_s E_n†}`.
//!
//! Operator basis: `E_{4i+j} = A_i ⊗ A_j` with `A = [I, X, -iY, Z]`. In every
//! 4×4 matrix here, the first tensor factor is `pair.0`, i.e. the basis index
//! is `2·bit(pair.0) + bit(pair.1)`.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{readout_correct_with, AnalysisError, ProbabilityTable};
use crate::circuit::{Circuit, Gate, Param};
use crate::device::Confusion;
use crate::rng;
use crate::sim::{self, NoiseModel, SimError};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum QptError {
    #[error("qubits {0} and {1} are not an adjacent pair")]
    NotAdjacent(usize, usize),
    #[error("pair ({a},{b}) does not fit in a {width}-qubit device")]
    OutOfRange { a: usize, b: usize, width: usize },
    #[error("process gate {0} acts outside the tomography pair")]
    ForeignGate(String),
    #[error("executor returned {got} tables for {expected} circuits")]
    BatchSize { expected: usize, got: usize },
    #[error("table for circuit {index} does not cover the pair")]
    TableQubits { index: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("executor failed: {0}")]
    Executor(BoxError),
}

/// Runs a batch of concrete circuits and returns one (optionally readout
/// corrected) probability table per circuit, in order.
pub trait Executor {
    fn run_batch(&mut self, circuits: &[Circuit]) -> Result<Vec<ProbabilityTable>, QptError>;
}

/// Exact distributions via density-matrix evolution.
pub struct ExactExecutor {
    pub noise: NoiseModel,
    pub correct: bool,
}

impl Executor for ExactExecutor {
    fn run_batch(&mut self, circuits: &[Circuit]) -> Result<Vec<ProbabilityTable>, QptError> {
        circuits
            .iter()
            .map(|c| {
                let t = sim::run_density_exact(c, &self.noise)?;
                maybe_correct(t, self.correct.then_some(&self.noise))
            })
            .collect()
    }
}

/// Sampled distributions; circuit `i` uses seed `derive_seed(seed, i)`.
pub struct ShotExecutor {
    pub noise: NoiseModel,
    pub shots: u64,
    pub seed: u64,
    pub correct: bool,
}

impl Executor for ShotExecutor {
    fn run_batch(&mut self, circuits: &[Circuit]) -> Result<Vec<ProbabilityTable>, QptError> {
        circuits
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let seed = rng::derive_seed(self.seed, i as u64);
                let r = sim::run_shots(c, self.shots, &self.noise, seed)?;
                maybe_correct(r.probs_raw(0), self.correct.then_some(&self.noise))
            })
            .collect()
    }
}

fn maybe_correct(
    table: ProbabilityTable,
    noise: Option<&NoiseModel>,
) -> Result<ProbabilityTable, QptError> {
    let Some(noise) = noise else {
        return Ok(table);
    };
    let confusions: Vec<Confusion> = table.qubits.iter().map(|&q| noise.confusion[q]).collect();
    Ok(readout_correct_with(&table, &confusions)?)
}

/// 16×16 χ matrix, row-major, serialized as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessMatrix {
    pub chi: Vec<C64>,
}

impl ProcessMatrix {
    pub fn get(&self, m: usize, n: usize) -> C64 {
        self.chi[m * 16 + n]
    }

    pub fn trace(&self) -> C64 {
        (0..16).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|χ_mn - conj(χ_nm)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in 0..16 {
            for n in 0..16 {
                worst = worst.max((self.get(m, n) - self.get(n, m).conj()).norm());
            }
        }
        worst
    }

    /// χ of the unitary channel `ρ ↦ UρU†`: `χ = u u†` with `u_n = Tr(E_n† U)/4`.
    pub fn from_unitary(u: &Matrix4<C64>) -> Self {
        let basis = operator_basis();
        let coeff: Vec<C64> = basis
            .iter()
            .map(|e| (e.adjoint() * u).trace() / 4.0)
            .collect();
        let chi = (0..256)
            .map(|k| coeff[k / 16] * coeff[k % 16].conj())
            .collect();
        Self { chi }
    }

    /// χ of the identity process.
    pub fn identity() -> Self {
        let mut chi = vec![C64::new(0.0, 0.0); 256];
        chi[0] = C64::new(1.0, 0.0);
        Self { chi }
    }

    /// Applies the process to a 4×4 density matrix.
    pub fn apply(&self, rho: &Matrix4<C64>) -> Matrix4<C64> {
        let basis = operator_basis();
        let mut out = Matrix4::zeros();
        for m in 0..16 {
            for n in 0..16 {
                let c = self.get(m, n);
                if c != C64::new(0.0, 0.0) {
                    out += (basis[m] * rho * basis[n].adjoint()) * c;
                }
            }
        }
        out
    }
}

/// `Tr(χ_exp · χ_ideal)`; the imaginary part is returned for diagnostics.
pub fn process_fidelity(exp: &ProcessMatrix, ideal: &ProcessMatrix) -> (f64, f64) {
    let mut t = C64::new(0.0, 0.0);
    for m in 0..16 {
        for n in 0..16 {
            t += exp.get(m, n) * ideal.get(n, m);
        }
    }
    (t.re, t.im)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn single_basis() -> [Matrix2<C64>; 4] {
    let (o, z) = (c(1.0, 0.0), c(0.0, 0.0));
    [
        Matrix2::new(o, z, z, o),
        Matrix2::new(z, o, o, z),
        // -iY
        Matrix2::new(z, -o, o, z),
        Matrix2::new(o, z, z, -o),
    ]
}

fn pauli(k: usize) -> Matrix2<C64> {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match k {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(z, o, o, z),
        2 => Matrix2::new(z, -i, i, z),
        _ => Matrix2::new(o, z, z, -o),
    }
}

fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// The 16 operators `E_n`, in χ index order.
pub fn operator_basis() -> &'static [Matrix4<C64>; 16] {
    static BASIS: OnceLock<[Matrix4<C64>; 16]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let a = single_basis();
        std::array::from_fn(|n| kron(&a[n / 4], &a[n % 4]))
    })
}

/// Single-qubit preparations, in input-state order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prep {
    Zero,
    One,
    Plus,
    MinusI,
}

pub const PREPS: [Prep; 4] = [Prep::Zero, Prep::One, Prep::Plus, Prep::MinusI];

impl Prep {
    fn gates(self, q: usize) -> Vec<Gate> {
        match self {
            Prep::Zero => vec![],
            Prep::One => vec![Gate::X(q)],
            Prep::Plus => vec![Gate::Ry(q, Param::Literal(FRAC_PI_2))],
            Prep::MinusI => vec![Gate::Rx(q, Param::Literal(FRAC_PI_2))],
        }
    }

    pub fn density(self) -> Matrix2<C64> {
        let h = c(0.5, 0.0);
        let (z, o) = (c(0.0, 0.0), c(1.0, 0.0));
        match self {
            Prep::Zero => Matrix2::new(o, z, z, z),
            Prep::One => Matrix2::new(z, z, z, o),
            Prep::Plus => Matrix2::new(h, h, h, h),
            // (|0⟩ - i|1⟩)/√2
            Prep::MinusI => Matrix2::new(h, c(0.0, 0.5), c(0.0, -0.5), h),
        }
    }
}

/// Measurement axis, realized by a pre-rotation before a Z readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

impl Axis {
    fn gates(self, q: usize) -> Vec<Gate> {
        match self {
            Axis::X => vec![Gate::Ry(q, Param::Literal(-FRAC_PI_2))],
            Axis::Y => vec![Gate::Rx(q, Param::Literal(FRAC_PI_2))],
            Axis::Z => vec![],
        }
    }

    fn pauli_index(self) -> usize {
        match self {
            Axis::X => 1,
            Axis::Y => 2,
            Axis::Z => 3,
        }
    }
}

fn check_pair(pair: (usize, usize), width: usize) -> Result<(), QptError> {
    let (a, b) = pair;
    if a.max(b) >= width {
        return Err(QptError::OutOfRange { a, b, width });
    }
    if a.abs_diff(b) != 1 {
        return Err(QptError::NotAdjacent(a, b));
    }
    Ok(())
}

/// The 144 circuits of the protocol: input state `s = 4·i_a + i_b`,
/// setting `t = 3·axis_a + axis_b`, circuit index `9·s + t`.
pub fn tomography_circuits(
    width: usize,
    pair: (usize, usize),
    process: &[Gate],
) -> Result<Vec<Circuit>, QptError> {
    check_pair(pair, width)?;
    let (a, b) = pair;
    if let Some(g) = process
        .iter()
        .find(|g| g.is_measure() || g.qubits().iter().any(|&q| q != a && q != b))
    {
        return Err(QptError::ForeignGate(g.to_string()));
    }
    let mut out = Vec::with_capacity(144);
    for pa in PREPS {
        for pb in PREPS {
            for xa in AXES {
                for xb in AXES {
                    let mut c = Circuit::new(width);
                    c.gates.extend(pa.gates(a));
                    c.gates.extend(pb.gates(b));
                    c.gates.extend(process.iter().cloned());
                    c.gates.extend(xa.gates(a));
                    c.gates.extend(xb.gates(b));
                    c.measure(&[a, b]);
                    out.push(c);
                }
            }
        }
    }
    Ok(out)
}

/// Probability of outcome `(bit_a, bit_b)` from a table over the pair.
fn outcome(table: &ProbabilityTable, pair: (usize, usize), bit_a: usize, bit_b: usize) -> Option<f64> {
    let ka = table.qubits.iter().position(|&q| q == pair.0)?;
    let kb = table.qubits.iter().position(|&q| q == pair.1)?;
    Some(table.probs[bit_a << ka | bit_b << kb])
}

/// Linear-inversion state tomography from the nine settings (`t = 3·axis_a + axis_b`).
/// One-body expectations are averaged over the three settings that contain them.
pub fn reconstruct_state(
    tables: &[ProbabilityTable],
    pair: (usize, usize),
) -> Option<Matrix4<C64>> {
    let mut t = [[0.0f64; 4]; 4];
    t[0][0] = 1.0;
    for (ia, xa) in AXES.iter().enumerate() {
        for (ib, xb) in AXES.iter().enumerate() {
            let table = &tables[3 * ia + ib];
            let (pa, pb) = (xa.pauli_index(), xb.pauli_index());
            for bit_a in 0..2 {
                for bit_b in 0..2 {
                    let p = outcome(table, pair, bit_a, bit_b)?;
                    let sa = if bit_a == 0 { 1.0 } else { -1.0 };
                    let sb = if bit_b == 0 { 1.0 } else { -1.0 };
                    t[pa][pb] += sa * sb * p;
                    t[pa][0] += sa * p / 3.0;
                    t[0][pb] += sb * p / 3.0;
                }
            }
        }
    }
    let mut rho = Matrix4::zeros();
    for (i, row) in t.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            rho += kron(&pauli(i), &pauli(j)) * c(v / 4.0, 0.0);
        }
    }
    Some(rho)
}

/// Input density matrices in state order.
pub fn input_states() -> Vec<Matrix4<C64>> {
    let mut v = Vec::with_capacity(16);
    for pa in PREPS {
        for pb in PREPS {
            v.push(kron(&pa.density(), &pb.density()));
        }
    }
    v
}

fn inverse_map() -> &'static DMatrix<C64> {
    static INV: OnceLock<DMatrix<C64>> = OnceLock::new();
    INV.get_or_init(|| {
        let basis = operator_basis();
        let states = input_states();
        let mut a = DMatrix::<C64>::zeros(256, 256);
        for m in 0..16 {
            for n in 0..16 {
                let col = m * 16 + n;
                for (s, rho) in states.iter().enumerate() {
                    let out = basis[m] * rho * basis[n].adjoint();
                    for r in 0..4 {
                        for cc in 0..4 {
                            a[(s * 16 + r * 4 + cc, col)] = out[(r, cc)];
                        }
                    }
                }
            }
        }
        a.lu()
            .try_inverse()
            .expect("16 input states and the operator basis are both complete")
    })
}

/// χ from the output states of the 16 inputs, made Hermitian and unit trace.
pub fn chi_from_outputs(outputs: &[Matrix4<C64>]) -> ProcessMatrix {
    assert_eq!(outputs.len(), 16, "one output state per input state");
    let b = DVector::from_iterator(
        256,
        outputs
            .iter()
            .flat_map(|rho| (0..16).map(move |k| rho[(k / 4, k % 4)])),
    );
    let x = inverse_map() * b;
    let mut chi = vec![C64::new(0.0, 0.0); 256];
    for m in 0..16 {
        for n in 0..16 {
            chi[m * 16 + n] = (x[m * 16 + n] + x[n * 16 + m].conj()) / 2.0;
        }
    }
    let tr: f64 = (0..16).map(|i| chi[i * 17].re).sum();
    chi.iter_mut().for_each(|v| *v /= tr);
    ProcessMatrix { chi }
}

/// Full protocol against an executor.
pub fn qpt_two_qubit(
    executor: &mut dyn Executor,
    width: usize,
    pair: (usize, usize),
    process: &[Gate],
) -> Result<ProcessMatrix, QptError> {
    let circuits = tomography_circuits(width, pair, process)?;
    let tables = executor.run_batch(&circuits)?;
    if tables.len() != circuits.len() {
        return Err(QptError::BatchSize {
            expected: circuits.len(),
            got: tables.len(),
        });
    }
    let outputs = tables
        .chunks(9)
        .enumerate()
        .map(|(s, chunk)| reconstruct_state(chunk, pair).ok_or(QptError::TableQubits { index: 9 * s }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(chi_from_outputs(&outputs))
}

/// 4×4 unitary of a gate list acting on `pair`, in this module's index order.
pub fn pair_unitary(process: &[Gate], pair: (usize, usize)) -> Result<Matrix4<C64>, QptError> {
    let (a, b) = pair;
    let mut local = Vec::with_capacity(process.len());
    for g in process {
        if g.qubits().iter().any(|&q| q != a && q != b) {
            return Err(QptError::ForeignGate(g.to_string()));
        }
        // pair.0 is the high bit, pair.1 the low bit.
        local.push(g.remap(|q| if q == a { 1 } else { 0 }));
    }
    let u = sim::unitary(&local, 2)?;
    Ok(Matrix4::from_fn(|r, col| u[r][col]))
}

/// Ideal χ of a gate list on `pair`.
pub fn ideal_chi(process: &[Gate], pair: (usize, usize)) -> Result<ProcessMatrix, QptError> {
    Ok(ProcessMatrix::from_unitary(&pair_unitary(process, pair)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthogonal() {
        let b = operator_basis();
        for m in 0..16 {
            for n in 0..16 {
                let ip = (b[m].adjoint() * b[n]).trace();
                let want = if m == n { 4.0 } else { 0.0 };
                assert!((ip - c(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cz_against_identity_is_quarter() {
        let cz = ideal_chi(&[Gate::Cz(0, 1)], (0, 1)).unwrap();
        let (f, im) = process_fidelity(&ProcessMatrix::identity(), &cz);
        assert!((f - 0.25).abs() < 1e-12 && im.abs() < 1e-12);
        let (f, _) = process_fidelity(&cz, &cz);
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_cz_round_trip_without_sampling() {
        let chi = ideal_chi(&[Gate::Cz(3, 4)], (3, 4)).unwrap();
        let outputs: Vec<_> = input_states().iter().map(|r| chi.apply(r)).collect();
        let rebuilt = chi_from_outputs(&outputs);
        let (f, _) = process_fidelity(&rebuilt, &chi);
        assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_pairs() {
        assert!(matches!(
            tomography_circuits(10, (0, 2), &[]),
            Err(QptError::NotAdjacent(0, 2))
        ));
        assert!(matches!(
            tomography_circuits(10, (9, 10), &[]),
            Err(QptError::OutOfRange { .. })
        ));
        assert!(matches!(
            tomography_circuits(10, (0, 1), &[Gate::X(5)]),
            Err(QptError::ForeignGate(_))
        ));
        assert_eq!(tomography_circuits(10, (5, 4), &[Gate::Cz(5, 4)]).unwrap().len(), 144);
    }

    #[test]
    fn exact_ideal_cz() {
        let mut ex = ExactExecutor {
            noise: NoiseModel::ideal(10),
            correct: false,
        };
        let chi = qpt_two_qubit(&mut ex, 10, (0, 1), &[Gate::Cz(0, 1)]).unwrap();
        let ideal = ideal_chi(&[Gate::Cz(0, 1)], (0, 1)).unwrap();
        let (f, _) = process_fidelity(&chi, &ideal);
        assert!((f - 1.0).abs() < 1e-9, "{f}");
        assert!(chi.hermiticity_defect() < 1e-9);
        assert!((chi.trace().re - 1.0).abs() < 1e-6);
    }
}
