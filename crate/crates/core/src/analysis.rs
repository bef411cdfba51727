//! Result pretreatment and GHZ analysis: readout correction, population,
//! parity, cosine fitting of parity oscillations and fidelity reports.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{Confusion, DeviceSpec};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("confusion matrix of qubit {qubit} is not invertible (f0 + f1 <= 1)")]
    NotInvertible { qubit: usize },
    #[error("qubit {0} has no readout calibration")]
    UnknownQubit(usize),
    #[error("parity fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("parity fit design matrix is degenerate (all angles congruent mod 2π/N)")]
    DegenerateFit,
    #[error("table has {got} entries, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Outcome distribution over measured qubits.
///
/// Bit `k` of an index is the outcome of `qubits[k]`; rendered bitstrings
/// put `qubits[0]` leftmost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub qubits: Vec<usize>,
    pub probs: Vec<f64>,
}

impl ProbabilityTable {
    pub fn new(qubits: Vec<usize>, probs: Vec<f64>) -> Result<Self, AnalysisError> {
        let expected = 1usize << qubits.len();
        if probs.len() != expected {
            return Err(AnalysisError::Shape {
                expected,
                got: probs.len(),
            });
        }
        Ok(Self { qubits, probs })
    }

    pub fn from_counts(qubits: Vec<usize>, counts: &[u64]) -> Result<Self, AnalysisError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(AnalysisError::Invalid("no shots recorded".into()));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(qubits, probs)
    }

    pub fn width(&self) -> usize {
        self.qubits.len()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn bitstring(&self, index: usize) -> String {
        bitstring(index, self.width())
    }

    pub fn index_of(&self, bits: &str) -> Option<usize> {
        parse_bitstring(bits, self.width())
    }

    pub fn get(&self, bits: &str) -> Option<f64> {
        self.index_of(bits).map(|i| self.probs[i])
    }

    /// Every outcome, keyed by bitstring.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (self.bitstring(i), *p))
            .collect()
    }

    pub fn total_variation(&self, other: &ProbabilityTable) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

pub fn bitstring(index: usize, width: usize) -> String {
    (0..width)
        .map(|k| if index >> k & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bitstring(bits: &str, width: usize) -> Option<usize> {
    if bits.len() != width {
        return None;
    }
    bits.chars().enumerate().try_fold(0usize, |acc, (k, ch)| match ch {
        '0' => Some(acc),
        '1' => Some(acc | 1 << k),
        _ => None,
    })
}

/// Applies `mats[k]` along qubit axis `k` of a 2^m probability vector, one
/// 2×2 contraction per axis; the full Kronecker product is never formed.
pub fn contract_per_qubit(probs: &mut [f64], mats: &[[[f64; 2]; 2]]) {
    for (k, m) in mats.iter().enumerate() {
        let bit = 1usize << k;
        for i in 0..probs.len() {
            if i & bit == 0 {
                let (a, b) = (probs[i], probs[i | bit]);
                probs[i] = m[0][0] * a + m[0][1] * b;
                probs[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }
}

fn confusions_for(table: &ProbabilityTable, device: &DeviceSpec) -> Result<Vec<Confusion>, AnalysisError> {
    table
        .qubits
        .iter()
        .map(|&q| {
            device
                .qubits
                .get(q)
                .map(|s| s.confusion())
                .ok_or(AnalysisError::UnknownQubit(q))
        })
        .collect()
}

/// Forward readout model: `M · p` with `M = ⊗ M_j`.
pub fn confuse(table: &ProbabilityTable, confusions: &[Confusion]) -> ProbabilityTable {
    let mats: Vec<_> = confusions.iter().map(|c| c.matrix()).collect();
    let mut probs = table.probs.clone();
    contract_per_qubit(&mut probs, &mats);
    ProbabilityTable {
        qubits: table.qubits.clone(),
        probs,
    }
}

/// `M⁻¹ · p` with explicit per-qubit confusions (`confusions[k]` for `qubits[k]`).
pub fn readout_correct_with(
    raw: &ProbabilityTable,
    confusions: &[Confusion],
) -> Result<ProbabilityTable, AnalysisError> {
    if confusions.len() != raw.width() {
        return Err(AnalysisError::Shape {
            expected: raw.width(),
            got: confusions.len(),
        });
    }
    let mats = confusions
        .iter()
        .zip(&raw.qubits)
        .map(|(c, &q)| c.inverse().ok_or(AnalysisError::NotInvertible { qubit: q }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut probs = raw.probs.clone();
    contract_per_qubit(&mut probs, &mats);
    Ok(ProbabilityTable {
        qubits: raw.qubits.clone(),
        probs,
    })
}

/// Readout correction with the device's per-qubit assignment fidelities.
/// Negative entries are kept; see [`project_to_simplex`] for a clipped view.
pub fn readout_correct(
    raw: &ProbabilityTable,
    device: &DeviceSpec,
) -> Result<ProbabilityTable, AnalysisError> {
    readout_correct_with(raw, &confusions_for(raw, device)?)
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(table: &ProbabilityTable) -> ProbabilityTable {
    let mut sorted = table.probs.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    ProbabilityTable {
        qubits: table.qubits.clone(),
        probs: table.probs.iter().map(|p| (p - theta).max(0.0)).collect(),
    }
}

/// `p(0…0) + p(1…1)`.
pub fn ghz_population(table: &ProbabilityTable) -> f64 {
    let all_ones = table.probs.len() - 1;
    if all_ones == 0 {
        table.probs[0]
    } else {
        table.probs[0] + table.probs[all_ones]
    }
}

/// Even-weight minus odd-weight probability mass.
pub fn parity(table: &ProbabilityTable) -> f64 {
    table
        .probs
        .iter()
        .enumerate()
        .map(|(i, p)| if i.count_ones() % 2 == 0 { *p } else { -*p })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityCurve {
    pub n: usize,
    pub gammas: Vec<f64>,
    pub parities: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityFit {
    pub coherence: f64,
    pub phase: f64,
    pub rmse: f64,
}

/// Least-squares fit of `C·cos(Nγ + ψ)` with `N` fixed, via the linear model
/// `A·cos Nγ + B·sin Nγ`; `C = √(A²+B²)`, `ψ = atan2(-B, A)`.
pub fn fit_parity(curve: &ParityCurve) -> Result<ParityFit, AnalysisError> {
    fit_parity_at(curve, curve.n)
}

/// As [`fit_parity`] but with an explicit oscillation multiple.
pub fn fit_parity_at(curve: &ParityCurve, n: usize) -> Result<ParityFit, AnalysisError> {
    let len = curve.gammas.len();
    if len != curve.parities.len() {
        return Err(AnalysisError::Shape {
            expected: len,
            got: curve.parities.len(),
        });
    }
    if len < 3 {
        return Err(AnalysisError::TooFewPoints(len));
    }
    if n == 0 {
        return Err(AnalysisError::Invalid("oscillation multiple must be >= 1".into()));
    }
    let nf = n as f64;
    let (mut scc, mut sss, mut scs, mut scy, mut ssy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&g, &y) in curve.gammas.iter().zip(&curve.parities) {
        let (s, c) = (nf * g).sin_cos();
        scc += c * c;
        sss += s * s;
        scs += c * s;
        scy += c * y;
        ssy += s * y;
    }
    let det = scc * sss - scs * scs;
    // det <= (len/2)^2; treat a relative collapse as rank deficiency.
    if det <= 1e-10 * (len * len) as f64 {
        return Err(AnalysisError::DegenerateFit);
    }
    let a = (sss * scy - scs * ssy) / det;
    let b = (scc * ssy - scs * scy) / det;
    let sse: f64 = curve
        .gammas
        .iter()
        .zip(&curve.parities)
        .map(|(&g, &y)| {
            let (s, c) = (nf * g).sin_cos();
            (y - a * c - b * s).powi(2)
        })
        .sum();
    Ok(ParityFit {
        coherence: a.hypot(b),
        phase: (-b).atan2(a),
        rmse: (sse / len as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBars {
    pub population: f64,
    pub coherence: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhzReport {
    pub offset: usize,
    pub n: usize,
    pub population: f64,
    pub coherence: f64,
    pub phase: f64,
    pub fidelity: f64,
    pub genuine_entanglement: bool,
    pub fit_rmse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<ErrorBars>,
}

impl GhzReport {
    /// Label such as `Q1-Q6` (1-based, as the chain is usually drawn).
    pub fn block_label(&self) -> String {
        format!("Q{}-Q{}", self.offset + 1, self.offset + self.n)
    }
}

pub fn ghz_fidelity(population: f64, coherence: f64) -> f64 {
    (population + coherence) / 2.0
}

pub fn ghz_report_from_values(
    offset: usize,
    n: usize,
    population: f64,
    fit: ParityFit,
) -> GhzReport {
    let fidelity = ghz_fidelity(population, fit.coherence);
    GhzReport {
        offset,
        n,
        population,
        coherence: fit.coherence,
        phase: fit.phase,
        fidelity,
        genuine_entanglement: fidelity > 0.5,
        fit_rmse: fit.rmse,
        sigma: None,
    }
}

/// Combines the population measurement and the parity scan of one block.
pub fn ghz_report(
    offset: usize,
    population_table: &ProbabilityTable,
    curve: &ParityCurve,
) -> Result<GhzReport, AnalysisError> {
    if population_table.width() != curve.n {
        return Err(AnalysisError::Invalid(format!(
            "population table covers {} qubits but the parity curve is for {}",
            population_table.width(),
            curve.n
        )));
    }
    let fit = fit_parity(curve)?;
    Ok(ghz_report_from_values(
        offset,
        curve.n,
        ghz_population(population_table),
        fit,
    ))
}

fn resample_counts<R: Rng>(counts: &[u64], rng: &mut R) -> Vec<u64> {
    let mut remaining: u64 = counts.iter().sum();
    let mut mass_left = remaining as f64;
    let mut out = vec![0u64; counts.len()];
    for (i, &c) in counts.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if c == 0 {
            continue;
        }
        let p = (c as f64 / mass_left).min(1.0);
        let draw = Binomial::new(remaining, p).map(|b| b.sample(rng)).unwrap_or(remaining);
        out[i] = draw;
        remaining -= draw;
        mass_left -= c as f64;
    }
    out
}

/// Raw shot counts for one block: a population run and a parity scan.
pub struct BlockCounts<'a> {
    pub qubits: &'a [usize],
    pub population: &'a [u64],
    pub gammas: &'a [f64],
    pub parity_points: &'a [Vec<u64>],
}

/// Nonparametric bootstrap over shots: each resample redraws every count
/// vector multinomially, re-applies readout correction (when given) and
/// recomputes P, C and F. Returns one-sigma spreads.
pub fn bootstrap_errors(
    block: &BlockCounts<'_>,
    correction: Option<&[Confusion]>,
    resamples: usize,
    seed: u64,
) -> Result<ErrorBars, AnalysisError> {
    let n = block.qubits.len();
    let table = |counts: &[u64]| -> Result<ProbabilityTable, AnalysisError> {
        let t = ProbabilityTable::from_counts(block.qubits.to_vec(), counts)?;
        match correction {
            Some(c) => readout_correct_with(&t, c),
            None => Ok(t),
        }
    };
    let mut rng = rng::stream(seed, 0xB007);
    let mut samples = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let pop = ghz_population(&table(&resample_counts(block.population, &mut rng))?);
        let parities = block
            .parity_points
            .iter()
            .map(|c| table(&resample_counts(c, &mut rng)).map(|t| parity(&t)))
            .collect::<Result<Vec<_>, _>>()?;
        let fit = fit_parity(&ParityCurve {
            n,
            gammas: block.gammas.to_vec(),
            parities,
        })?;
        samples.push((pop, fit.coherence, ghz_fidelity(pop, fit.coherence)));
    }
    let sd = |f: fn(&(f64, f64, f64)) -> f64| -> f64 {
        if samples.len() < 2 {
            return 0.0;
        }
        let mean = samples.iter().map(f).sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>()
            / (samples.len() - 1) as f64;
        var.sqrt()
    };
    Ok(ErrorBars {
        population: sd(|s| s.0),
        coherence: sd(|s| s.1),
        fidelity: sd(|s| s.2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn table(qubits: Vec<usize>, probs: Vec<f64>) -> ProbabilityTable {
        ProbabilityTable::new(qubits, probs).unwrap()
    }

    #[test]
    fn bitstring_order() {
        let t = table(vec![3, 7], vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(t.bitstring(1), "10");
        assert_eq!(t.get("01"), Some(0.3));
        assert_eq!(t.index_of("2x"), None);
    }

    #[test]
    fn identity_correction() {
        let raw = table(vec![0, 1], vec![0.4, 0.1, 0.2, 0.3]);
        let out = readout_correct_with(&raw, &[Confusion::IDENTITY; 2]).unwrap();
        assert_eq!(out, raw);
    }

    #[test]
    fn single_qubit_correction_recovers_uniform() {
        let c = Confusion::new(0.985, 0.942);
        let raw = confuse(&table(vec![0], vec![0.5, 0.5]), &[c]);
        let fixed = readout_correct(&raw, &DeviceSpec::scq10()).unwrap();
        assert!((fixed.probs[0] - 0.5).abs() < 1e-12);
        assert!((fixed.probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn correction_rejects_singular() {
        let raw = table(vec![2], vec![0.5, 0.5]);
        assert_eq!(
            readout_correct_with(&raw, &[Confusion::new(0.5, 0.5)]),
            Err(AnalysisError::NotInvertible { qubit: 2 })
        );
    }

    #[test]
    fn simplex_projection() {
        let t = table(vec![0], vec![1.05, -0.05]);
        let p = project_to_simplex(&t);
        assert!((p.probs[0] - 1.0).abs() < 1e-15 && p.probs[1] == 0.0);
        let ok = table(vec![0, 1], vec![0.1, 0.2, 0.3, 0.4]);
        let p = project_to_simplex(&ok);
        for (a, b) in p.probs.iter().zip(&ok.probs) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn population_and_parity() {
        let ghz = table(vec![0, 1, 2], vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        assert_eq!(ghz_population(&ghz), 1.0);
        let uniform = table(vec![0, 1, 2], vec![0.125; 8]);
        assert_eq!(ghz_population(&uniform), 2.0 / 8.0);
        assert_eq!(parity(&table(vec![0, 1], vec![1.0, 0.0, 0.0, 0.0])), 1.0);
        assert_eq!(parity(&table(vec![0, 1], vec![0.0, 0.0, 1.0, 0.0])), -1.0);
        assert_eq!(parity(&table(vec![0, 1], vec![0.25; 4])), 0.0);
    }

    fn synthetic(n: usize, c: f64, psi: f64) -> ParityCurve {
        let gammas: Vec<f64> = (0..51).map(|k| -FRAC_PI_2 + k as f64 * std::f64::consts::PI / 50.0).collect();
        let parities = gammas.iter().map(|g| c * (n as f64 * g + psi).cos()).collect();
        ParityCurve { n, gammas, parities }
    }

    #[test]
    fn fit_exact_cosines() {
        let f = fit_parity(&synthetic(6, 1.0, 0.0)).unwrap();
        assert!((f.coherence - 1.0).abs() < 1e-10);
        assert!(f.phase.abs() < 1e-10);
        let f = fit_parity(&synthetic(10, 0.777, 0.3)).unwrap();
        assert!((f.coherence - 0.777).abs() < 1e-9);
        assert!((f.phase - 0.3).abs() < 1e-9);
        assert!(f.rmse < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let mut c = synthetic(2, 1.0, 0.0);
        c.gammas.truncate(2);
        c.parities.truncate(2);
        assert_eq!(fit_parity(&c), Err(AnalysisError::TooFewPoints(2)));
        // All angles congruent mod 2π/N.
        let c = ParityCurve {
            n: 2,
            gammas: vec![0.1, 0.1 + std::f64::consts::PI, 0.1 - std::f64::consts::PI],
            parities: vec![0.3, 0.3, 0.3],
        };
        assert_eq!(fit_parity(&c), Err(AnalysisError::DegenerateFit));
    }

    #[test]
    fn report_arithmetic() {
        let fit = |c| ParityFit { coherence: c, phase: 0.0, rmse: 0.0 };
        let r = ghz_report_from_values(0, 10, 1.0, fit(1.0));
        assert_eq!(r.fidelity, 1.0);
        assert!(r.genuine_entanglement);
        let r = ghz_report_from_values(0, 10, 0.801, fit(0.756));
        assert!((r.fidelity - 0.7785).abs() < 1e-12);
        assert!(r.genuine_entanglement);
        assert_eq!(r.block_label(), "Q1-Q10");
        let r = ghz_report_from_values(0, 10, 0.5, fit(0.4));
        assert!((r.fidelity - 0.45).abs() < 1e-12);
        assert!(!r.genuine_entanglement);
    }

    #[test]
    fn resampling_preserves_total() {
        let mut r = rng::stream(1, 1);
        let counts = vec![10, 0, 500, 3, 0, 487];
        for _ in 0..20 {
            let s = resample_counts(&counts, &mut r);
            assert_eq!(s.iter().sum::<u64>(), 1000);
            assert_eq!(s[1], 0);
            assert_eq!(s[4], 0);
        }
    }
}
