//! Calibrated model of the qubit chain and Z-crosstalk compensation.
//!
//! The shipped `scq10` document holds the device tables verbatim. Every
//! decimal is stored as a string of record so a load/save cycle never
//! perturbs a digit.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Source of the default 10-qubit device document.
pub const SCQ10_TOML: &str = include_str!("../data/scq10.toml");

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("malformed device document: {0}")]
    Malformed(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("crosstalk matrix is singular (pivot {pivot:.3e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> DeviceError {
    DeviceError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// A decimal number that remembers the text it was read from.
#[derive(Clone, PartialEq)]
pub struct Decimal {
    text: String,
    value: f64,
}

impl Decimal {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl fmt::Debug for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl FromStr for Decimal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let value: f64 = text
            .parse()
            .map_err(|_| format!("not a decimal number: {s:?}"))?;
        if !value.is_finite() {
            return Err(format!("not a finite decimal: {s:?}"));
        }
        Ok(Self {
            text: text.to_string(),
            value,
        })
    }
}

impl From<f64> for Decimal {
    fn from(value: f64) -> Self {
        Self {
            text: value.to_string(),
            value,
        }
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitSpec {
    pub index: usize,
    pub omega_sweet_ghz: Decimal,
    pub omega_idle_ghz: Decimal,
    pub omega_readout_ghz: Decimal,
    pub anharmonicity_ghz: Decimal,
    pub t1_us: Decimal,
    pub t2_star_us: Decimal,
    /// P(read 0 | prepared 0).
    pub f0: Decimal,
    /// P(read 1 | prepared 1).
    pub f1: Decimal,
    pub x_gate_fidelity: Decimal,
    pub x_half_gate_fidelity: Decimal,
}

impl QubitSpec {
    /// Column-stochastic readout confusion matrix `[[f0, 1-f1], [1-f0, f1]]`.
    pub fn confusion(&self) -> Confusion {
        Confusion::new(self.f0.value(), self.f1.value())
    }
}

/// Single-qubit readout confusion, `M = [[f0, 1-f1], [1-f0, f1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub f0: f64,
    pub f1: f64,
}

impl Confusion {
    pub const IDENTITY: Confusion = Confusion { f0: 1.0, f1: 1.0 };

    pub fn new(f0: f64, f1: f64) -> Self {
        Self { f0, f1 }
    }

    pub fn is_identity(&self) -> bool {
        self.f0 == 1.0 && self.f1 == 1.0
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.f0, 1.0 - self.f1], [1.0 - self.f0, self.f1]]
    }

    pub fn determinant(&self) -> f64 {
        self.f0 + self.f1 - 1.0
    }

    /// `None` when `f0 + f1 <= 1`.
    pub fn inverse(&self) -> Option<[[f64; 2]; 2]> {
        let det = self.determinant();
        if det <= 0.0 {
            return None;
        }
        Some([
            [self.f1 / det, -(1.0 - self.f1) / det],
            [-(1.0 - self.f0) / det, self.f0 / det],
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerSpec {
    pub pair: [usize; 2],
    pub g_mhz: Decimal,
    /// Interaction frequency of the lower qubit of the pair.
    pub omega_interact_fwd_ghz: Decimal,
    /// Interaction frequency of the upper qubit of the pair.
    pub omega_interact_rev_ghz: Decimal,
    pub cz_duration_ns: Decimal,
    pub cz_process_fidelity: Decimal,
}

/// `m[i][j]` is the Z bias qubit `j` senses per unit bias on qubit `i`'s line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkMatrix {
    pub n: usize,
    pub m: Vec<Vec<Decimal>>,
}

impl CrosstalkMatrix {
    pub fn identity(n: usize) -> Self {
        let m = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Decimal::from(if i == j { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        Self { n, m }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        Self {
            n: rows.len(),
            m: rows
                .iter()
                .map(|r| r.iter().copied().map(Decimal::from).collect())
                .collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j].value()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `m · v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, DeviceError> {
        if v.len() != self.n {
            return Err(DeviceError::Dimension {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect())
    }

    fn validate(&self) -> Result<(), DeviceError> {
        if self.m.len() != self.n {
            return Err(invalid(
                "crosstalk.m",
                format!("expected {} rows, got {}", self.n, self.m.len()),
            ));
        }
        for (i, row) in self.m.iter().enumerate() {
            if row.len() != self.n {
                return Err(invalid(
                    format!("crosstalk.m[{i}]"),
                    format!("expected {} columns, got {}", self.n, row.len()),
                ));
            }
            if row[i].value() != 1.0 {
                return Err(invalid(
                    format!("crosstalk.m[{i}][{i}]"),
                    "diagonal entries must equal 1",
                ));
            }
        }
        Ok(())
    }
}

/// Solves `m · z_applied = z_actual` by LU with partial pivoting.
pub fn crosstalk_compensate(
    ct: &CrosstalkMatrix,
    z_actual: &[f64],
) -> Result<Vec<f64>, DeviceError> {
    if z_actual.len() != ct.n {
        return Err(DeviceError::Dimension {
            expected: ct.n,
            got: z_actual.len(),
        });
    }
    let lu = ct.to_matrix().lu();
    let u = lu.u();
    let scale = u.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    for column in 0..ct.n {
        let pivot = u[(column, column)];
        if pivot.abs() <= scale * 1e-13 {
            return Err(DeviceError::Singular { column, pivot });
        }
    }
    let rhs = DVector::from_column_slice(z_actual);
    let sol = lu.solve(&rhs).ok_or(DeviceError::Singular {
        column: 0,
        pivot: 0.0,
    })?;
    Ok(sol.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub name: String,
    pub single_gate_duration_ns: Decimal,
    pub avg_single_gate_fidelity: Decimal,
    pub avg_cz_fidelity: Decimal,
    pub qubits: Vec<QubitSpec>,
    pub couplers: Vec<CouplerSpec>,
    pub crosstalk: CrosstalkMatrix,
}

impl DeviceSpec {
    /// The shipped 10-qubit chain.
    pub fn scq10() -> Self {
        Self::from_toml_str(SCQ10_TOML).expect("bundled scq10 document is valid")
    }

    pub fn from_toml_str(source: &str) -> Result<Self, DeviceError> {
        let spec: DeviceSpec =
            toml::from_str(source).map_err(|e| DeviceError::Malformed(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, DeviceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DeviceError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("device spec serializes")
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    /// Coupler between `a` and `b`, in either order.
    pub fn coupler(&self, a: usize, b: usize) -> Option<&CouplerSpec> {
        let lo = a.min(b);
        if a.abs_diff(b) != 1 {
            return None;
        }
        self.couplers.get(lo).filter(|c| c.pair == [lo, lo + 1])
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        a.abs_diff(b) == 1 && a.max(b) < self.num_qubits()
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if self.qubits.is_empty() {
            return Err(invalid("qubits", "qubit list is empty"));
        }
        for (i, q) in self.qubits.iter().enumerate() {
            let at = |field: &str| format!("qubits[{i}].{field}");
            if q.index != i {
                return Err(invalid(
                    at("index"),
                    format!("qubits must be contiguous from 0, expected {i} got {}", q.index),
                ));
            }
            for (name, v) in [("f0", &q.f0), ("f1", &q.f1)] {
                let v = v.value();
                if !(v > 0.5 && v <= 1.0) {
                    return Err(invalid(
                        at(name),
                        format!(
                            "confusion matrix not invertible/sensible: need 0.5 < {name} <= 1, got {v}"
                        ),
                    ));
                }
            }
            for (name, v) in [("t1_us", &q.t1_us), ("t2_star_us", &q.t2_star_us)] {
                if v.value() <= 0.0 {
                    return Err(invalid(at(name), "coherence time must be positive"));
                }
            }
            for (name, v) in [
                ("x_gate_fidelity", &q.x_gate_fidelity),
                ("x_half_gate_fidelity", &q.x_half_gate_fidelity),
            ] {
                if !(v.value() > 0.0 && v.value() <= 1.0) {
                    return Err(invalid(at(name), "fidelity must lie in (0, 1]"));
                }
            }
        }
        let n = self.qubits.len();
        if self.couplers.len() != n - 1 {
            return Err(invalid(
                "couplers",
                format!("expected {} couplers for a {n}-qubit chain, got {}", n - 1, self.couplers.len()),
            ));
        }
        for (j, c) in self.couplers.iter().enumerate() {
            let at = |field: &str| format!("couplers[{j}].{field}");
            if c.pair != [j, j + 1] {
                return Err(invalid(
                    at("pair"),
                    format!("expected adjacent pair [{j}, {}], got {:?}", j + 1, c.pair),
                ));
            }
            let g = c.g_mhz.value();
            if !(5.0..=20.0).contains(&g) {
                return Err(invalid(at("g_mhz"), format!("coupling {g} MHz outside [5, 20]")));
            }
            let f = c.cz_process_fidelity.value();
            if !(f > 0.0 && f <= 1.0) {
                return Err(invalid(at("cz_process_fidelity"), "fidelity must lie in (0, 1]"));
            }
            if c.cz_duration_ns.value() <= 0.0 {
                return Err(invalid(at("cz_duration_ns"), "duration must be positive"));
            }
        }
        if self.crosstalk.n != n {
            return Err(invalid(
                "crosstalk.n",
                format!("crosstalk dimension {} does not match {n} qubits", self.crosstalk.n),
            ));
        }
        self.crosstalk.validate()?;
        crosstalk_compensate(&self.crosstalk, &vec![0.0; n])
            .map_err(|e| invalid("crosstalk.m", e.to_string()))?;
        Ok(())
    }
}
