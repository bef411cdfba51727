//! Gate-level circuit IR, connectivity validation, native-gate decomposition,
//! layer scheduling and the GHZ / parity circuit builders.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceSpec;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("block of {n} qubits at offset {offset} does not fit a {width}-qubit device")]
    BlockOutOfRange {
        n: usize,
        offset: usize,
        width: usize,
    },
    #[error("scan index {index} out of range for {count} scan points")]
    ScanIndex { index: usize, count: usize },
    #[error("circuit must end with a measurement")]
    NoMeasure,
    #[error("scanned parameter used but the circuit has no scan")]
    UnboundScan,
}

/// Rotation angle: a literal in radians, or `multiplier × γ_k` at scan point `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Param {
    Literal(f64),
    Scanned { multiplier: f64 },
}

impl Param {
    pub fn scanned(multiplier: f64) -> Self {
        Param::Scanned { multiplier }
    }

    pub fn is_scanned(&self) -> bool {
        matches!(self, Param::Scanned { .. })
    }

    pub fn resolve(&self, gamma: f64) -> f64 {
        match *self {
            Param::Literal(v) => v,
            Param::Scanned { multiplier } => multiplier * gamma,
        }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Literal(v)
    }
}

/// Scan points `linspace(start, stop, count)`, endpoints inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl ScanSpec {
    pub fn linspace(start: f64, stop: f64, count: usize) -> Self {
        Self { start, stop, count }
    }

    /// The 51-point sweep over [-π/2, π/2] used for parity oscillations.
    pub fn parity_default() -> Self {
        Self::linspace(-FRAC_PI_2, FRAC_PI_2, 51)
    }

    pub fn is_valid(&self) -> bool {
        self.count >= 1 && self.start.is_finite() && self.stop.is_finite() && self.start <= self.stop
    }

    pub fn point(&self, k: usize) -> f64 {
        if self.count <= 1 {
            return self.start;
        }
        if k + 1 == self.count {
            return self.stop;
        }
        self.start + (self.stop - self.start) * (k as f64 / (self.count - 1) as f64)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.point(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Rx(usize, Param),
    Ry(usize, Param),
    Rz(usize, Param),
    Cnot { control: usize, target: usize },
    Cz(usize, usize),
    Measure(Vec<usize>),
}

impl Gate {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::X(_) => "x",
            Gate::Y(_) => "y",
            Gate::Z(_) => "z",
            Gate::Rx(..) => "rx",
            Gate::Ry(..) => "ry",
            Gate::Rz(..) => "rz",
            Gate::Cnot { .. } => "cnot",
            Gate::Cz(..) => "cz",
            Gate::Measure(_) => "measure",
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => vec![*q],
            Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![*q],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Cz(a, b) => vec![*a, *b],
            Gate::Measure(qs) => qs.clone(),
        }
    }

    pub fn param(&self) -> Option<Param> {
        match self {
            Gate::Rx(_, p) | Gate::Ry(_, p) | Gate::Rz(_, p) => Some(*p),
            _ => None,
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. } | Gate::Cz(..))
    }

    pub fn is_measure(&self) -> bool {
        matches!(self, Gate::Measure(_))
    }

    fn with_param(&self, p: Param) -> Gate {
        match self {
            Gate::Rx(q, _) => Gate::Rx(*q, p),
            Gate::Ry(q, _) => Gate::Ry(*q, p),
            Gate::Rz(q, _) => Gate::Rz(*q, p),
            g => g.clone(),
        }
    }

    /// Same gate acting on relabelled qubits.
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Gate {
        match self {
            Gate::H(q) => Gate::H(map(*q)),
            Gate::X(q) => Gate::X(map(*q)),
            Gate::Y(q) => Gate::Y(map(*q)),
            Gate::Z(q) => Gate::Z(map(*q)),
            Gate::Rx(q, p) => Gate::Rx(map(*q), *p),
            Gate::Ry(q, p) => Gate::Ry(map(*q), *p),
            Gate::Rz(q, p) => Gate::Rz(map(*q), *p),
            Gate::Cnot { control, target } => Gate::Cnot {
                control: map(*control),
                target: map(*target),
            },
            Gate::Cz(a, b) => Gate::Cz(map(*a), map(*b)),
            Gate::Measure(qs) => Gate::Measure(qs.iter().map(|q| map(*q)).collect()),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())?;
        for q in self.qubits() {
            write!(f, " {q}")?;
        }
        match self.param() {
            Some(Param::Literal(v)) => write!(f, " {v}"),
            Some(Param::Scanned { multiplier }) => write!(f, " s*{multiplier}"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n: usize,
    pub gates: Vec<Gate>,
    pub scan: Option<ScanSpec>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            gates: Vec::new(),
            scan: None,
        }
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    pub fn h(&mut self, q: usize) -> &mut Self {
        self.push(Gate::H(q))
    }

    pub fn x(&mut self, q: usize) -> &mut Self {
        self.push(Gate::X(q))
    }

    pub fn y(&mut self, q: usize) -> &mut Self {
        self.push(Gate::Y(q))
    }

    pub fn z(&mut self, q: usize) -> &mut Self {
        self.push(Gate::Z(q))
    }

    pub fn rx(&mut self, q: usize, p: impl Into<Param>) -> &mut Self {
        self.push(Gate::Rx(q, p.into()))
    }

    pub fn ry(&mut self, q: usize, p: impl Into<Param>) -> &mut Self {
        self.push(Gate::Ry(q, p.into()))
    }

    pub fn rz(&mut self, q: usize, p: impl Into<Param>) -> &mut Self {
        self.push(Gate::Rz(q, p.into()))
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> &mut Self {
        self.push(Gate::Cnot { control, target })
    }

    pub fn cz(&mut self, a: usize, b: usize) -> &mut Self {
        self.push(Gate::Cz(a, b))
    }

    /// Measured qubits are kept in ascending order.
    pub fn measure(&mut self, qubits: &[usize]) -> &mut Self {
        let mut qs = qubits.to_vec();
        qs.sort_unstable();
        self.push(Gate::Measure(qs))
    }

    pub fn with_scan(mut self, scan: ScanSpec) -> Self {
        self.scan = Some(scan);
        self
    }

    /// Qubits of the trailing measurement, empty if there is none.
    pub fn measured(&self) -> &[usize] {
        match self.gates.last() {
            Some(Gate::Measure(qs)) => qs,
            _ => &[],
        }
    }

    pub fn has_scanned_params(&self) -> bool {
        self.gates
            .iter()
            .any(|g| g.param().is_some_and(|p| p.is_scanned()))
    }

    /// Number of concrete instantiations (1 when unscanned).
    pub fn scan_count(&self) -> usize {
        self.scan.map_or(1, |s| s.count)
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.scan.map_or(0.0, |s| s.point(k))
    }

    /// Replaces every scanned parameter by its literal value at scan point `k`.
    pub fn instantiate(&self, k: usize) -> Result<Circuit, CircuitError> {
        let count = self.scan_count();
        if k >= count {
            return Err(CircuitError::ScanIndex { index: k, count });
        }
        let Some(scan) = self.scan else {
            if self.has_scanned_params() {
                return Err(CircuitError::UnboundScan);
            }
            return Ok(self.clone());
        };
        let gamma = scan.point(k);
        let gates = self
            .gates
            .iter()
            .map(|g| match g.param() {
                Some(p @ Param::Scanned { .. }) => g.with_param(Param::Literal(p.resolve(gamma))),
                _ => g.clone(),
            })
            .collect();
        Ok(Circuit {
            n: self.n,
            gates,
            scan: None,
        })
    }

    /// Structural problems that do not depend on a device.
    pub fn invariant_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let measures = self.gates.iter().filter(|g| g.is_measure()).count();
        for (i, g) in self.gates.iter().enumerate() {
            let qs = g.qubits();
            for &q in &qs {
                if q >= self.n {
                    out.push(Violation::at(i, format!("qubit index {q} out of range")));
                }
            }
            let mut sorted = qs.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                out.push(Violation::at(i, "repeated qubit operand"));
            }
            if qs.is_empty() {
                out.push(Violation::at(i, "measure without qubits"));
            }
            if let Some(p) = g.param() {
                match p {
                    Param::Literal(v) if !v.is_finite() => {
                        out.push(Violation::at(i, "non-finite angle"))
                    }
                    Param::Scanned { multiplier } if !multiplier.is_finite() || multiplier == 0.0 => {
                        out.push(Violation::at(i, "scan multiplier must be finite and nonzero"))
                    }
                    Param::Scanned { .. } if self.scan.is_none() => {
                        out.push(Violation::at(i, "scanned parameter without scan"))
                    }
                    _ => {}
                }
            }
            if i > 0 && self.gates[..i].iter().any(|g| g.is_measure()) {
                out.push(Violation::at(i, "gate after measure"));
            }
        }
        if measures > 1 {
            out.push(Violation::global("more than one measure statement"));
        }
        if let Some(scan) = self.scan {
            if !scan.is_valid() {
                out.push(Violation::global("scan must satisfy count >= 1 and start <= stop"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub gate_index: Option<usize>,
    pub message: String,
}

impl Violation {
    fn at(index: usize, message: impl Into<String>) -> Self {
        Self {
            gate_index: Some(index),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            gate_index: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gate_index {
            Some(i) => write!(f, "gate {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a circuit against the device: width, chain adjacency of every
/// two-qubit gate, and the structural invariants.
pub fn validate(circuit: &Circuit, device: &DeviceSpec) -> ValidationReport {
    let mut violations = Vec::new();
    let width = device.num_qubits();
    if circuit.n > width {
        violations.push(Violation::global(format!(
            "circuit width {} exceeds device width {width}",
            circuit.n
        )));
    }
    for (i, g) in circuit.gates.iter().enumerate() {
        if g.is_two_qubit() {
            let qs = g.qubits();
            let (a, b) = (qs[0], qs[1]);
            if a != b && a < circuit.n && b < circuit.n && !device.are_adjacent(a, b) {
                violations.push(Violation::at(i, format!("non-adjacent pair ({a},{b})")));
            }
        }
    }
    violations.extend(circuit.invariant_violations());
    if !circuit.gates.iter().any(|g| g.is_measure()) {
        violations.push(Violation::global("circuit has no measurement"));
    }
    violations.sort_by_key(|v| v.gate_index.unwrap_or(usize::MAX));
    ValidationReport { violations }
}

/// Rewrites CNOT and H into the native set {RX, RY, RZ, CZ}.
///
/// `CNOT(c,t)` becomes `RY(-π/2)@t, CZ(c,t), RY(π/2)@t` and `H` becomes
/// `RZ(π), RY(π/2)`; both equal the original up to global phase.
pub fn decompose_cnot(circuit: &Circuit) -> Circuit {
    let mut gates = Vec::with_capacity(circuit.gates.len());
    for g in &circuit.gates {
        match *g {
            Gate::Cnot { control, target } => {
                gates.push(Gate::Ry(target, Param::Literal(-FRAC_PI_2)));
                gates.push(Gate::Cz(control, target));
                gates.push(Gate::Ry(target, Param::Literal(FRAC_PI_2)));
            }
            Gate::H(q) => {
                gates.push(Gate::Rz(q, Param::Literal(PI)));
                gates.push(Gate::Ry(q, Param::Literal(FRAC_PI_2)));
            }
            _ => gates.push(g.clone()),
        }
    }
    Circuit {
        n: circuit.n,
        gates,
        scan: circuit.scan,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredCircuit {
    pub n: usize,
    pub layers: Vec<Vec<Gate>>,
}

impl LayeredCircuit {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn flatten(&self) -> Vec<Gate> {
        self.layers.iter().flatten().cloned().collect()
    }
}

fn touches_adjacent(a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|x| b.iter().any(|y| x.abs_diff(*y) <= 1))
}

/// Greedy as-soon-as-possible layering. Two-qubit gates in the same layer
/// never touch neighbouring chain sites; ties keep source order.
pub fn schedule(circuit: &Circuit) -> LayeredCircuit {
    let mut next_free = vec![0usize; circuit.n.max(1)];
    let mut layers: Vec<Vec<Gate>> = Vec::new();
    for g in &circuit.gates {
        let qs = g.qubits();
        let mut layer = qs
            .iter()
            .map(|&q| next_free.get(q).copied().unwrap_or(0))
            .max()
            .unwrap_or(0);
        if g.is_two_qubit() {
            while layers.get(layer).is_some_and(|l| {
                l.iter()
                    .any(|o| o.is_two_qubit() && touches_adjacent(&o.qubits(), &qs))
            }) {
                layer += 1;
            }
        }
        if layers.len() <= layer {
            layers.resize_with(layer + 1, Vec::new);
        }
        layers[layer].push(g.clone());
        for &q in &qs {
            if q >= next_free.len() {
                next_free.resize(q + 1, 0);
            }
            next_free[q] = layer + 1;
        }
    }
    LayeredCircuit {
        n: circuit.n,
        layers,
    }
}

/// GHZ preparation on qubits `offset..offset+n` of a `width`-qubit register:
/// H on the middle qubit, CNOT fan-out to the left, then to the right.
pub fn build_ghz(n: usize, offset: usize, width: usize) -> Result<Circuit, CircuitError> {
    if n == 0 || offset + n > width {
        return Err(CircuitError::BlockOutOfRange { n, offset, width });
    }
    let mut c = Circuit::new(width);
    let ini = n / 2;
    c.h(offset + ini);
    for i in (1..=ini).rev() {
        c.cnot(offset + i, offset + i - 1);
    }
    for i in ini..n.saturating_sub(1) {
        c.cnot(offset + i, offset + i + 1);
    }
    let block: Vec<usize> = (offset..offset + n).collect();
    c.measure(&block);
    Ok(c)
}

/// Inserts `RZ(-γ)` then `RX(π/2)` on every measured qubit before the
/// measurement, so the Z readout measures `cos γ σ_y + sin γ σ_x` per qubit.
pub fn append_parity_stage(circuit: &Circuit, scan: ScanSpec) -> Result<Circuit, CircuitError> {
    let Some(Gate::Measure(qs)) = circuit.gates.last() else {
        return Err(CircuitError::NoMeasure);
    };
    let qs = qs.clone();
    let mut gates = circuit.gates[..circuit.gates.len() - 1].to_vec();
    for &q in &qs {
        gates.push(Gate::Rz(q, Param::scanned(-1.0)));
    }
    for &q in &qs {
        gates.push(Gate::Rx(q, Param::Literal(FRAC_PI_2)));
    }
    gates.push(Gate::Measure(qs));
    Ok(Circuit {
        n: circuit.n,
        gates,
        scan: Some(scan),
    })
}

/// Every contiguous block of `n` qubits on a chain of `width`.
pub fn ghz_blocks(n: usize, width: usize) -> impl Iterator<Item = (usize, usize)> {
    let count = if n == 0 || n > width { 0 } else { width - n + 1 };
    (0..count).map(move |offset| (offset, n))
}
