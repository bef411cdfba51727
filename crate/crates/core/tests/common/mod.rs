#![allow(clippy::needless_range_loop)] // index loops mirror the textbook algorithms
//! Independent dense linear algebra used as test oracles. Nothing here calls
//! into the simulator; matrices are written out from their definitions.
#![allow(dead_code)]

use num_complex::Complex64 as C;

pub type CMat = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    (0..d)
        .map(|r| (0..d).map(|k| if r == k { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

pub fn mul(a: &CMat, b: &CMat) -> CMat {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![c(0.0, 0.0); p]; n];
    for i in 0..n {
        for k in 0..m {
            let x = a[i][k];
            if x == c(0.0, 0.0) {
                continue;
            }
            for j in 0..p {
                out[i][j] += x * b[k][j];
            }
        }
    }
    out
}

pub fn adjoint(a: &CMat) -> CMat {
    (0..a[0].len())
        .map(|j| (0..a.len()).map(|i| a[i][j].conj()).collect())
        .collect()
}

/// `a ⊗ b` with `a` acting on the high bits.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, rb) = (a.len(), b.len());
    let (ca, cb) = (a[0].len(), b[0].len());
    let mut out = vec![vec![c(0.0, 0.0); ca * cb]; ra * rb];
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn trace(a: &CMat) -> C {
    (0..a.len()).map(|i| a[i][i]).sum()
}

pub fn scale(a: &CMat, s: C) -> CMat {
    a.iter().map(|r| r.iter().map(|x| x * s).collect()).collect()
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

pub fn m2(a: C, b: C, cc: C, d: C) -> CMat {
    vec![vec![a, b], vec![cc, d]]
}

pub fn pauli_x() -> CMat {
    m2(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}
pub fn pauli_y() -> CMat {
    m2(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}
pub fn pauli_z() -> CMat {
    m2(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}
pub fn hadamard() -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    m2(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0))
}

/// `exp(-i θ P / 2) = cos(θ/2) I - i sin(θ/2) P`.
pub fn rotation(p: &CMat, theta: f64) -> CMat {
    add(
        &scale(&identity(2), c((theta / 2.0).cos(), 0.0)),
        &scale(p, c(0.0, -(theta / 2.0).sin())),
    )
}

/// Single-qubit operator on qubit `q` of `n` (qubit 0 = least significant).
pub fn embed1(u: &CMat, q: usize, n: usize) -> CMat {
    let mut out = vec![vec![c(1.0, 0.0)]];
    for k in (0..n).rev() {
        out = kron(&out, &if k == q { u.clone() } else { identity(2) });
    }
    out
}

/// Projector `|b⟩⟨b|` on qubit `q`.
fn proj(b: usize) -> CMat {
    if b == 0 {
        m2(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))
    } else {
        m2(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))
    }
}

/// `|0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ U_t`.
pub fn controlled(u: &CMat, control: usize, target: usize, n: usize) -> CMat {
    let p0 = embed1(&proj(0), control, n);
    let p1 = mul(&embed1(&proj(1), control, n), &embed1(u, target, n));
    add(&p0, &p1)
}

/// `|Tr(A† B)| / d`: 1 iff equal up to global phase (for unitaries).
pub fn phase_overlap(a: &CMat, b: &CMat) -> f64 {
    trace(&mul(&adjoint(a), b)).norm() / a.len() as f64
}

/// Real Gaussian elimination with partial pivoting: solves `A x = b`.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &v)| {
            let mut r = row.clone();
            r.push(v);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..=n {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Real inverse column by column.
pub fn gauss_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            gauss_solve(a, &e)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

pub fn real_kron(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![0.0; ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}
