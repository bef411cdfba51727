mod common;

use common::*;
use proptest::prelude::*;
use scq_core::device::Confusion;
use scq_core::qpt::{ideal_chi, operator_basis, process_fidelity, qpt_two_qubit, ExactExecutor, ProcessMatrix};
use scq_core::sim::{NoiseMode, NoiseModel};
use scq_core::{Gate, Param};

/// Depolarizing channel only on the CZ of pair `(j, j+1)`.
fn cz_depolarizing(j: usize, p: f64) -> NoiseModel {
    let mut n = NoiseModel::ideal(10);
    n.mode = NoiseMode::Calibrated;
    n.p2[j] = p;
    n.confusion = vec![Confusion::IDENTITY; 10];
    n
}

#[test]
fn ideal_cz_on_every_pair() {
    for j in 0..9 {
        let mut ex = ExactExecutor { noise: NoiseModel::ideal(10), correct: false };
        let cz = [Gate::Cz(j, j + 1)];
        let chi = qpt_two_qubit(&mut ex, 10, (j, j + 1), &cz).unwrap();
        let (f, im) = process_fidelity(&chi, &ideal_chi(&cz, (j, j + 1)).unwrap());
        assert!((f - 1.0).abs() < 1e-9, "pair {j}: {f}");
        assert!(im.abs() < 1e-8);
    }
}

#[test]
fn depolarized_cz_matches_analytic_fidelity() {
    for p in [0.02, 0.05, 0.1] {
        let mut ex = ExactExecutor { noise: cz_depolarizing(3, p), correct: false };
        let cz = [Gate::Cz(3, 4)];
        let chi = qpt_two_qubit(&mut ex, 10, (3, 4), &cz).unwrap();
        let (f, _) = process_fidelity(&chi, &ideal_chi(&cz, (3, 4)).unwrap());
        let want = (1.0 - p) + p / 16.0;
        assert!((f - want).abs() < 1e-6, "p={p}: {f} vs {want}");
        assert!(chi.hermiticity_defect() < 1e-9);
        assert!((chi.trace().re - 1.0).abs() < 1e-6);
    }
}

/// `u_n = Tr(E_n† U)/4` from explicitly written operators.
fn kraus_coefficients(u: &CMat) -> Vec<num_complex::Complex64> {
    let a = [
        identity(2),
        pauli_x(),
        scale(&pauli_y(), c(0.0, -1.0)),
        pauli_z(),
    ];
    (0..16)
        .map(|n| trace(&mul(&adjoint(&kron(&a[n / 4], &a[n % 4])), u)) / 4.0)
        .collect()
}

#[test]
fn identity_process_against_cz_is_one_quarter() {
    let cz = controlled(&pauli_z(), 1, 0, 2);
    let ucz = kraus_coefficients(&cz);
    let uid = kraus_coefficients(&identity(4));
    // Tr(χ_id χ_cz) = |⟨u_id, u_cz⟩|².
    let overlap: num_complex::Complex64 = uid.iter().zip(&ucz).map(|(a, b)| a.conj() * b).sum();
    assert!((overlap.norm_sqr() - 0.25).abs() < 1e-12);
    let chi_cz = ideal_chi(&[Gate::Cz(0, 1)], (0, 1)).unwrap();
    for m in 0..16 {
        for n in 0..16 {
            assert!((chi_cz.get(m, n) - ucz[m] * ucz[n].conj()).norm() < 1e-12);
        }
    }
    let (f, _) = process_fidelity(&ProcessMatrix::identity(), &chi_cz);
    assert!((f - 0.25).abs() < 1e-12);
}

#[test]
fn fully_depolarized_is_one_sixteenth() {
    let mut chi = vec![num_complex::Complex64::new(0.0, 0.0); 256];
    for i in 0..16 {
        chi[i * 17] = num_complex::Complex64::new(1.0 / 16.0, 0.0);
    }
    let mixed = ProcessMatrix { chi };
    for g in [Gate::Cz(0, 1), Gate::Cnot { control: 0, target: 1 }, Gate::H(1)] {
        let (f, _) = process_fidelity(&mixed, &ideal_chi(&[g], (0, 1)).unwrap());
        assert!((f - 1.0 / 16.0).abs() < 1e-12);
    }
    // Sanity of the basis: the uniform χ sends any state to I/4.
    let rho = kron(&m2(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)), &identity(2));
    let rho4 = nalgebra::Matrix4::from_fn(|r, k| rho[r][k] * 0.5);
    let out = mixed.apply(&rho4);
    for r in 0..4 {
        for k in 0..4 {
            let want = if r == k { 0.25 } else { 0.0 };
            assert!((out[(r, k)].re - want).abs() < 1e-12);
        }
    }
    assert_eq!(operator_basis().len(), 16);
}

fn unitary_gates() -> impl Strategy<Value = Vec<Gate>> {
    let one = (0usize..2, 0usize..3, -3.2f64..3.2).prop_map(|(q, axis, t)| {
        let q = 4 + q;
        match axis {
            0 => Gate::Rx(q, Param::Literal(t)),
            1 => Gate::Ry(q, Param::Literal(t)),
            _ => Gate::Rz(q, Param::Literal(t)),
        }
    });
    let gate = prop_oneof![3 => one, 1 => Just(Gate::Cz(4, 5)), 1 => Just(Gate::Cnot { control: 5, target: 4 })];
    prop::collection::vec(gate, 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn any_unitary_is_recovered(gates in unitary_gates()) {
        let mut ex = ExactExecutor { noise: NoiseModel::ideal(10), correct: false };
        let chi = qpt_two_qubit(&mut ex, 10, (4, 5), &gates).unwrap();
        let (f, _) = process_fidelity(&chi, &ideal_chi(&gates, (4, 5)).unwrap());
        prop_assert!(f >= 1.0 - 1e-8, "F = {}", f);
        prop_assert!(chi.hermiticity_defect() < 1e-9);
        prop_assert!((chi.trace().re - 1.0).abs() < 1e-6);
    }
}
