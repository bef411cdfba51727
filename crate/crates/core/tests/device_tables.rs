mod common;

use common::{gauss_solve, mat_vec};
use proptest::prelude::*;
use scq_core::device::{crosstalk_compensate, DeviceSpec};

/// Z-crosstalk matrix as printed in the device characterization.
const PRINTED: [[f64; 10]; 10] = [
    [1.0, -0.005, -0.004, -0.003, -0.003, -0.002, -0.002, -0.002, -0.002, -0.002],
    [0.014, 1.0, -0.019, -0.009, 0.007, 0.005, 0.003, 0.003, 0.003, 0.003],
    [0.0, 0.0, 1.0, -0.013, 0.006, 0.004, 0.003, 0.002, 0.002, -0.002],
    [-0.003, 0.002, 0.001, 1.0, 0.012, 0.005, 0.004, 0.004, 0.003, -0.003],
    [-0.005, 0.005, 0.005, 0.012, 1.0, 0.002, 0.003, 0.003, 0.003, -0.004],
    [-0.004, 0.003, 0.004, 0.005, -0.013, 1.0, 0.0, 0.0, 0.0, -0.002],
    [-0.003, 0.002, 0.002, 0.003, -0.005, -0.001, 1.0, -0.001, 0.0, -0.001],
    [-0.003, 0.002, 0.003, 0.004, -0.006, -0.009, -0.018, 1.0, -0.009, 0.014],
    [-0.002, 0.002, 0.002, 0.002, -0.003, -0.003, -0.005, -0.012, 1.0, -0.005],
    [-0.003, 0.002, 0.002, 0.002, -0.003, -0.002, -0.002, -0.002, -0.03, 1.0],
];

const F0: [&str; 10] = ["0.9850", "0.9845", "0.9740", "0.9813", "0.9747", "0.9643", "0.9660", "0.9637", "0.9817", "0.9800"];
const F1: [&str; 10] = ["0.9420", "0.9397", "0.9480", "0.9427", "0.9203", "0.8680", "0.9303", "0.9097", "0.9217", "0.8830"];
const F_CHI: [&str; 9] = ["0.9682", "0.9540", "0.9470", "0.9448", "0.9472", "0.9276", "0.9482", "0.9318", "0.9584"];
const T_CZ: [&str; 9] = ["48.9", "46.1", "40.1", "39.0", "42.8", "41.8", "43.6", "40.5", "41.1"];

fn rows() -> Vec<Vec<f64>> {
    PRINTED.iter().map(|r| r.to_vec()).collect()
}

#[test]
fn readout_and_cz_tables() {
    let d = DeviceSpec::scq10();
    assert_eq!(d.qubits.len(), 10);
    assert_eq!(d.couplers.len(), 9);
    for j in 0..10 {
        assert_eq!(d.qubits[j].f0.as_str(), F0[j], "f0 of qubit {j}");
        assert_eq!(d.qubits[j].f1.as_str(), F1[j], "f1 of qubit {j}");
    }
    for j in 0..9 {
        assert_eq!(d.couplers[j].cz_process_fidelity.as_str(), F_CHI[j]);
        assert_eq!(d.couplers[j].cz_duration_ns.as_str(), T_CZ[j]);
        assert_eq!(d.couplers[j].pair, [j, j + 1]);
    }
    assert_eq!(d.single_gate_duration_ns.value(), 30.0);
    assert_eq!(d.avg_single_gate_fidelity.value(), 0.997);
    assert_eq!(d.avg_cz_fidelity.value(), 0.955);
}

#[test]
fn crosstalk_matrix_matches_printed_values() {
    let d = DeviceSpec::scq10();
    assert_eq!(d.crosstalk.n, 10);
    assert_eq!(d.crosstalk.get(1, 2), -0.019);
    for (i, row) in PRINTED.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(d.crosstalk.get(i, j), v, "m[{i}][{j}]");
        }
    }
}

#[test]
fn compensation_of_unit_vector_matches_elimination_oracle() {
    let d = DeviceSpec::scq10();
    let mut e1 = vec![0.0; 10];
    e1[0] = 1.0;
    let got = crosstalk_compensate(&d.crosstalk, &e1).unwrap();
    let want = gauss_solve(&rows(), &e1);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-13, "{g} vs {w}");
    }
    // Frozen oracle output for the first two entries.
    assert!((want[0] - 1.0).abs() < 1e-3);
    assert!((want[1] + 0.014).abs() < 1e-3);
}

#[test]
fn round_trip_is_bit_exact() {
    let d = DeviceSpec::scq10();
    let text = d.to_toml_string();
    let back = DeviceSpec::from_toml_str(&text).unwrap();
    assert_eq!(back, d);
    for (a, b) in d.qubits.iter().zip(&back.qubits) {
        assert_eq!(a.f0.as_str(), b.f0.as_str());
        assert_eq!(a.t2_star_us.as_str(), b.t2_star_us.as_str());
    }
    for (ra, rb) in d.crosstalk.m.iter().zip(&back.crosstalk.m) {
        for (a, b) in ra.iter().zip(rb) {
            assert_eq!(a.as_str(), b.as_str());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compensate_then_apply_is_identity(z in prop::collection::vec(-10.0f64..10.0, 10)) {
        let d = DeviceSpec::scq10();
        let applied = crosstalk_compensate(&d.crosstalk, &z).unwrap();
        let back = mat_vec(&rows(), &applied);
        let scale = z.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (b, v) in back.iter().zip(&z) {
            prop_assert!((b - v).abs() <= 1e-10 * scale);
        }
    }
}
