//! WebAssembly bindings for the single-page demo in `www/`.
//!
//! Everything runs in the browser: the same engine the agent uses, the
//! built-in 10-qubit device table, no service. The `demo` module holds the
//! logic so it can be tested natively; the exported functions only convert
//! errors.

pub mod demo;

use wasm_bindgen::prelude::*;

/// Runs an assembly program; returns the result document as JSON.
#[wasm_bindgen]
pub fn run_program(source: &str, shots: u32, backend: &str, correct: bool, seed: u32) -> Result<String, JsError> {
    demo::run_program(source, shots.into(), backend, correct, seed.into()).map_err(|e| JsError::new(&e))
}

/// GHZ state on `n` qubits from `offset` plus its parity scan; returns the
/// curve, the fit and the fidelity as JSON.
#[wasm_bindgen]
pub fn parity_scan(n: u32, offset: u32, backend: &str, shots: u32, points: u32, seed: u32) -> Result<String, JsError> {
    demo::parity_scan(n as usize, offset as usize, backend, shots.into(), points as usize, seed.into())
        .map_err(|e| JsError::new(&e))
}

/// Exact two-qubit tomography of the CZ on `(q, q+1)`; returns χ and F_χ.
#[wasm_bindgen]
pub fn cz_tomography(q: u32, backend: &str) -> Result<String, JsError> {
    demo::cz_tomography(q as usize, backend).map_err(|e| JsError::new(&e))
}

/// The device table as JSON.
#[wasm_bindgen]
pub fn device() -> String {
    demo::device_json()
}
