//! Core of the cloud quantum platform emulator: device model, circuit IR,
//! assembly language, noisy simulator and the GHZ / tomography analysis.

pub mod analysis;
pub mod campaign;
pub mod circuit;
pub mod device;
pub mod protocol;
pub mod qasm;
pub mod qpt;
pub mod rng;
pub mod sim;
pub mod task;

pub use circuit::{Circuit, Gate, Param, ScanSpec};
pub use device::DeviceSpec;
