//! `scq` command-line client: submit assembly programs, fetch results and
//! run the GHZ and process-tomography campaigns against the service or
//! in process.

pub mod client;
pub mod commands;

pub use client::{Client, ClientError, RemoteRunner};
pub use commands::{Cli, Command};
