//! Lindblad simulation, pulse synthesis and gate benchmarking for very small
//! logical qubits built from two transmon pairs and lossy shadow resonators.

pub mod bench;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod noise;
pub mod pulse;
pub mod qalg;
pub mod units;

pub use error::{Result, VslqError};
