//! Simulation and calibration of a two-qubit iSWAP switched by a driven
//! modulator qubit.
//!
//! Qubits are ordered `(M, Q1, Q2)` with the modulator as the most
//! significant tensor factor; basis index `4m + 2q1 + q2`, and `|0⟩` is the
//! `σ^z = +1` eigenstate.

pub mod channel;
pub mod dressed;
pub mod error;
pub mod export;
pub mod floquet;
mod linalg;
pub mod optimize;
pub mod params;
pub mod pauli;
pub mod propagator;
pub mod scan;

pub use error::{Error, Result};
pub use params::{Param, ProtocolParams};
