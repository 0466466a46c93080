//! Stabilizer-circuit simulation and control laboratory.
//!
//! A chain of qubits evolves under random two-qubit Clifford gates while a
//! controller places optimally disentangling gates. The crate provides the
//! phaseless tableau simulator, clipped-gauge entanglement bookkeeping, the
//! disentangling-gate lookup, the game environment, control strategies and
//! ensemble analysis tooling.

pub mod analysis;
pub mod cli;
pub mod clipped;
pub mod disentangler;
pub mod env;
pub mod error;
pub mod gf2;
pub mod protocol;
pub mod strategy;
pub mod tableau;

pub use error::{Error, Result};
