//! Loss characterization for superconducting microwave resonators and
//! transmon qubits.
//!
//! - [`resonance`]: inverse-S21 notch model, trace synthesis and fitting.
//! - [`calibration`]: photon number from drive power, Qi from T1.
//! - [`lossmodel`]: participation loss budgets, per-site regression and
//!   qubit/resonator comparison.
//! - [`fieldsolver`]: 2D electrostatic cross-section solver and thin-film
//!   interface participations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod fieldsolver;
pub mod kv;
pub mod lossmodel;
pub mod resonance;

pub use error::{Error, Result};
