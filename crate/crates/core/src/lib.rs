//! State tomography from a continuously measured, periodically driven spin.
//!
//! A spin-j ensemble is driven by a Floquet map (the kicked top, with or
//! without time-reversal symmetry, or a random unitary) while one observable
//! is weakly measured. The Heisenberg-evolved observables form a linear
//! measurement model for the Bloch vector of the unknown initial state. The
//! crate simulates such records, inverts them, and quantifies the rate of
//! information gain through reconstruction fidelity, the collective Fisher
//! information and the Shannon entropy of the inverse-covariance spectrum,
//! together with random-matrix predictions for the fully chaotic limit.

pub mod classical;
pub mod ensembles;
mod error;
pub mod floquet;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod spin;
pub mod tomography;

pub use error::{Error, Result};
