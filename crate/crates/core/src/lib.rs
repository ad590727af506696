//! Simulation lab for single-copy quantum state tomography and classical
//! shadows.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense complex matrices, Hermitian spectra, norms, tensor
//!   structure and the validated [`DensityMatrix`] / [`Projector`] types.
//! - [`randomness`]: reproducible splittable streams, Haar unitaries and
//!   random POVMs.
//! - [`ensembles`]: the perturbed-maximally-mixed and rank-r hard instances.
//! - [`measurements`]: POVMs, outcome distributions, sampling oracles.
//! - [`infotheory`]: divergences, mutual information, the chi-squared
//!   functional, exact Haar moments and lower-bound calculators.
//! - [`packing`]: rejection-sampled packings with exhaustive verification.
//! - [`estimators`]: Pauli tomography, random-basis tomography, classical
//!   shadows.
//! - [`experiments`]: seeded experiment runners and report emission.

pub mod ensembles;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod infotheory;
pub mod linalg;
pub mod measurements;
pub mod packing;
pub mod randomness;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, DensityMatrix, Projector, C64};
pub use measurements::Povm;
pub use randomness::{RngStream, Unitary};
