//! Convex demixing of a low-rank matrix and a dictionary-sparse component.
//!
//! Given an observation `Y = X + R A` with a known dictionary `R` (unit-norm
//! columns), a low-rank `X` and a sparse coefficient matrix `A`, this crate
//! solves
//!
//! ```text
//! minimize ‖X‖* + λ‖A‖₁   subject to   Y = X + R A
//! ```
//!
//! and provides the tooling needed to study when the planted pair is
//! recovered: incoherence measures of the dictionary and the low-rank
//! subspaces, the admissible interval for `λ`, a numerical dual-certificate
//! check, and a seeded phase-transition harness.
//!
//! Modules:
//! - [`model`]: instance types, the subspace projectors and matrix text I/O.
//! - [`prox`]: soft thresholding and singular value thresholding.
//! - [`solver`]: accelerated proximal gradient with smoothing continuation.
//! - [`measures`]: frame bounds, restricted isometry constants, incoherence.
//! - [`theory`]: the `λ` interval, sparsity limits and rank–sparsity curves.
//! - [`certificate`]: dual certificate construction and verification.
//! - [`experiments`]: instance generators, success criteria and phase grids.

pub mod certificate;
pub mod error;
pub mod experiments;
pub mod kv;
pub mod linalg;
pub mod measures;
pub mod model;
pub mod prox;
pub mod solver;
pub mod theory;

pub use error::{DemixError, Result};
pub use model::{DemixInstance, GroundTruth, SupportSet};

/// Dense real matrix used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense real vector.
pub type Vector = nalgebra::DVector<f64>;
