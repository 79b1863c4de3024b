//! Subspace direction-of-arrival estimation on uniform linear arrays.
//!
//! Provides standard ESPRIT, iterative ESPRIT with covariance refinement, and
//! the two-step knowledge-aided iterative ESPRIT that also exploits DOAs known
//! in advance. The [`harness`] module runs seeded Monte Carlo sweeps over SNR
//! and writes CSV tables and SVG plots.

// `!(x > 0.0)` is used on purpose so NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod error;
pub mod esprit;
pub mod harness;
pub mod kai;
pub mod linalg;
pub mod metrics;

pub use array::{
    array_manifold, sample_covariance, steering_vector, synthesize_snapshots, true_covariance,
    ArrayGeometry, CovarianceEstimate, Provenance, SnapshotBatch, SourceScenario,
};
pub use error::{DoaError, Result};
pub use esprit::{esprit, Attribution, DoaEstimate, EstimateFlags};
pub use kai::{iesprit, two_step_kai, KaiResult};
