//! Information-theoretic detection thresholds for sparse stochastic block
//! models.
//!
//! The crate is organised by concern:
//!
//! * [`model`]: block-model parameters, the label transition matrix `T` and its
//!   spectrum.
//! * [`graph`]: samplers for the planted model and Erdős–Rényi graphs, the
//!   fixed-edge-count variant, and exact short-cycle counting.
//! * [`thresholds`]: closed-form and root-found degree thresholds for the
//!   symmetric model.
//! * [`qfunc`]: the contiguity functional `Q` over the transportation
//!   polytope, its doubly stochastic reduction `Φ`, the entropy relaxation
//!   bounds and the limiting second moment.
//! * [`detection`]: labelings, overlap, good partitions and exact posteriors.
//! * [`experiments`]: the exact finite-`n` second moment and the sweep runner.

#![forbid(unsafe_code)]
// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod model;
pub mod numeric;
pub mod qfunc;
pub mod rng;
pub mod thresholds;

pub use error::{Error, Result};
pub use model::{ModelParams, ParamSpec, SymmetricParams};
