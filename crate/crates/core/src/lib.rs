//! Ensemble analysis engine for partitioning a simulation parameter space into
//! segments of similar spatio-temporal behavior.
//!
//! The pipeline runs bottom-up:
//!
//! 1. [`ensemble`]: load or generate runs, normalize fields, Monte Carlo sampling.
//! 2. [`similarity`]: field distances, the timestep matrix and the run matrix.
//! 3. [`clustering`]: agglomerative clustering, pruning and color assignment.
//! 4. [`embedding`]: SMACOF-based embeddings of runs, timesteps and parameters.
//! 5. [`partition`]: SVM segmentation, grids, hyper-slices and boundary masks.

// `!(x > 0.0)` style guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod embedding;
pub mod ensemble;
mod error;
pub mod linalg;
pub mod metrics;
mod par;
pub mod partition;
pub mod similarity;

pub use error::{Error, Result};
