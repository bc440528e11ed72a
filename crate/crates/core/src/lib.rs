//! Closed-form multimodal alignment.
//!
//! Paired observations from two modalities, `X1` (d1×n) and `X2` (d2×n), are
//! mapped to a shared k-dimensional latent space by linear encoders `A1`, `A2`
//! such that `A1·x1_i = A2·x2_i` for every pair. Stacking `X = [X1; -X2]` turns
//! this into the homogeneous system `A·X = 0`, whose solutions are spanned by
//! the left null space of `X`. When that space has fewer than `k` dimensions
//! the left singular vectors of the `k` smallest singular values give the
//! Frobenius-optimal approximate solution.
//!
//! The crate also ships the synthetic latent worlds, error metrics, parameter
//! sweeps and a linear InfoNCE baseline used to benchmark the solver.

pub mod alignment;
pub mod cli;
pub mod contrastive;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod synthetic;

pub use alignment::{
    encode, left_null_dimension, solve_alignment, split_solution, stack_modalities, verify_perfect,
    AlignmentProblem, AlignmentSolution, SvdMode, DEFAULT_RANK_TOLERANCE,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use metrics::MetricReport;
