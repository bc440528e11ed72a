//! Linear encoders that map paired samples of two modalities to identical
//! latent vectors.
//!
//! With `X = [X1; -X2]`, any `A = [A1 | A2]` with `A·X = 0` satisfies
//! `A1·x1_i = A2·x2_i` for every sample. The rows of `A` are taken from the
//! left singular vectors of `X` belonging to its `k` smallest singular values:
//! an exact basis of the left null space when that space has dimension at
//! least `k`, and the Frobenius-optimal approximation otherwise, with
//! `‖A·X‖_F² = Σ σ²` over those `k` values.
//!
//! Solutions are unique only up to an invertible transform of the latent
//! space. Each row is sign-canonicalized (largest-magnitude entry positive)
//! for reproducible output, but callers should rely on the row space only.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::Matrix;

/// Singular values at or below `DEFAULT_RANK_TOLERANCE · σ_max` count as zero.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// Above this stacked dimension the truncated mode stops delegating to the full SVD.
pub const TRUNCATED_FULL_SVD_MAX_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SvdMode {
    #[default]
    Full,
    /// Only the `k` smallest left singular vectors are computed.
    TruncatedSmallestK,
}

/// Paired observations `x1` (d1×n) and `x2` (d2×n) plus solver settings.
#[derive(Debug, Clone)]
pub struct AlignmentProblem {
    pub x1: Matrix,
    pub x2: Matrix,
    pub k: usize,
    pub rank_tolerance: f64,
    pub svd_mode: SvdMode,
}

impl AlignmentProblem {
    pub fn new(x1: Matrix, x2: Matrix, k: usize) -> Result<Self> {
        let problem = AlignmentProblem {
            x1,
            x2,
            k,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            svd_mode: SvdMode::Full,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_rank_tolerance(mut self, tol: f64) -> Result<Self> {
        self.rank_tolerance = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_svd_mode(mut self, mode: SvdMode) -> Self {
        self.svd_mode = mode;
        self
    }

    pub fn n(&self) -> usize {
        self.x1.cols()
    }

    /// Stacked dimension `d1 + d2`.
    pub fn d(&self) -> usize {
        self.x1.rows() + self.x2.rows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x1.cols() != self.x2.cols() {
            return Err(Error::dim(format!(
                "modalities are not paired: {} vs {} samples",
                self.x1.cols(),
                self.x2.cols()
            )));
        }
        if self.n() == 0 {
            return Err(Error::data("no samples (n = 0)"));
        }
        if self.k == 0 {
            return Err(Error::config("latent dimension k must be at least 1"));
        }
        if self.k > self.d() {
            return Err(Error::config(format!(
                "latent dimension k={} exceeds d1+d2={}",
                self.k,
                self.d()
            )));
        }
        if !(self.rank_tolerance >= 0.0 && self.rank_tolerance.is_finite()) {
            return Err(Error::config(format!(
                "rank tolerance must be a nonnegative finite number, got {}",
                self.rank_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AlignmentSolution {
    /// `k×d`, orthonormal rows.
    pub a_combined: Matrix,
    /// `k×d1` encoder for the first modality.
    pub a1: Matrix,
    /// `k×d2` encoder for the second modality.
    pub a2: Matrix,
    /// `‖A·X‖_F` on the stacked training matrix.
    pub residual_frobenius: f64,
    /// The `k` smallest singular values of `X`, descending.
    pub smallest_singular_values: Vec<f64>,
    pub left_null_dim: usize,
    /// `left_null_dim ≥ k`: the encoders align the training pairs exactly.
    pub perfect: bool,
    /// `k = d`: exact alignment is impossible unless `X = 0`.
    pub k_equals_d: bool,
}

impl AlignmentSolution {
    pub fn k(&self) -> usize {
        self.a_combined.rows()
    }

    /// Latent estimates `(A1·x1, A2·x2)`.
    pub fn encode_pair(&self, x1: &Matrix, x2: &Matrix) -> Result<(Matrix, Matrix)> {
        Ok((encode(&self.a1, x1)?, encode(&self.a2, x2)?))
    }
}

/// `[x1; -x2]`.
pub fn stack_modalities(x1: &Matrix, x2: &Matrix) -> Result<Matrix> {
    if x1.cols() != x2.cols() {
        return Err(Error::dim(format!(
            "modalities are not paired: {} vs {} samples",
            x1.cols(),
            x2.cols()
        )));
    }
    let (d1, d2, n) = (x1.rows(), x2.rows(), x1.cols());
    let mut out = DMatrix::zeros(d1 + d2, n);
    out.rows_mut(0, d1).copy_from(x1.as_dmatrix());
    out.rows_mut(d1, d2).copy_from(&(-x2.as_dmatrix()));
    Ok(Matrix::from_finite(out))
}

/// `d − rank(x)`, with rank counting singular values above `rank_tolerance · σ_max`.
pub fn left_null_dimension(x: &Matrix, rank_tolerance: f64) -> Result<usize> {
    let svd = linalg::full_left_svd(x.as_dmatrix())?;
    Ok(x.rows() - linalg::numerical_rank(&svd.singular_values, rank_tolerance))
}

pub fn solve_alignment(problem: &AlignmentProblem) -> Result<AlignmentSolution> {
    solve_alignment_with_fallback(problem, TRUNCATED_FULL_SVD_MAX_DIM)
}

/// Like [`solve_alignment`], with an explicit dimension up to which
/// [`SvdMode::TruncatedSmallestK`] still uses the full SVD.
pub fn solve_alignment_with_fallback(
    problem: &AlignmentProblem,
    full_svd_max_dim: usize,
) -> Result<AlignmentSolution> {
    problem.validate()?;
    let x = stack_modalities(&problem.x1, &problem.x2)?;
    let (d, k) = (problem.d(), problem.k);
    let xd = x.as_dmatrix();

    let (basis, smallest, left_null_dim) = match problem.svd_mode {
        SvdMode::TruncatedSmallestK if d > full_svd_max_dim => {
            let t = linalg::smallest_left_singular_vectors(xd, k, problem.rank_tolerance)?;
            (t.basis, t.singular_values, t.left_null_dim)
        }
        _ => {
            let svd = linalg::full_left_svd(xd)?;
            let rank = linalg::numerical_rank(&svd.singular_values, problem.rank_tolerance);
            (
                svd.u.columns(d - k, k).into_owned(),
                svd.singular_values[d - k..].to_vec(),
                d - rank,
            )
        }
    };

    let mut a = basis.transpose();
    canonicalize_signs(&mut a);
    let a_combined = Matrix::from_dmatrix(a)?;
    let residual_frobenius = a_combined.matmul(&x)?.frobenius_norm();
    let (a1, a2) = split_solution(&a_combined, problem.x1.rows(), problem.x2.rows())?;
    Ok(AlignmentSolution {
        a_combined,
        a1,
        a2,
        residual_frobenius,
        smallest_singular_values: smallest,
        left_null_dim,
        perfect: left_null_dim >= k,
        k_equals_d: k == d,
    })
}

/// Flips each row so that its largest-magnitude entry (first one on ties) is positive.
fn canonicalize_signs(a: &mut DMatrix<f64>) {
    for mut row in a.row_iter_mut() {
        let mut pivot = 0.0f64;
        for &v in row.iter() {
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        if pivot < 0.0 {
            row.neg_mut();
        }
    }
}

/// Splits `a` (k×d) into its first `d1` and remaining `d2` columns.
pub fn split_solution(a: &Matrix, d1: usize, d2: usize) -> Result<(Matrix, Matrix)> {
    if d1 + d2 != a.cols() {
        return Err(Error::dim(format!(
            "cannot split {} columns into {d1} + {d2}",
            a.cols()
        )));
    }
    Ok((a.column_range(0, d1), a.column_range(d1, d1 + d2)))
}

/// `a_m · x_m`: column `i` is the latent estimate of sample `i`.
pub fn encode(a_m: &Matrix, x_m: &Matrix) -> Result<Matrix> {
    a_m.matmul(x_m)
}

/// Whether every pair lands within `tolerance` (Euclidean) of its partner.
pub fn verify_perfect(
    solution: &AlignmentSolution,
    x1: &Matrix,
    x2: &Matrix,
    tolerance: f64,
) -> Result<bool> {
    if x1.cols() != x2.cols() {
        return Err(Error::dim("modalities are not paired"));
    }
    let (z1, z2) = solution.encode_pair(x1, x2)?;
    let diff = z1.sub(&z2)?;
    let worst = diff
        .as_dmatrix()
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    Ok(worst <= tolerance)
}
