//! Small statistical helpers shared by the experiment drivers.

use crate::alignment::DEFAULT_RANK_TOLERANCE;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::Matrix;

/// Residual `‖Ẑ − M·Z‖_F` of the least-squares fit `M = Ẑ·Z†`.
///
/// Zero (to rounding) exactly when every estimated latent is the same linear
/// function of its ground-truth latent, in which case cluster geometry such
/// as linear separability carries over from `Z` to `Ẑ`.
pub fn linear_image_residual(z_true: &Matrix, z_hat: &Matrix) -> Result<f64> {
    if z_true.cols() != z_hat.cols() {
        return Err(Error::dim("latent matrices have different sample counts"));
    }
    let pinv = linalg::pseudo_inverse(z_true.as_dmatrix(), DEFAULT_RANK_TOLERANCE)?;
    let m = z_hat.as_dmatrix() * pinv;
    Ok((z_hat.as_dmatrix() - m * z_true.as_dmatrix()).norm())
}

/// Median of a nonempty slice; mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn linear_image_detects_nonlinearity() {
        let z = Matrix::from_rows(&[[1.0, 2.0, 3.0, -1.0], [0.0, 1.0, -2.0, 4.0]]).unwrap();
        let m = Matrix::from_rows(&[[2.0, -1.0], [0.5, 3.0], [1.0, 1.0]]).unwrap();
        assert!(linear_image_residual(&z, &m.matmul(&z).unwrap()).unwrap() < 1e-12);
        let squared = Matrix::from_rows(&[[1.0, 4.0, 9.0, 1.0]]).unwrap();
        assert!(linear_image_residual(&z, &squared).unwrap() > 1e-3);
    }
}
