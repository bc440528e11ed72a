//! Dense decompositions used by the solver: SVDs through faer, QR, Cholesky
//! and symmetric eigenproblems through nalgebra.

use faer::Mat;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const SUBSPACE_OVERSAMPLE: usize = 8;
const SUBSPACE_MAX_ITERS: usize = 500;

/// Left singular vectors of a `d×n` matrix, completed to a full `d×d` basis.
#[derive(Debug, Clone)]
pub struct LeftSvd {
    /// `d×d` orthogonal matrix; column `i` pairs with `singular_values[i]`.
    pub u: DMatrix<f64>,
    /// `d` values in descending order, padded with zeros when `n < d`.
    pub singular_values: Vec<f64>,
}

/// SVD factors with singular values in descending order.
struct Factors {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v: Option<DMatrix<f64>>,
}

/// SVD through faer. `thin` keeps `min(r, c)` singular vectors per side;
/// otherwise `U` is square. `V` is returned only when asked for.
fn svd_factors(m: &DMatrix<f64>, thin: bool, want_v: bool) -> Result<Factors> {
    let a = Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = if thin { a.thin_svd() } else { a.svd() }
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let to_dmatrix =
        |f: faer::MatRef<'_, f64>| DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)]);
    let s = svd.S().column_vector();
    Ok(Factors {
        u: to_dmatrix(svd.U()),
        sigma: (0..s.nrows()).map(|i| s[i]).collect(),
        v: want_v.then(|| to_dmatrix(svd.V())),
    })
}

/// Full left SVD `X = U Σ Vᵀ` with `U` square; a tall `X` gets zero
/// singular values for the columns of `U` beyond `n`.
pub fn full_left_svd(x: &DMatrix<f64>) -> Result<LeftSvd> {
    let (d, n) = x.shape();
    if d == 0 {
        return Ok(LeftSvd {
            u: DMatrix::zeros(0, 0),
            singular_values: Vec::new(),
        });
    }
    // A wide matrix only needs the thin factorization for a square `U`.
    let f = svd_factors(x, n >= d, false)?;
    let mut singular_values = f.sigma;
    singular_values.resize(d, 0.0);
    Ok(LeftSvd {
        u: f.u,
        singular_values,
    })
}

/// Number of singular values strictly above `tol · σ_max`. Zero for a zero matrix.
pub fn numerical_rank(singular_values: &[f64], tol: f64) -> usize {
    let max = singular_values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > tol * max).count()
}

/// The `k` left singular vectors of the smallest singular values, computed
/// without a full decomposition of `X`.
#[derive(Debug, Clone)]
pub struct SmallestLeft {
    /// `d×k`, columns ordered by descending singular value.
    pub basis: DMatrix<f64>,
    /// `k` values, descending.
    pub singular_values: Vec<f64>,
    /// Dimension of the numerical left null space. Exact when `n < d`;
    /// otherwise counted among the computed Ritz values only, so it saturates
    /// at `k + oversampling`.
    pub left_null_dim: usize,
}

/// Smallest-`k` left singular subspace of `x` (`d×n`).
///
/// * `n < d`: thin SVD of `x` for the range, plus an orthonormal basis of its
///   complement, which holds the exactly-zero singular values.
/// * `n ≥ d`: block inverse iteration on the shifted Gram matrix `X Xᵀ + μI`,
///   then a Rayleigh–Ritz step carried out on `Qᵀ X` rather than the Gram
///   matrix so the returned singular values are not squared.
pub fn smallest_left_singular_vectors(
    x: &DMatrix<f64>,
    k: usize,
    tol: f64,
) -> Result<SmallestLeft> {
    let (d, n) = x.shape();
    if k == 0 || k > d {
        return Err(Error::config(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    if n < d {
        thin_route(x, k, tol)
    } else {
        gram_route(x, k, tol)
    }
}

fn thin_route(x: &DMatrix<f64>, k: usize, tol: f64) -> Result<SmallestLeft> {
    let (d, n) = x.shape();
    let Factors { u, sigma, .. } = svd_factors(x, true, false)?;
    let rank = numerical_rank(&sigma, tol);

    let n_complement = (d - n).min(k);
    let n_from_range = k - n_complement;
    let mut basis = DMatrix::zeros(d, k);
    let mut values = Vec::with_capacity(k);
    for (slot, src) in (n - n_from_range..n).enumerate() {
        basis.set_column(slot, &u.column(src));
        values.push(sigma[src]);
    }
    if n_complement > 0 {
        let complement = complement_basis(&u, n_complement, 0x5eed_c0de);
        basis
            .columns_mut(n_from_range, n_complement)
            .copy_from(&complement);
        values.extend(std::iter::repeat_n(0.0, n_complement));
    }
    Ok(SmallestLeft {
        basis,
        singular_values: values,
        left_null_dim: d - rank,
    })
}

/// `count` orthonormal vectors orthogonal to the orthonormal columns of `range`.
fn complement_basis(range: &DMatrix<f64>, count: usize, seed: u64) -> DMatrix<f64> {
    let d = range.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::from_fn(d, count, |_, _| rng.random::<f64>() - 0.5);
    for _ in 0..2 {
        let proj = range * (range.transpose() * &m);
        m -= proj;
        m = m.qr().q();
    }
    m
}

fn gram_route(x: &DMatrix<f64>, k: usize, tol: f64) -> Result<SmallestLeft> {
    let d = x.nrows();
    let p = (k + SUBSPACE_OVERSAMPLE).min(d);
    let gram = x * x.transpose();
    let lambda_max = largest_eigenvalue(&gram);
    if lambda_max == 0.0 {
        let basis = DMatrix::identity(d, d).columns(d - k, k).into_owned();
        return Ok(SmallestLeft {
            basis,
            singular_values: vec![0.0; k],
            left_null_dim: d,
        });
    }

    let mut shift = lambda_max * 1e-13;
    let chol = loop {
        let shifted = &gram + DMatrix::identity(d, d) * shift;
        if let Some(c) = shifted.cholesky() {
            break c;
        }
        shift *= 10.0;
        if shift > lambda_max {
            return Err(Error::Numerical(
                "shifted Gram matrix is not positive definite".into(),
            ));
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5a5b);
    let mut q = DMatrix::from_fn(d, p, |_, _| rng.random::<f64>() - 0.5)
        .qr()
        .q();
    for _ in 0..SUBSPACE_MAX_ITERS {
        q = chol.solve(&q).qr().q();
        // Residuals of the wanted Ritz pairs of the Gram matrix.
        let h = q.transpose() * &gram * &q;
        let eig = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..p).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let converged = idx[..k].iter().all(|&i| {
            let y = &q * eig.eigenvectors.column(i);
            let r = &gram * &y - &y * eig.eigenvalues[i];
            r.norm() <= 1e-13 * lambda_max * (d as f64).sqrt()
        });
        if converged {
            break;
        }
    }

    let projected = q.transpose() * x;
    let small = full_left_svd(&projected)?;
    let rotated = &q * &small.u;
    let basis = rotated.columns(p - k, k).into_owned();
    let sigma_max = lambda_max.sqrt();
    let left_null_dim = small
        .singular_values
        .iter()
        .filter(|&&s| s <= tol * sigma_max)
        .count();
    Ok(SmallestLeft {
        basis,
        singular_values: small.singular_values[p - k..].to_vec(),
        left_null_dim,
    })
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
fn largest_eigenvalue(g: &DMatrix<f64>) -> f64 {
    let d = g.nrows();
    let trace = g.trace();
    if trace == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x00e1_9e17);
    let mut v = nalgebra::DVector::from_fn(d, |_, _| rng.random::<f64>() + 0.5);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let w = g * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        v = w / norm;
        if (next - lambda).abs() <= 1e-12 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0)
}

/// Moore–Penrose pseudo-inverse. Singular values at or below `tol · σ_max`
/// are treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(DMatrix::zeros(c, r));
    }
    let Factors { u, sigma, v } = svd_factors(m, true, true)?;
    let v = v.expect("v requested");
    let max = sigma.first().copied().unwrap_or(0.0);
    let inv_sigma = nalgebra::DVector::from_iterator(
        sigma.len(),
        sigma.iter().map(|&s| {
            if max > 0.0 && s > tol * max {
                1.0 / s
            } else {
                0.0
            }
        }),
    );
    Ok(v * DMatrix::from_diagonal(&inv_sigma) * u.transpose())
}

/// Singular values of `m` in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let a = Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    a.singular_values()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))
}

/// Sine of the largest principal angle between the column spaces of `a` and `b`.
pub fn max_principal_angle_sin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::dim("subspaces live in different ambient dimensions"));
    }
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let residual = &qb - &qa * (qa.transpose() * &qb);
    Ok(singular_values(&residual)?.first().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn random(d: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(d, n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn check_left_svd(x: &DMatrix<f64>) {
        let svd = full_left_svd(x).unwrap();
        let d = x.nrows();
        let ortho = svd.u.transpose() * &svd.u - DMatrix::identity(d, d);
        assert!(ortho.norm() < 1e-12);
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        // ‖u_iᵀ X‖ equals σ_i.
        for i in 0..d {
            let row_norm = (svd.u.column(i).transpose() * x).norm();
            assert!((row_norm - svd.singular_values[i]).abs() < 1e-10 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn full_left_svd_wide_tall_square() {
        check_left_svd(&random(4, 50, 1));
        check_left_svd(&random(6, 3, 2));
        check_left_svd(&random(5, 5, 3));
        check_left_svd(&DMatrix::zeros(3, 7));
    }

    #[test]
    fn rank_of_rank_one_matrix() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let svd = full_left_svd(&x).unwrap();
        assert_eq!(numerical_rank(&svd.singular_values, 1e-10), 1);
        assert_eq!(numerical_rank(&[0.0, 0.0], 1e-10), 0);
    }

    #[test]
    fn left_vectors_of_a_rank_one_tall_matrix_match_their_values() {
        let u = DVector::from_column_slice(&[1.3, -0.7, 2.1, 0.4, -1.9]);
        let v = DVector::from_column_slice(&[0.8, -2.2, 1.5, 3.1]);
        let x = &u * v.transpose();
        let svd = full_left_svd(&x).unwrap();
        assert!((&svd.u.transpose() * &svd.u - DMatrix::identity(5, 5)).norm() < 1e-12);
        // ‖uᵢᵀX‖ = σᵢ for every column, including the padded null directions
        for (i, s) in svd.singular_values.iter().enumerate() {
            let image = (svd.u.column(i).transpose() * &x).norm();
            assert!(
                (image - s).abs() < 1e-12 * x.norm(),
                "column {i}: {image} vs {s}"
            );
        }
        assert!((svd.singular_values[0] - u.norm() * v.norm()).abs() < 1e-12 * x.norm());
    }

    #[test]
    fn truncated_matches_full_on_wide_matrix() {
        // rank-3 data in 12 dims: null space of dimension 9
        let x = random(12, 3, 4) * random(3, 200, 5);
        for k in [2, 9, 10] {
            let t = smallest_left_singular_vectors(&x, k, 1e-10).unwrap();
            let f = full_left_svd(&x).unwrap();
            for (a, b) in t.singular_values.iter().zip(&f.singular_values[12 - k..]) {
                assert!((a - b).abs() < 1e-9 * f.singular_values[0]);
            }
            let residual = (t.basis.transpose() * &x).norm();
            let optimum: f64 = f.singular_values[12 - k..]
                .iter()
                .map(|s| s * s)
                .sum::<f64>()
                .sqrt();
            assert!((residual - optimum).abs() < 1e-8 * (1.0 + optimum));
            if k <= 9 {
                assert!(residual < 1e-9 * x.norm());
            }
        }
    }

    #[test]
    fn truncated_tall_matrix_uses_complement() {
        let x = random(10, 4, 6);
        let t = smallest_left_singular_vectors(&x, 7, 1e-10).unwrap();
        assert_eq!(t.left_null_dim, 6);
        let ortho = t.basis.transpose() * &t.basis - DMatrix::identity(7, 7);
        assert!(ortho.norm() < 1e-12);
        let f = full_left_svd(&x).unwrap();
        let optimum: f64 = f.singular_values[3..]
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt();
        assert_relative_eq!(
            (t.basis.transpose() * &x).norm(),
            optimum,
            max_relative = 1e-10
        );
    }

    #[test]
    fn pseudo_inverse_of_full_column_rank() {
        let s = random(5, 3, 7);
        let pinv = pseudo_inverse(&s, 1e-12).unwrap();
        let eye = &pinv * &s;
        assert!((eye - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn principal_angle_zero_for_same_span() {
        let a = random(5, 2, 8);
        let b = &a * DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        assert!(max_principal_angle_sin(&a, &b).unwrap() < 1e-12);
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_relative_eq!(
            max_principal_angle_sin(&e1, &e2).unwrap(),
            1.0,
            epsilon = 1e-14
        );
    }
}
