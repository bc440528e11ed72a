//! Independent reference computations for the integration tests.
//!
//! Everything here works on plain `Vec<Vec<f64>>` (row-major) so that the
//! oracles share no code with the library's nalgebra-backed routines.

#![allow(dead_code, clippy::needless_range_loop)]

use perfalign::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rows = Vec<Vec<f64>>;

pub fn rows_of(m: &Matrix) -> Rows {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect())
        .collect()
}

pub fn matrix_of(rows: &Rows) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Rows {
    (0..rows)
        .map(|_| (0..cols).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Rows {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(lo..hi)).collect())
        .collect()
}

pub fn matmul(a: &Rows, b: &Rows) -> Rows {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|t| row[t] * b[t][j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &Rows) -> Rows {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn frobenius(a: &Rows) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Eigenvector `i` is row `i` of the second result.
pub fn jacobi_eigen(sym: &Rows) -> (Vec<f64>, Rows) {
    let n = sym.len();
    let mut a = sym.clone();
    let mut v: Rows = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n)
            .map(|i| a[i][i] * a[i][i])
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| v.iter().map(|row| row[i]).collect())
        .collect();
    (values, vectors)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(sym: &Rows) -> Vec<f64> {
    jacobi_eigen(sym).0
}

/// Squared singular values of `x` (d×n) padded with zeros to length d, ascending.
pub fn squared_singular_values(x: &Rows) -> Vec<f64> {
    jacobi_eigenvalues(&matmul(x, &transpose(x)))
        .into_iter()
        .map(|v| v.max(0.0))
        .collect()
}

/// Optimal residual `sqrt(Σ of the k smallest σ²)`.
pub fn eckart_young_residual(x: &Rows, k: usize) -> f64 {
    squared_singular_values(x)
        .iter()
        .take(k)
        .sum::<f64>()
        .sqrt()
}

/// `k` orthonormal rows of length `d` (Gram–Schmidt on Gaussian draws).
pub fn random_orthonormal_rows(k: usize, d: usize, rng: &mut ChaCha8Rng) -> Rows {
    let mut out: Rows = Vec::with_capacity(k);
    while out.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for u in &out {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= dot * ui;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// Largest absolute deviation of `a·aᵀ` from the identity.
pub fn orthonormality_error(a: &Rows) -> f64 {
    let g = matmul(a, &transpose(a));
    let mut worst: f64 = 0.0;
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

/// Symmetric InfoNCE written out term by term.
pub fn info_nce_reference(z1: &Rows, z2: &Rows, temperature: f64) -> f64 {
    let b = z1[0].len();
    let unit = |z: &Rows, j: usize| {
        let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        col.into_iter().map(|v| v / norm).collect::<Vec<f64>>()
    };
    let u1: Vec<Vec<f64>> = (0..b).map(|j| unit(z1, j)).collect();
    let u2: Vec<Vec<f64>> = (0..b).map(|j| unit(z2, j)).collect();
    let sim = |i: usize, j: usize| {
        u1[i].iter().zip(&u2[j]).map(|(a, c)| a * c).sum::<f64>() / temperature
    };
    let mut total = 0.0;
    for i in 0..b {
        let row: f64 = (0..b).map(|j| sim(i, j).exp()).sum();
        let col: f64 = (0..b).map(|j| sim(j, i).exp()).sum();
        total += row.ln() - sim(i, i) + col.ln() - sim(i, i);
    }
    total / (2.0 * b as f64)
}

/// Central-difference gradient of `f` at `x`.
pub fn central_difference(f: impl Fn(&Rows) -> f64, x: &Rows, h: f64) -> Rows {
    let mut grad = x.clone();
    let mut probe = x.clone();
    for i in 0..x.len() {
        for j in 0..x[i].len() {
            probe[i][j] = x[i][j] + h;
            let up = f(&probe);
            probe[i][j] = x[i][j] - h;
            let down = f(&probe);
            probe[i][j] = x[i][j];
            grad[i][j] = (up - down) / (2.0 * h);
        }
    }
    grad
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

/// Relative Frobenius distance `‖a − b‖/‖b‖`.
pub fn relative_error(a: &Rows, b: &Rows) -> f64 {
    let diff: Rows = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect();
    frobenius(&diff) / frobenius(b)
}

/// Spectral-free subspace distance `‖PᵀP − QᵀQ‖_F` between the row spaces of
/// two matrices with orthonormal rows. Zero iff the spans coincide.
pub fn projector_distance(p: &Rows, q: &Rows) -> f64 {
    let pp = matmul(&transpose(p), p);
    let qq = matmul(&transpose(q), q);
    let diff: Rows = pp
        .iter()
        .zip(&qq)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    frobenius(&diff)
}

/// Solves the square system `m·x = rhs` by Gaussian elimination with partial pivoting.
pub fn solve_linear(m: &Rows, rhs: &[f64]) -> Vec<f64> {
    let n = m.len();
    let mut a: Rows = m
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut row = r.clone();
            row.push(*b);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - tail) / a[r][r];
    }
    x
}
