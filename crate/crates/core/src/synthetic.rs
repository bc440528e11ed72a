//! Ground-truth latent worlds and their linear observations.
//!
//! Randomness comes from ChaCha8 (a counter-based generator with a stable
//! output stream across platforms). A world seed is split into independent
//! per-matrix seeds by reading the first word of stream `id` of that seed, see
//! [`stream_seed`]; the stream ids are listed in [`streams`].

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::alignment::DEFAULT_RANK_TOLERANCE;
use crate::error::{Error, Result};
use crate::io;
use crate::linalg;
use crate::matrix::Matrix;

/// Stream ids used to derive per-matrix seeds from a world seed.
pub mod streams {
    pub const LATENTS: u64 = 0;
    /// Generation matrix of modality `m` (0-based) uses `TRANSFORM + m`.
    pub const TRANSFORM: u64 = 1;
    /// Observation noise of modality `m` (0-based) uses `NOISE + m`.
    pub const NOISE: u64 = 101;
}

/// Seed for substream `stream` of `seed`.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A finite Gaussian mixture over `R^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// One `k×k` covariance per component, as a list of rows.
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl GmmSpec {
    /// Two equally weighted unit-covariance clusters.
    ///
    /// For `k = 2` the means are `[0, 1]` and `[4, 5]`; in general the first
    /// mean alternates `0, 1, 0, 1, …` and the second is the first plus 4.
    pub fn two_cluster(k: usize) -> Self {
        let mu1: Vec<f64> = (0..k).map(|i| (i % 2) as f64).collect();
        let mu2: Vec<f64> = mu1.iter().map(|v| v + 4.0).collect();
        let eye: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        GmmSpec {
            weights: vec![0.5, 0.5],
            means: vec![mu1, mu2],
            covariances: vec![eye.clone(), eye],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Checks weights, means and covariances; returns the lower Cholesky factor of each covariance.
    pub fn validate(&self) -> Result<Vec<DMatrix<f64>>> {
        let c = self.weights.len();
        if c == 0 || self.means.len() != c || self.covariances.len() != c {
            return Err(Error::config(
                "mixture needs matching, nonempty weights, means and covariances",
            ));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("mixture weights must be nonnegative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        let k = self.dim();
        if k == 0 {
            return Err(Error::config("mixture dimension must be positive"));
        }
        let mut factors = Vec::with_capacity(c);
        for (i, (mean, cov)) in self.means.iter().zip(&self.covariances).enumerate() {
            if mean.len() != k || mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!(
                    "mean {i} is not a finite {k}-vector"
                )));
            }
            if cov.len() != k || cov.iter().any(|r| r.len() != k) {
                return Err(Error::config(format!("covariance {i} is not {k}x{k}")));
            }
            let m = DMatrix::from_fn(k, k, |r, s| cov[r][s]);
            if m.iter().any(|v| !v.is_finite()) || (&m - m.transpose()).amax() > 1e-12 {
                return Err(Error::config(format!("covariance {i} is not symmetric")));
            }
            let chol = m
                .cholesky()
                .ok_or_else(|| Error::config(format!("covariance {i} is not positive definite")))?;
            factors.push(chol.l());
        }
        Ok(factors)
    }
}

/// Draws `n` latent vectors (as columns) and their component labels.
pub fn sample_gmm_latents(spec: &GmmSpec, n: usize, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    let factors = spec.validate()?;
    if n == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    let k = spec.dim();
    let mut rng = rng(seed);
    let mut z = DMatrix::zeros(k, n);
    let mut labels = Vec::with_capacity(n);
    let last = spec.weights.len() - 1;
    for i in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut component = last;
        for (c, w) in spec.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                component = c;
                break;
            }
        }
        // Guard against rounding in the cumulative sum landing on a zero weight.
        while spec.weights[component] == 0.0 && component > 0 {
            component -= 1;
        }
        let eps = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        let sample = DVector::from_column_slice(&spec.means[component]) + &factors[component] * eps;
        z.set_column(i, &sample);
        labels.push(component);
    }
    Ok((Matrix::from_dmatrix(z)?, labels))
}

/// Two classes on either side of the line `y = x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    /// Maximum perpendicular distance from the line.
    pub margin: f64,
    pub intercept: f64,
    /// Interval for the foot point's x-coordinate on the line.
    pub x_range: (f64, f64),
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            margin: 10.0,
            intercept: -10.0,
            x_range: (-10.0, 20.0),
        }
    }
}

pub const LABEL_BELOW: usize = 0;
pub const LABEL_ABOVE: usize = 1;

/// `n/2` points above and `n/2` below `y = x − 10`, at perpendicular
/// distances uniform in `(0, margin]`. Samples alternate above/below.
pub fn sample_uniform_boundary_latents(
    n: usize,
    margin: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    sample_boundary_latents(
        &BoundarySpec {
            margin,
            ..BoundarySpec::default()
        },
        n,
        seed,
    )
}

pub fn sample_boundary_latents(
    spec: &BoundarySpec,
    n: usize,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::config(format!(
            "boundary world needs a positive even n, got {n}"
        )));
    }
    if !(spec.margin > 0.0 && spec.margin.is_finite()) {
        return Err(Error::config("margin must be positive"));
    }
    let (lo, hi) = spec.x_range;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::config("x range must be a finite nonempty interval"));
    }
    let mut rng = rng(seed);
    let foot = Uniform::new(lo, hi).map_err(|e| Error::config(e.to_string()))?;
    let normal = std::f64::consts::FRAC_1_SQRT_2;
    let mut z = DMatrix::zeros(2, n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let x0: f64 = foot.sample(&mut rng);
        // 1 - U[0,1) lies in (0, 1]
        let offset = spec.margin * (1.0 - rng.random::<f64>());
        let (side, label) = if i % 2 == 0 {
            (1.0, LABEL_ABOVE)
        } else {
            (-1.0, LABEL_BELOW)
        };
        let y0 = x0 + spec.intercept;
        z[(0, i)] = x0 - side * offset * normal;
        z[(1, i)] = y0 + side * offset * normal;
        labels.push(label);
    }
    Ok((Matrix::from_dmatrix(z)?, labels))
}

/// `d_m×k` matrix with i.i.d. entries uniform on `[lo, hi]`.
pub fn random_transform(d_m: usize, k: usize, lo: f64, hi: f64, seed: u64) -> Result<Matrix> {
    if d_m == 0 || k == 0 {
        return Err(Error::config("transform dimensions must be positive"));
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::config(format!("invalid entry range [{lo}, {hi}]")));
    }
    let dist = Uniform::new_inclusive(lo, hi).map_err(|e| Error::config(e.to_string()))?;
    let mut rng = rng(seed);
    let m = DMatrix::from_fn(d_m, k, |_, _| dist.sample(&mut rng));
    Matrix::from_dmatrix(m)
}

/// `S·Z` plus i.i.d. `N(0, noise_sigma²)` entries.
pub fn generate_modality(s: &Matrix, z: &Matrix, noise_sigma: f64, seed: u64) -> Result<Matrix> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::config(format!(
            "noise sigma must be nonnegative, got {noise_sigma}"
        )));
    }
    let clean = s.matmul(z)?;
    if noise_sigma == 0.0 {
        return Ok(clean);
    }
    let dist = Normal::new(0.0, noise_sigma).map_err(|e| Error::config(e.to_string()))?;
    let mut rng = rng(seed);
    let mut x = clean.into_dmatrix();
    // column-major traversal: sample by sample
    for v in x.iter_mut() {
        *v += dist.sample(&mut rng);
    }
    Matrix::from_dmatrix(x)
}

/// `S†·x_m`, recovering the latents of a full-column-rank generation matrix.
pub fn pseudo_inverse_encode(s: &Matrix, x_m: &Matrix) -> Result<Matrix> {
    let (d_m, k) = s.shape();
    if x_m.rows() != d_m {
        return Err(Error::dim(format!(
            "generation matrix has {d_m} rows but data has {}",
            x_m.rows()
        )));
    }
    let sigma = linalg::singular_values(s.as_dmatrix())?;
    let rank = linalg::numerical_rank(&sigma, DEFAULT_RANK_TOLERANCE);
    if rank < k {
        return Err(Error::Numerical(format!(
            "generation matrix has numerical rank {rank} < k={k}; pseudo-inverse encoding needs full column rank"
        )));
    }
    let pinv = linalg::pseudo_inverse(s.as_dmatrix(), DEFAULT_RANK_TOLERANCE)?;
    Matrix::from_dmatrix(pinv * x_m.as_dmatrix())
}

/// How the ground-truth latents are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentModel {
    Gmm(GmmSpec),
    Boundary(BoundarySpec),
}

/// Everything needed to regenerate a world bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub n: usize,
    pub k: usize,
    /// Observation dimension of each modality.
    pub dims: Vec<usize>,
    pub latent: LatentModel,
    pub noise_sigma: f64,
    /// Range of the uniform entries of each generation matrix.
    pub transform_range: (f64, f64),
    pub seed: u64,
}

impl WorldSpec {
    /// Two-cluster Gaussian latents observed through two uniform `[-5, 5]` maps.
    pub fn gmm(n: usize, d1: usize, d2: usize, k: usize, noise_sigma: f64, seed: u64) -> Self {
        WorldSpec {
            n,
            k,
            dims: vec![d1, d2],
            latent: LatentModel::Gmm(GmmSpec::two_cluster(k)),
            noise_sigma,
            transform_range: (-5.0, 5.0),
            seed,
        }
    }

    /// 2-D boundary latents observed in two `d`-dimensional modalities.
    pub fn boundary(n: usize, d1: usize, d2: usize, seed: u64) -> Self {
        WorldSpec {
            n,
            k: 2,
            dims: vec![d1, d2],
            latent: LatentModel::Boundary(BoundarySpec::default()),
            noise_sigma: 0.0,
            transform_range: (-5.0, 5.0),
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub spec: WorldSpec,
    /// `k×n` ground-truth latents.
    pub z_true: Matrix,
    pub labels: Vec<usize>,
    /// Generation matrices `S_m` (`d_m×k`).
    pub s_list: Vec<Matrix>,
    /// Observations `X_m` (`d_m×n`).
    pub x_list: Vec<Matrix>,
}

impl SyntheticWorld {
    pub fn generate(spec: &WorldSpec) -> Result<Self> {
        if spec.dims.is_empty() {
            return Err(Error::config("a world needs at least one modality"));
        }
        let latent_seed = stream_seed(spec.seed, streams::LATENTS);
        let (z_true, labels) = match &spec.latent {
            LatentModel::Gmm(g) => {
                if g.dim() != spec.k {
                    return Err(Error::config(format!(
                        "mixture dimension {} does not match k={}",
                        g.dim(),
                        spec.k
                    )));
                }
                sample_gmm_latents(g, spec.n, latent_seed)?
            }
            LatentModel::Boundary(b) => {
                if spec.k != 2 {
                    return Err(Error::config(
                        "boundary latents are 2-dimensional; k must be 2",
                    ));
                }
                sample_boundary_latents(b, spec.n, latent_seed)?
            }
        };
        let (lo, hi) = spec.transform_range;
        let mut s_list = Vec::with_capacity(spec.dims.len());
        let mut x_list = Vec::with_capacity(spec.dims.len());
        for (m, &d_m) in spec.dims.iter().enumerate() {
            let m = m as u64;
            let s = random_transform(
                d_m,
                spec.k,
                lo,
                hi,
                stream_seed(spec.seed, streams::TRANSFORM + m),
            )?;
            let x = generate_modality(
                &s,
                &z_true,
                spec.noise_sigma,
                stream_seed(spec.seed, streams::NOISE + m),
            )?;
            s_list.push(s);
            x_list.push(x);
        }
        Ok(SyntheticWorld {
            spec: spec.clone(),
            z_true,
            labels,
            s_list,
            x_list,
        })
    }

    /// Writes `Z.csv`, `labels.csv`, `S<m>.csv`, `X<m>.csv` and `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_matrix(&dir.join("Z.csv"), &self.z_true)?;
        io::write_labels(&dir.join("labels.csv"), &self.labels)?;
        for (m, (s, x)) in self.s_list.iter().zip(&self.x_list).enumerate() {
            io::write_matrix(&dir.join(format!("S{}.csv", m + 1)), s)?;
            io::write_matrix(&dir.join(format!("X{}.csv", m + 1)), x)?;
        }
        io::write_json(&dir.join("manifest.json"), &self.spec)
    }

    /// Reads a world written by [`SyntheticWorld::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let spec: WorldSpec = io::read_json(&dir.join("manifest.json"))?;
        let z_true = io::read_matrix(&dir.join("Z.csv"))?;
        let labels = io::read_labels(&dir.join("labels.csv"))?;
        let mut s_list = Vec::new();
        let mut x_list = Vec::new();
        for m in 1..=spec.dims.len() {
            s_list.push(io::read_matrix(&dir.join(format!("S{m}.csv")))?);
            x_list.push(io::read_matrix(&dir.join(format!("X{m}.csv")))?);
        }
        Ok(SyntheticWorld {
            spec,
            z_true,
            labels,
            s_list,
            x_list,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmm_single_component_moments() {
        let spec = GmmSpec {
            weights: vec![1.0],
            means: vec![vec![0.0, 0.0]],
            covariances: vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
        };
        let n = 10_000;
        let (z, _) = sample_gmm_latents(&spec, n, 3).unwrap();
        let z = z.as_dmatrix();
        let mean = z.column_mean();
        assert!(mean.amax() < 0.1);
        let centered = z - &mean * nalgebra::RowDVector::from_element(n, 1.0);
        let cov = &centered * centered.transpose() / (n as f64 - 1.0);
        assert!((cov - DMatrix::<f64>::identity(2, 2)).amax() < 0.1);
    }

    #[test]
    fn gmm_zero_weight_component_never_drawn() {
        let mut spec = GmmSpec::two_cluster(2);
        spec.weights = vec![1.0, 0.0];
        let (_, labels) = sample_gmm_latents(&spec, 500, 9).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn gmm_balanced_labels() {
        let (_, labels) = sample_gmm_latents(&GmmSpec::two_cluster(2), 2000, 11).unwrap();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        assert!((850..=1150).contains(&ones));
        assert!((850..=1150).contains(&(2000 - ones)));
    }

    #[test]
    fn gmm_spec_validation() {
        let mut bad = GmmSpec::two_cluster(2);
        bad.weights = vec![0.6, 0.6];
        assert!(bad.validate().is_err());
        let mut bad = GmmSpec::two_cluster(2);
        bad.covariances[1] = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(bad.validate().is_err());
        let mut bad = GmmSpec::two_cluster(2);
        bad.covariances[0] = vec![vec![1.0, 0.1], vec![0.0, 1.0]];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn two_cluster_means_for_k2() {
        let g = GmmSpec::two_cluster(2);
        assert_eq!(g.means, vec![vec![0.0, 1.0], vec![4.0, 5.0]]);
    }

    #[test]
    fn boundary_sides_and_balance() {
        let (z, labels) = sample_uniform_boundary_latents(2000, 10.0, 5).unwrap();
        let mut counts = [0usize; 2];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let (x, y) = (z.get(0, i), z.get(1, i));
            let signed = (y - (x - 10.0)) * std::f64::consts::FRAC_1_SQRT_2;
            if l == LABEL_ABOVE {
                assert!(y > x - 10.0);
                assert!(signed <= 10.0 + 1e-12);
            } else {
                assert!(y < x - 10.0);
                assert!(signed >= -10.0 - 1e-12);
            }
        }
        assert_eq!(counts, [1000, 1000]);
        assert!(sample_uniform_boundary_latents(7, 10.0, 5).is_err());
        assert!(sample_uniform_boundary_latents(8, 0.0, 5).is_err());
    }

    #[test]
    fn transform_ranges() {
        let s = random_transform(3, 4, -5.0, 5.0, 1).unwrap();
        assert!(s.iter().all(|&v| (-5.0..=5.0).contains(&v)));
        let lo = 2.0;
        let eps = 1e-9;
        let s = random_transform(3, 3, lo, lo + eps, 2).unwrap();
        assert!(s.iter().all(|&v| (v - lo).abs() <= eps));
        assert!(random_transform(2, 2, 1.0, 1.0, 0).is_err());
        assert!(random_transform(0, 2, -1.0, 1.0, 0).is_err());

        let mut sum = 0.0;
        for seed in 0..2500 {
            sum += random_transform(2, 2, -5.0, 5.0, seed)
                .unwrap()
                .iter()
                .sum::<f64>();
        }
        assert!((sum / 10_000.0).abs() < 0.3);
    }

    #[test]
    fn modality_generation() {
        let (z, _) = sample_gmm_latents(&GmmSpec::two_cluster(2), 50, 1).unwrap();
        assert_eq!(
            generate_modality(&Matrix::identity(2), &z, 0.0, 0).unwrap(),
            z
        );

        let s = random_transform(3, 2, -5.0, 5.0, 4).unwrap();
        let x = generate_modality(&s, &z, 0.0, 0).unwrap();
        for i in 0..3 {
            for j in 0..50 {
                let mut acc = 0.0;
                for l in 0..2 {
                    acc += s.get(i, l) * z.get(l, j);
                }
                assert!((x.get(i, j) - acc).abs() <= 1e-12 * (1.0 + acc.abs()));
            }
        }

        let (z, _) = sample_gmm_latents(&GmmSpec::two_cluster(2), 20_000, 2).unwrap();
        let noisy = generate_modality(&s, &z, 1.0, 8).unwrap();
        let clean = s.matmul(&z).unwrap();
        let r = noisy.sub(&clean).unwrap();
        let var = r.iter().map(|v| v * v).sum::<f64>() / (r.rows() * r.cols()) as f64;
        assert!((0.9..=1.1).contains(&var), "variance {var}");
        assert!(generate_modality(&s, &z, -1.0, 0).is_err());
    }

    #[test]
    fn pseudo_inverse_cases() {
        let x = Matrix::from_rows(&[[1.0, 2.0, -3.0], [4.0, 0.5, 6.0]]).unwrap();
        let out = pseudo_inverse_encode(&Matrix::identity(2).scale(4.0), &x).unwrap();
        assert!(out.sub(&x.scale(0.25)).unwrap().frobenius_norm() < 1e-15);

        // orthonormal columns: S† = Sᵀ
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = Matrix::from_rows(&[[h, 0.0], [h, 0.0], [0.0, 1.0]]).unwrap();
        let x3 = random_transform(3, 5, -1.0, 1.0, 3).unwrap();
        let expect = s.transpose().matmul(&x3).unwrap();
        assert!(
            pseudo_inverse_encode(&s, &x3)
                .unwrap()
                .sub(&expect)
                .unwrap()
                .frobenius_norm()
                < 1e-12
        );

        let singular = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(
            pseudo_inverse_encode(&singular, &x),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn worlds_are_deterministic_and_consistent() {
        let spec = WorldSpec::gmm(100, 3, 2, 2, 0.0, 42);
        let a = SyntheticWorld::generate(&spec).unwrap();
        let b = SyntheticWorld::generate(&spec).unwrap();
        assert_eq!(a.x_list, b.x_list);
        assert_eq!(a.z_true, b.z_true);
        for (s, x) in a.s_list.iter().zip(&a.x_list) {
            assert_eq!(
                x.sub(&s.matmul(&a.z_true).unwrap())
                    .unwrap()
                    .frobenius_norm(),
                0.0
            );
        }
        assert_ne!(
            a.s_list[0].column_range(0, 2),
            a.s_list[1].column_range(0, 2)
        );
        let other = SyntheticWorld::generate(&WorldSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(other.z_true, a.z_true);
    }

    #[test]
    fn world_save_load() {
        let dir = tempfile::tempdir().unwrap();
        let w = SyntheticWorld::generate(&WorldSpec::boundary(10, 2, 3, 1)).unwrap();
        w.save(dir.path()).unwrap();
        let back = SyntheticWorld::load(dir.path()).unwrap();
        assert_eq!(back.spec, w.spec);
        assert_eq!(back.x_list, w.x_list);
        assert_eq!(back.labels, w.labels);
    }
}
