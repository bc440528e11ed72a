//! Linear contrastive baseline: two linear encoders trained by plain gradient
//! descent on a symmetric InfoNCE objective.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::synthetic::stream_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub k: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Standard deviation of the Gaussian initialization.
    pub init_scale: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            k: 2,
            temperature: 0.1,
            learning_rate: 1e-2,
            epochs: 200,
            batch_size: Some(128),
            seed: 0,
            init_scale: 0.1,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.k == 0 {
            return Err(Error::config("k must be positive"));
        }
        if !positive(self.temperature)
            || !positive(self.learning_rate)
            || !positive(self.init_scale)
        {
            return Err(Error::config(
                "temperature, learning rate and init scale must be positive",
            ));
        }
        if let Some(b) = self.batch_size {
            if b < 2 || b > n {
                return Err(Error::config(format!(
                    "batch size must be in [2, n={n}], got {b}"
                )));
            }
        } else if n < 2 {
            return Err(Error::config(
                "contrastive training needs at least 2 samples",
            ));
        }
        Ok(())
    }
}

/// Loss value and its gradients with respect to both latent batches.
#[derive(Debug, Clone)]
pub struct InfoNceEval {
    pub loss: f64,
    pub grad_z1: DMatrix<f64>,
    pub grad_z2: DMatrix<f64>,
}

fn unit_columns(z: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut u = z.clone();
    let mut norms = Vec::with_capacity(z.ncols());
    for (j, mut col) in u.column_iter_mut().enumerate() {
        let r = col.norm();
        if r == 0.0 {
            return Err(Error::data(format!("latent column {j} has zero norm")));
        }
        col /= r;
        norms.push(r);
    }
    Ok((u, norms))
}

/// Symmetric InfoNCE over a batch of `b` pairs (columns).
///
/// Similarities are cosines scaled by `1/temperature`; the loss averages the
/// cross-entropy of each row (modality 1 → 2) and each column (2 → 1) against
/// the matching pair.
pub fn info_nce(z1: &DMatrix<f64>, z2: &DMatrix<f64>, temperature: f64) -> Result<InfoNceEval> {
    if z1.shape() != z2.shape() {
        return Err(Error::dim(format!(
            "batches differ in shape: {:?} vs {:?}",
            z1.shape(),
            z2.shape()
        )));
    }
    let b = z1.ncols();
    if b < 2 {
        return Err(Error::data("InfoNCE needs a batch of at least 2 pairs"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::config("temperature must be positive"));
    }
    let (u1, r1) = unit_columns(z1)?;
    let (u2, r2) = unit_columns(z2)?;
    let logits = u1.transpose() * &u2 / temperature;
    let (loss, g) = if 2.0 / temperature < EXP_RANGE {
        logit_gradient_shared_shift(&logits, temperature)
    } else {
        logit_gradient_two_pass(&logits)
    };

    let grad_u1 = &u2 * g.transpose() / temperature;
    let grad_u2 = &u1 * &g / temperature;
    Ok(InfoNceEval {
        loss,
        grad_z1: through_normalization(&u1, &r1, grad_u1),
        grad_z2: through_normalization(&u2, &r2, grad_u2),
    })
}

/// Cosine logits lie in `[-1/τ, 1/τ]`, so one exponential per entry with the
/// shift `1/τ` serves both softmax directions while `2/τ` stays in range.
const EXP_RANGE: f64 = 600.0;

/// Returns the loss and `dL/dlogits = ((P_row - I) + (P_col - I)) / 2b`.
fn logit_gradient_shared_shift(logits: &DMatrix<f64>, temperature: f64) -> (f64, DMatrix<f64>) {
    let b = logits.nrows();
    let shift = 1.0 / temperature;
    let e = logits.map(|s| (s - shift).exp());
    let row_sum: Vec<f64> = e.row_iter().map(|r| r.sum()).collect();
    let col_sum: Vec<f64> = e.column_iter().map(|c| c.sum()).collect();
    finish(
        logits,
        |i, j| {
            let v = e[(i, j)];
            (v / row_sum[i], v / col_sum[j])
        },
        row_sum.iter().map(|s| shift + s.ln()).sum::<f64>()
            + col_sum.iter().map(|s| shift + s.ln()).sum::<f64>(),
        b,
    )
}

/// Same as [`logit_gradient_shared_shift`] with per-row and per-column maxima,
/// for temperatures small enough that a shared shift would underflow.
fn logit_gradient_two_pass(logits: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let b = logits.nrows();
    let lse = |v: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = v.collect();
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + v.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
    };
    let row_lse: Vec<f64> = (0..b)
        .map(|i| lse(&mut logits.row(i).iter().copied()))
        .collect();
    let col_lse: Vec<f64> = (0..b)
        .map(|j| lse(&mut logits.column(j).iter().copied()))
        .collect();
    finish(
        logits,
        |i, j| {
            let s = logits[(i, j)];
            ((s - row_lse[i]).exp(), (s - col_lse[j]).exp())
        },
        row_lse.iter().sum::<f64>() + col_lse.iter().sum::<f64>(),
        b,
    )
}

fn finish(
    logits: &DMatrix<f64>,
    probs: impl Fn(usize, usize) -> (f64, f64),
    lse_total: f64,
    b: usize,
) -> (f64, DMatrix<f64>) {
    let diag_sum: f64 = (0..b).map(|i| logits[(i, i)]).sum();
    let loss = (lse_total - 2.0 * diag_sum) / (2.0 * b as f64);
    let scale = 1.0 / (2.0 * b as f64);
    let g = DMatrix::from_fn(b, b, |i, j| {
        let (pr, pc) = probs(i, j);
        let mut v = pr + pc;
        if i == j {
            v -= 2.0;
        }
        v * scale
    });
    (loss, g)
}

/// Back-propagates through `u = z/‖z‖`: `dz = (du - u·(uᵀdu)) / ‖z‖`.
fn through_normalization(
    u: &DMatrix<f64>,
    norms: &[f64],
    mut grad_u: DMatrix<f64>,
) -> DMatrix<f64> {
    for (j, mut g) in grad_u.column_iter_mut().enumerate() {
        let uj = u.column(j);
        let radial = uj.dot(&g);
        g -= uj * radial;
        g /= norms[j];
    }
    grad_u
}

/// Loss value only; see [`info_nce`].
pub fn info_nce_loss(z1_hat: &Matrix, z2_hat: &Matrix, temperature: f64) -> Result<f64> {
    Ok(info_nce(z1_hat.as_dmatrix(), z2_hat.as_dmatrix(), temperature)?.loss)
}

#[derive(Debug, Clone)]
pub struct TrainedEncoders {
    pub a1: Matrix,
    pub a2: Matrix,
    /// One entry per epoch: the full-batch loss before that epoch's update,
    /// or the mean mini-batch loss when training with mini-batches.
    pub loss_history: Vec<f64>,
}

/// Trains `A1` (k×d1) and `A2` (k×d2) so that `A1·x1_i` and `A2·x2_i` agree in
/// direction.
///
/// Full-batch histories are non-increasing when the learning rate sits below
/// `2/L`, `L` being the local smoothness of the loss in `(A1, A2)`. `L` grows
/// like `‖X‖²/(τ·‖A·x‖²)`, so large inputs or small encoders need a smaller
/// step; no monotonicity is promised otherwise.
pub fn train_linear_contrastive(
    x1: &Matrix,
    x2: &Matrix,
    config: &ContrastiveConfig,
) -> Result<TrainedEncoders> {
    if x1.cols() != x2.cols() {
        return Err(Error::dim("modalities are not paired"));
    }
    let n = x1.cols();
    config.validate(n)?;
    let init = Normal::new(0.0, config.init_scale).map_err(|e| Error::config(e.to_string()))?;
    let mut rng1 = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, 0));
    let mut rng2 = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, 1));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, 2));
    let mut a1 = DMatrix::from_fn(config.k, x1.rows(), |_, _| init.sample(&mut rng1));
    let mut a2 = DMatrix::from_fn(config.k, x2.rows(), |_, _| init.sample(&mut rng2));
    let (x1, x2) = (x1.as_dmatrix(), x2.as_dmatrix());

    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        let epoch_loss = match config.batch_size {
            None => step(&mut a1, &mut a2, x1, x2, config)?,
            Some(b) => {
                order.shuffle(&mut shuffle_rng);
                let mut total = 0.0;
                let mut batches = 0usize;
                for chunk in order.chunks(b).filter(|c| c.len() >= 2) {
                    let bx1 = x1.select_columns(chunk);
                    let bx2 = x2.select_columns(chunk);
                    total += step(&mut a1, &mut a2, &bx1, &bx2, config)?;
                    batches += 1;
                }
                total / batches as f64
            }
        };
        if !epoch_loss.is_finite() || a1.iter().chain(a2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: epoch_loss,
            });
        }
        history.push(epoch_loss);
    }
    Ok(TrainedEncoders {
        a1: Matrix::from_dmatrix(a1)?,
        a2: Matrix::from_dmatrix(a2)?,
        loss_history: history,
    })
}

/// One gradient step; returns the loss before the update.
fn step(
    a1: &mut DMatrix<f64>,
    a2: &mut DMatrix<f64>,
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    config: &ContrastiveConfig,
) -> Result<f64> {
    let z1 = &*a1 * x1;
    let z2 = &*a2 * x2;
    let eval = info_nce(&z1, &z2, config.temperature)?;
    *a1 -= eval.grad_z1 * x1.transpose() * config.learning_rate;
    *a2 -= eval.grad_z2 * x2.transpose() * config.learning_rate;
    Ok(eval.loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    /// Straightforward recomputation: explicit softmax probabilities.
    fn oracle_loss(z1: &DMatrix<f64>, z2: &DMatrix<f64>, t: f64) -> f64 {
        let b = z1.ncols();
        let unit = |z: &DMatrix<f64>, j: usize| z.column(j) / z.column(j).norm();
        let sim = |i: usize, j: usize| unit(z1, i).dot(&unit(z2, j)) / t;
        let mut total = 0.0;
        for i in 0..b {
            let denom: f64 = (0..b).map(|j| sim(i, j).exp()).sum();
            total -= (sim(i, i).exp() / denom).ln();
            let denom: f64 = (0..b).map(|j| sim(j, i).exp()).sum();
            total -= (sim(i, i).exp() / denom).ln();
        }
        total / (2.0 * b as f64)
    }

    fn random(k: usize, b: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(k, b, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn matches_direct_oracle() {
        for seed in 0..5 {
            let z1 = random(4, 8, seed);
            let z2 = random(4, 8, seed + 100);
            let got = info_nce(&z1, &z2, 0.5).unwrap().loss;
            assert_abs_diff_eq!(got, oracle_loss(&z1, &z2, 0.5), epsilon = 1e-10);
        }
    }

    #[test]
    fn identical_columns_give_ln2() {
        let z = DMatrix::from_element(3, 2, 1.0);
        let loss = info_nce(&z, &z, 0.1).unwrap().loss;
        assert_abs_diff_eq!(loss, 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn low_temperature_orthonormal_pairs() {
        let z = DMatrix::<f64>::identity(3, 3);
        assert!(info_nce(&z, &z, 1e-3).unwrap().loss < 1e-12);
    }

    #[test]
    fn shared_shift_agrees_with_two_pass() {
        let z1 = random(3, 6, 7);
        let z2 = random(3, 6, 8);
        let (u1, _) = unit_columns(&z1).unwrap();
        let (u2, _) = unit_columns(&z2).unwrap();
        let logits = u1.transpose() * &u2 / 0.2;
        let (l1, g1) = logit_gradient_shared_shift(&logits, 0.2);
        let (l2, g2) = logit_gradient_two_pass(&logits);
        assert_abs_diff_eq!(l1, l2, epsilon = 1e-12);
        assert_abs_diff_eq!(g1, g2, epsilon = 1e-12);
    }

    #[test]
    fn rejects_degenerate_batches() {
        let z = DMatrix::from_element(2, 1, 1.0);
        assert!(info_nce(&z, &z, 0.1).is_err());
        let mut z = DMatrix::from_element(2, 3, 1.0);
        z.set_column(1, &nalgebra::DVector::zeros(2));
        assert!(matches!(info_nce(&z, &z, 0.1), Err(Error::Data(_))));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [0.0, 1.0, -1.0]]).unwrap();
        let cfg = ContrastiveConfig {
            epochs: 0,
            batch_size: None,
            ..ContrastiveConfig::default()
        };
        let a = train_linear_contrastive(&x, &x, &cfg).unwrap();
        let b = train_linear_contrastive(
            &x,
            &x,
            &ContrastiveConfig {
                epochs: 1,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert!(a.loss_history.is_empty());
        assert_eq!(a.a1.shape(), (2, 2));
        // one epoch starts from the same initialization
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 0));
        let init = Normal::new(0.0, cfg.init_scale).unwrap();
        let expect = DMatrix::from_fn(2, 2, |_, _| init.sample(&mut rng));
        assert_eq!(a.a1.as_dmatrix(), &expect);
        assert_ne!(b.a1, a.a1);
    }

    #[test]
    fn config_validation() {
        let x = Matrix::zeros(2, 4);
        let bad = ContrastiveConfig {
            batch_size: Some(5),
            ..ContrastiveConfig::default()
        };
        assert!(matches!(
            train_linear_contrastive(&x, &x, &bad),
            Err(Error::Config(_))
        ));
        let bad = ContrastiveConfig {
            temperature: 0.0,
            ..ContrastiveConfig::default()
        };
        assert!(train_linear_contrastive(&x, &x, &bad).is_err());
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let x1 = Matrix::from_rows(&[[1.0, -1.0, 3.0], [2.0, 1.0, -1.0]]).unwrap();
        let x2 = Matrix::from_rows(&[[0.5, 2.0, -1.0], [1.0, -3.0, 2.0]]).unwrap();
        let cfg = ContrastiveConfig {
            learning_rate: 1e306,
            epochs: 5,
            batch_size: None,
            ..ContrastiveConfig::default()
        };
        match train_linear_contrastive(&x1, &x2, &cfg) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
