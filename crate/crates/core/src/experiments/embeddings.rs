//! Alignment on top of precomputed features from two encoders.
//!
//! A pair set on disk is a directory holding `z1.csv` (d1×n), `z2.csv` (d2×n),
//! `manifest.json` and, optionally, `labels.csv`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::{solve_alignment, AlignmentProblem, AlignmentSolution};
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::Matrix;
use crate::metrics::{self, MetricReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingManifest {
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    /// Free-form name of whatever produced the features.
    pub producer: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingPairSet {
    pub z1: Matrix,
    pub z2: Matrix,
    pub labels: Option<Vec<usize>>,
    pub manifest: EmbeddingManifest,
}

impl EmbeddingPairSet {
    pub fn new(
        z1: Matrix,
        z2: Matrix,
        labels: Option<Vec<usize>>,
        producer: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let manifest = EmbeddingManifest {
            d1: z1.rows(),
            d2: z2.rows(),
            n: z1.cols(),
            producer: producer.into(),
            seed,
        };
        let set = EmbeddingPairSet {
            z1,
            z2,
            labels,
            manifest,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if self.z1.cols() != self.z2.cols() {
            return Err(Error::dim(format!(
                "feature sets are not paired: {} vs {} samples",
                self.z1.cols(),
                self.z2.cols()
            )));
        }
        if (m.d1, m.d2, m.n) != (self.z1.rows(), self.z2.rows(), self.z1.cols()) {
            return Err(Error::data(format!(
                "manifest says d1={} d2={} n={}, files hold {}×{} and {}×{}",
                m.d1,
                m.d2,
                m.n,
                self.z1.rows(),
                self.z1.cols(),
                self.z2.rows(),
                self.z2.cols()
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != m.n {
                return Err(Error::dim(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    m.n
                )));
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: EmbeddingManifest = io::read_json(&dir.join("manifest.json"))?;
        let labels_path = dir.join("labels.csv");
        let labels = if labels_path.exists() {
            Some(io::read_labels(&labels_path)?)
        } else {
            None
        };
        let set = EmbeddingPairSet {
            z1: io::read_matrix(&dir.join("z1.csv"))?,
            z2: io::read_matrix(&dir.join("z2.csv"))?,
            labels,
            manifest,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_matrix(&dir.join("z1.csv"), &self.z1)?;
        io::write_matrix(&dir.join("z2.csv"), &self.z2)?;
        if let Some(labels) = &self.labels {
            io::write_labels(&dir.join("labels.csv"), labels)?;
        }
        io::write_json(&dir.join("manifest.json"), &self.manifest)
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingAlignment {
    pub solution: AlignmentSolution,
    /// Aligned latents for all n samples, training and held-out.
    pub z1_hat: Matrix,
    pub z2_hat: Matrix,
    pub n_train: usize,
    pub train_report: MetricReport,
    /// Scored on the held-out tail, when there is one.
    pub holdout_report: Option<MetricReport>,
    /// CMAE between the raw training features, when both sides share a dimension.
    pub pre_alignment_cmae: Option<f64>,
}

/// Number of training samples when the last `⌊n·holdout_fraction⌋` samples are held out.
pub fn train_count(n: usize, holdout_fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::config(format!(
            "held-out fraction must lie in [0, 1), got {holdout_fraction}"
        )));
    }
    let held = (n as f64 * holdout_fraction).floor() as usize;
    let train = n - held.min(n);
    if train == 0 || (holdout_fraction > 0.0 && held == 0) {
        return Err(Error::config(format!(
            "held-out fraction {holdout_fraction} leaves an empty split of {n} samples"
        )));
    }
    Ok(train)
}

/// Solves alignment on the first `n_train` pairs and scores both splits.
///
/// The held-out pairs are the trailing columns; the solver never sees them.
pub fn align_embeddings(
    pairs: &EmbeddingPairSet,
    k: usize,
    rank_tolerance: f64,
    holdout_fraction: f64,
) -> Result<EmbeddingAlignment> {
    pairs.validate()?;
    let n = pairs.manifest.n;
    let n_train = train_count(n, holdout_fraction)?;
    let x1 = pairs.z1.column_range(0, n_train);
    let x2 = pairs.z2.column_range(0, n_train);
    let pre_alignment_cmae = if x1.rows() == x2.rows() {
        Some(metrics::cmae(&x1, &x2)?)
    } else {
        None
    };
    let problem = AlignmentProblem::new(x1, x2, k)?.with_rank_tolerance(rank_tolerance)?;
    let solution = solve_alignment(&problem)?;
    let (z1_hat, z2_hat) = solution.encode_pair(&pairs.z1, &pairs.z2)?;

    let train_report = MetricReport::compute(
        &z1_hat.column_range(0, n_train),
        &z2_hat.column_range(0, n_train),
        None,
        solution.residual_frobenius,
    )?;
    let holdout_report = if n_train < n {
        let h1 = z1_hat.column_range(n_train, n);
        let h2 = z2_hat.column_range(n_train, n);
        let residual = h1.sub(&h2)?.frobenius_norm();
        Some(MetricReport::compute(&h1, &h2, None, residual)?)
    } else {
        None
    };
    Ok(EmbeddingAlignment {
        solution,
        z1_hat,
        z2_hat,
        n_train,
        train_report,
        holdout_report,
        pre_alignment_cmae,
    })
}

/// Writes `A1.csv`, `A2.csv`, `Z1hat.csv`, `Z2hat.csv`, `report.csv` and,
/// with a held-out split, `holdout_report.csv`.
pub fn write_embedding_artifacts(result: &EmbeddingAlignment, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_matrix(&dir.join("A1.csv"), &result.solution.a1)?;
    io::write_matrix(&dir.join("A2.csv"), &result.solution.a2)?;
    io::write_matrix(&dir.join("Z1hat.csv"), &result.z1_hat)?;
    io::write_matrix(&dir.join("Z2hat.csv"), &result.z2_hat)?;
    io::write_atomic(
        &dir.join("report.csv"),
        result.train_report.to_csv().as_bytes(),
    )?;
    if let Some(h) = &result.holdout_report {
        io::write_atomic(&dir.join("holdout_report.csv"), h.to_csv().as_bytes())?;
    }
    Ok(())
}
