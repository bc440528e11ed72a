//! Alignment-quality metrics over paired latent estimates.
//!
//! * CMAE: mean Euclidean distance between the two modalities' estimates.
//! * NCMAE: CMAE after scaling every nonzero column to unit length.
//! * MLRE: mean Euclidean distance between an estimate and the true latents.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::matrix::Matrix;

fn check_pair(a: &Matrix, b: &Matrix, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "{what}: shapes differ ({:?} vs {:?})",
            a.shape(),
            b.shape()
        )));
    }
    if a.cols() == 0 {
        return Err(Error::data(format!("{what}: no samples")));
    }
    Ok(())
}

fn mean_column_distance(a: &Matrix, b: &Matrix) -> f64 {
    let total: f64 = a
        .as_dmatrix()
        .column_iter()
        .zip(b.as_dmatrix().column_iter())
        .map(|(x, y)| (x - y).norm())
        .sum();
    total / a.cols() as f64
}

/// Cross-modal alignment error.
pub fn cmae(z1_hat: &Matrix, z2_hat: &Matrix) -> Result<f64> {
    check_pair(z1_hat, z2_hat, "cmae")?;
    Ok(mean_column_distance(z1_hat, z2_hat))
}

/// Unit-normalizes every nonzero column; zero columns stay zero.
pub fn normalize_columns(z: &Matrix) -> Matrix {
    let mut m = z.as_dmatrix().clone();
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    Matrix::from_finite(m)
}

/// CMAE between column-normalized estimates. Always in `[0, 2]`.
pub fn ncmae(z1_hat: &Matrix, z2_hat: &Matrix) -> Result<f64> {
    check_pair(z1_hat, z2_hat, "ncmae")?;
    Ok(mean_column_distance(
        &normalize_columns(z1_hat),
        &normalize_columns(z2_hat),
    ))
}

/// Latent reconstruction error of one modality.
pub fn mlre(z_true: &Matrix, z_hat: &Matrix) -> Result<f64> {
    check_pair(z_true, z_hat, "mlre")?;
    Ok(mean_column_distance(z_true, z_hat))
}

/// Mean of the per-modality MLRE values.
pub fn mlre_avg(z_true: &Matrix, z_hats: &[Matrix]) -> Result<f64> {
    if z_hats.is_empty() {
        return Err(Error::data("mlre_avg: no modality estimates"));
    }
    let values = z_hats
        .iter()
        .map(|z| mlre(z_true, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&values))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Metrics for one solved problem. MLRE fields are empty when no ground
/// truth is available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cmae: f64,
    pub ncmae: f64,
    pub mlre_per_modality: Vec<f64>,
    pub mlre_avg: Option<f64>,
    pub residual_frobenius: f64,
    pub n: usize,
}

impl MetricReport {
    /// Builds a report from latent estimates and, optionally, the true latents.
    pub fn compute(
        z1_hat: &Matrix,
        z2_hat: &Matrix,
        z_true: Option<&Matrix>,
        residual_frobenius: f64,
    ) -> Result<Self> {
        let cmae = cmae(z1_hat, z2_hat)?;
        let ncmae = ncmae(z1_hat, z2_hat)?;
        let (mlre_per_modality, mlre_avg) = match z_true {
            Some(z) => {
                let per = vec![mlre(z, z1_hat)?, mlre(z, z2_hat)?];
                let avg = mean(&per);
                (per, Some(avg))
            }
            None => (Vec::new(), None),
        };
        Ok(MetricReport {
            cmae,
            ncmae,
            mlre_per_modality,
            mlre_avg,
            residual_frobenius,
            n: z1_hat.cols(),
        })
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["n".to_string(), "cmae".into(), "ncmae".into()];
        cols.extend((1..=self.mlre_per_modality.len()).map(|m| format!("mlre_{m}")));
        cols.push("mlre_avg".into());
        cols.push("residual_frobenius".into());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.n.to_string(),
            format_f64(self.cmae),
            format_f64(self.ncmae),
        ];
        cols.extend(self.mlre_per_modality.iter().map(|&v| format_f64(v)));
        cols.push(self.mlre_avg.map(format_f64).unwrap_or_default());
        cols.push(format_f64(self.residual_frobenius));
        cols.join(",")
    }

    /// Header plus one data row.
    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", self.csv_header(), self.csv_row())
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples             {}", self.n)?;
        writeln!(f, "CMAE                {:.6e}", self.cmae)?;
        writeln!(f, "NCMAE               {:.6e}", self.ncmae)?;
        for (m, v) in self.mlre_per_modality.iter().enumerate() {
            writeln!(f, "MLRE (modality {})   {:.6e}", m + 1, v)?;
        }
        if let Some(avg) = self.mlre_avg {
            writeln!(f, "MLRE (average)      {avg:.6e}")?;
        }
        writeln!(f, "residual ||AX||_F   {:.6e}", self.residual_frobenius)
    }
}
