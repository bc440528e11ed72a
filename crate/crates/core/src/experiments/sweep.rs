//! Parameter sweeps over sample count, modality dimension or latent dimension.
//!
//! Every point regenerates its world from `(point, seed)` alone, so records are
//! reproducible bit-for-bit regardless of worker count or completion order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{solve_alignment, AlignmentProblem, DEFAULT_RANK_TOLERANCE};
use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::metrics::MetricReport;
use crate::synthetic::{SyntheticWorld, WorldSpec};

use super::plot;

pub const SWEEP_CSV: &str = "sweep.csv";
const PARTIAL_SUFFIX: &str = ".partial";

/// Column order of `sweep.csv`.
pub const SWEEP_COLUMNS: [&str; 13] = [
    "n",
    "d1",
    "d2",
    "k",
    "noise_sigma",
    "seed",
    "cmae",
    "ncmae",
    "mlre_avg",
    "residual_frobenius",
    "perfect",
    "wall_time_ms",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    N,
    /// Both modality dimensions move together.
    D,
    K,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::D => "d",
            SweepAxis::K => "k",
        }
    }

    /// Default grid for this axis.
    pub fn default_values(self) -> Vec<usize> {
        match self {
            SweepAxis::N => vec![10, 50, 100, 500, 1000, 5000],
            SweepAxis::D => vec![2, 4, 8, 16, 32, 64],
            SweepAxis::K => vec![1, 2, 4, 8, 16],
        }
    }

    /// The axis coordinate of a point.
    pub fn value_of(self, point: &SweepPoint) -> usize {
        match self {
            SweepAxis::N => point.n,
            SweepAxis::D => point.d1,
            SweepAxis::K => point.k,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" => Ok(SweepAxis::N),
            "d" => Ok(SweepAxis::D),
            "k" => Ok(SweepAxis::K),
            other => Err(Error::config(format!(
                "unknown sweep axis `{other}` (expected n, d or k)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Nonempty and strictly increasing.
    pub axis_values: Vec<usize>,
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    pub k: usize,
    /// One series per noise level.
    pub noise_sigmas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Sets `d1 = d2 = k` at every point.
    pub match_d_to_k: bool,
    pub rank_tolerance: f64,
    /// Wall times are left empty unless requested so that outputs stay
    /// byte-identical across runs.
    pub record_timing: bool,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
}

impl SweepConfig {
    /// Default grid for `axis`, fixed dimensions n = 1000, d1 = d2 = 8, k = 2,
    /// noiseless, seeds 0–4.
    pub fn new(axis: SweepAxis) -> Self {
        SweepConfig {
            axis,
            axis_values: axis.default_values(),
            n: 1000,
            d1: 8,
            d2: 8,
            k: 2,
            noise_sigmas: vec![0.0],
            seeds: (0..5).collect(),
            match_d_to_k: false,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            record_timing: false,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axis_values.is_empty() {
            return Err(Error::config("sweep needs at least one axis value"));
        }
        if self.axis_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("axis values must be strictly increasing"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("sweep needs at least one seed"));
        }
        if self.noise_sigmas.is_empty()
            || self
                .noise_sigmas
                .iter()
                .any(|s| !(*s >= 0.0 && s.is_finite()))
        {
            return Err(Error::config(
                "noise levels must be a nonempty list of finite nonnegative values",
            ));
        }
        if !(self.rank_tolerance > 0.0 && self.rank_tolerance < 1.0) {
            return Err(Error::config("rank tolerance must lie in (0, 1)"));
        }
        for point in self.points() {
            if point.n == 0 || point.d1 == 0 || point.d2 == 0 || point.k == 0 {
                return Err(Error::config(format!(
                    "sweep point has a zero dimension: {point}"
                )));
            }
            if point.k > point.d1 + point.d2 {
                return Err(Error::config(format!("k exceeds d1 + d2 at {point}")));
            }
        }
        Ok(())
    }

    fn point_at(&self, value: usize, noise_sigma: f64, seed: u64) -> SweepPoint {
        let mut p = SweepPoint {
            n: self.n,
            d1: self.d1,
            d2: self.d2,
            k: self.k,
            noise_sigma,
            seed,
        };
        match self.axis {
            SweepAxis::N => p.n = value,
            SweepAxis::D => (p.d1, p.d2) = (value, value),
            SweepAxis::K => p.k = value,
        }
        if self.match_d_to_k {
            (p.d1, p.d2) = (p.k, p.k);
        }
        p
    }

    /// All points in output order: noise level, then axis value, then seed.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out =
            Vec::with_capacity(self.noise_sigmas.len() * self.axis_values.len() * self.seeds.len());
        for &sigma in &self.noise_sigmas {
            for &value in &self.axis_values {
                for &seed in &self.seeds {
                    out.push(self.point_at(value, sigma, seed));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    pub k: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl fmt::Display for SweepPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} d1={} d2={} k={} sigma={} seed={}",
            self.n, self.d1, self.d2, self.k, self.noise_sigma, self.seed
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepMetrics {
    pub cmae: f64,
    pub ncmae: f64,
    pub mlre_avg: f64,
    pub residual_frobenius: f64,
    pub perfect: bool,
    /// `‖Ẑ‖_F/√n` over both modalities; the reference scale for CMAE.
    pub latent_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub point: SweepPoint,
    /// Metrics, or the message of the error that stopped this point.
    pub outcome: std::result::Result<SweepMetrics, String>,
    pub wall_time_ms: Option<f64>,
}

impl SweepRecord {
    pub fn metrics(&self) -> Option<&SweepMetrics> {
        self.outcome.as_ref().ok()
    }

    /// Fields in [`SWEEP_COLUMNS`] order; metric cells are empty on failure.
    pub fn csv_fields(&self) -> Vec<String> {
        let p = &self.point;
        let mut fields = vec![
            p.n.to_string(),
            p.d1.to_string(),
            p.d2.to_string(),
            p.k.to_string(),
            format_f64(p.noise_sigma),
            p.seed.to_string(),
        ];
        match &self.outcome {
            Ok(m) => fields.extend([
                format_f64(m.cmae),
                format_f64(m.ncmae),
                format_f64(m.mlre_avg),
                format_f64(m.residual_frobenius),
                m.perfect.to_string(),
            ]),
            Err(_) => fields.extend(std::iter::repeat_n(String::new(), 5)),
        }
        fields.push(self.wall_time_ms.map(format_f64).unwrap_or_default());
        fields.push(self.outcome.as_ref().err().cloned().unwrap_or_default());
        fields
    }
}

/// Generates, solves and scores one point. Failures become part of the record.
pub fn run_point(point: &SweepPoint, rank_tolerance: f64, record_timing: bool) -> SweepRecord {
    let start = Instant::now();
    let outcome = score_point(point, rank_tolerance).map_err(|e| e.to_string());
    let elapsed = start.elapsed();
    SweepRecord {
        point: *point,
        outcome,
        wall_time_ms: record_timing.then_some(elapsed.as_secs_f64() * 1e3),
    }
}

fn score_point(p: &SweepPoint, rank_tolerance: f64) -> Result<SweepMetrics> {
    let world =
        SyntheticWorld::generate(&WorldSpec::gmm(p.n, p.d1, p.d2, p.k, p.noise_sigma, p.seed))?;
    let problem = AlignmentProblem::new(world.x_list[0].clone(), world.x_list[1].clone(), p.k)?
        .with_rank_tolerance(rank_tolerance)?;
    let solution = solve_alignment(&problem)?;
    let (z1, z2) = solution.encode_pair(&world.x_list[0], &world.x_list[1])?;
    let report = MetricReport::compute(&z1, &z2, Some(&world.z_true), solution.residual_frobenius)?;
    let energy = z1.frobenius_norm().hypot(z2.frobenius_norm());
    let metrics = SweepMetrics {
        cmae: report.cmae,
        ncmae: report.ncmae,
        mlre_avg: report.mlre_avg.unwrap_or(f64::NAN),
        residual_frobenius: report.residual_frobenius,
        perfect: solution.perfect,
        latent_scale: energy / (2.0 * p.n as f64).sqrt(),
    };
    if [
        metrics.cmae,
        metrics.ncmae,
        metrics.mlre_avg,
        metrics.residual_frobenius,
    ]
    .iter()
    .any(|v| !v.is_finite())
    {
        return Err(Error::Numerical(format!("non-finite metric at {p}")));
    }
    Ok(metrics)
}

/// Runs every point on a pool of `jobs` workers and hands records to `sink`
/// in output order as soon as each one and all its predecessors are done.
fn run_ordered(
    config: &SweepConfig,
    mut sink: impl FnMut(&SweepRecord) -> Result<()>,
) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let points = config.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(usize, SweepRecord)>();
    let (tol, timing) = (config.rank_tolerance, config.record_timing);

    std::thread::scope(|scope| {
        let pts = &points;
        let pool = &pool;
        scope.spawn(move || {
            pool.install(|| {
                pts.par_iter().enumerate().for_each_with(tx, |tx, (i, p)| {
                    // The receiver only hangs up after a sink error; the
                    // remaining results are then discarded.
                    let _ = tx.send((i, run_point(p, tol, timing)));
                });
            });
        });

        let mut pending = BTreeMap::new();
        let mut records = Vec::with_capacity(points.len());
        for (i, record) in rx {
            pending.insert(i, record);
            while let Some(record) = pending.remove(&records.len()) {
                sink(&record)?;
                records.push(record);
            }
        }
        Ok(records)
    })
}

/// Runs the sweep in memory.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    run_ordered(config, |_| Ok(()))
}

/// Runs the sweep, streaming rows to `<dir>/sweep.csv.partial` and renaming it
/// to `sweep.csv` once complete; then renders one SVG per metric.
///
/// An interrupted run leaves every finished row in the partial file.
pub fn run_sweep_to_dir(
    config: &SweepConfig,
    dir: &Path,
) -> Result<(Vec<SweepRecord>, Vec<PathBuf>)> {
    config.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let final_path = dir.join(SWEEP_CSV);
    let partial_path = dir.join(format!("{SWEEP_CSV}{PARTIAL_SUFFIX}"));
    let file = File::create(&partial_path).map_err(|e| Error::io(&partial_path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Parse {
        path: partial_path.clone(),
        message: e.to_string(),
    };
    writer.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    writer.flush().map_err(|e| Error::io(&partial_path, e))?;

    let records = run_ordered(config, |record| {
        writer.write_record(record.csv_fields()).map_err(csv_err)?;
        writer.flush().map_err(|e| Error::io(&partial_path, e))
    })?;
    let file = writer
        .into_inner()
        .map_err(|e| Error::io(&partial_path, e.into_error()))?;
    file.sync_all().map_err(|e| Error::io(&partial_path, e))?;
    drop(file);
    fs::rename(&partial_path, &final_path).map_err(|e| Error::io(&final_path, e))?;

    let plots = plot::render_sweep_plots(&final_path, config.axis, dir)?;
    Ok((records, plots))
}

/// Reads `sweep.csv` back into records. Wall times and errors round-trip;
/// `latent_scale` is not stored and reads as NaN.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != SWEEP_COLUMNS {
        return Err(parse_err(format!("unexpected header {header:?}")));
    }
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|e| parse_err(format!("row {}: {}: {e}", line + 2, SWEEP_COLUMNS[i])))
        };
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse::<u64>()
                .map_err(|e| parse_err(format!("row {}: {}: {e}", line + 2, SWEEP_COLUMNS[i])))
        };
        let point = SweepPoint {
            n: int(0)? as usize,
            d1: int(1)? as usize,
            d2: int(2)? as usize,
            k: int(3)? as usize,
            noise_sigma: num(4)?,
            seed: int(5)?,
        };
        let outcome = if field(12).is_empty() {
            Ok(SweepMetrics {
                cmae: num(6)?,
                ncmae: num(7)?,
                mlre_avg: num(8)?,
                residual_frobenius: num(9)?,
                perfect: field(10) == "true",
                latent_scale: f64::NAN,
            })
        } else {
            Err(field(12).to_string())
        };
        let wall_time_ms = if field(11).is_empty() {
            None
        } else {
            Some(num(11)?)
        };
        records.push(SweepRecord {
            point,
            outcome,
            wall_time_ms,
        });
    }
    Ok(records)
}

/// Writes records as `sweep.csv` content (header included).
pub fn sweep_csv_string(records: &[SweepRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    // Writing to memory cannot fail.
    writer.write_record(SWEEP_COLUMNS).expect("in-memory csv");
    for r in records {
        writer.write_record(r.csv_fields()).expect("in-memory csv");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(axis: SweepAxis, values: Vec<usize>) -> SweepConfig {
        SweepConfig {
            axis_values: values,
            n: 40,
            d1: 4,
            d2: 4,
            seeds: vec![0, 1],
            jobs: 2,
            ..SweepConfig::new(axis)
        }
    }

    #[test]
    fn validation() {
        assert!(small(SweepAxis::K, vec![]).validate().is_err());
        assert!(small(SweepAxis::K, vec![2, 2]).validate().is_err());
        assert!(small(SweepAxis::K, vec![3, 1]).validate().is_err());
        assert!(small(SweepAxis::K, vec![1, 9]).validate().is_err());
        assert!(small(SweepAxis::K, vec![1, 8]).validate().is_ok());
        let mut c = small(SweepAxis::N, vec![10]);
        c.noise_sigmas = vec![-1.0];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn point_order_and_axis_mapping() {
        let mut c = small(SweepAxis::D, vec![2, 3]);
        c.noise_sigmas = vec![0.0, 0.5];
        let pts = c.points();
        assert_eq!(pts.len(), 8);
        assert_eq!((pts[0].d1, pts[0].seed, pts[0].noise_sigma), (2, 0, 0.0));
        assert_eq!((pts[1].d1, pts[1].seed), (2, 1));
        assert_eq!((pts[2].d1, pts[2].d2), (3, 3));
        assert_eq!(pts[4].noise_sigma, 0.5);

        let mut c = small(SweepAxis::K, vec![1, 3]);
        c.match_d_to_k = true;
        assert!(c.points().iter().all(|p| p.d1 == p.k && p.d2 == p.k));
    }

    #[test]
    fn records_follow_point_order() {
        let c = small(SweepAxis::K, vec![1, 2, 3]);
        let records = run_sweep(&c).unwrap();
        let expected: Vec<_> = c.points();
        assert_eq!(
            records.iter().map(|r| r.point).collect::<Vec<_>>(),
            expected
        );
        assert!(records.iter().all(|r| r.metrics().is_some()));
    }

    #[test]
    fn csv_roundtrip_with_error_row() {
        let ok = run_point(
            &small(SweepAxis::K, vec![2]).points()[0],
            DEFAULT_RANK_TOLERANCE,
            false,
        );
        let failed = SweepRecord {
            point: ok.point,
            outcome: Err("numerical failure: boom, twice".into()),
            wall_time_ms: Some(1.5),
        };
        let text = sweep_csv_string(&[ok.clone(), failed.clone()]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SWEEP_CSV);
        std::fs::write(&path, &text).unwrap();
        let back = read_sweep_csv(&path).unwrap();
        assert_eq!(back[1], failed);
        let m = back[0].metrics().unwrap();
        assert_eq!(m.cmae, ok.metrics().unwrap().cmae);
        assert_eq!(back[0].wall_time_ms, None);
    }
}
