//! Command-line front end.
//!
//! Every subcommand prints its resolved configuration to stderr as one JSON
//! line before doing any work. Exit codes: 0 success, 1 usage or
//! configuration error, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::alignment::{solve_alignment, AlignmentProblem, SvdMode, DEFAULT_RANK_TOLERANCE};
use crate::contrastive::{train_linear_contrastive, ContrastiveConfig};
use crate::error::{Error, Result};
use crate::experiments::embeddings::{
    align_embeddings, write_embedding_artifacts, EmbeddingPairSet,
};
use crate::experiments::suites::{run_boundary_suite, run_world_suite, write_suite_artifacts};
use crate::experiments::sweep::{run_sweep_to_dir, SweepAxis, SweepConfig};
use crate::io;
use crate::metrics::MetricReport;
use crate::synthetic::{SyntheticWorld, WorldSpec};

#[derive(Debug, Parser)]
#[command(
    name = "perfalign",
    version,
    about = "Closed-form alignment of paired multimodal data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-modality world and write it to a directory.
    Synth(SynthArgs),
    /// Solve alignment for two matrix CSV files (columns are paired samples).
    Solve(SolveArgs),
    /// Sweep n, d or k over a grid of worlds; writes sweep.csv and SVG plots.
    Sweep(SweepArgs),
    /// Train the linear InfoNCE baseline on a synthetic world.
    Baseline(BaselineArgs),
    /// Align two precomputed feature sets (a directory with z1.csv, z2.csv, manifest.json).
    AlignEmbeddings(AlignEmbeddingsArgs),
    /// Solve the boundary world and search for a separating line in the aligned space.
    Boundary(BoundaryArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldKind {
    Gmm,
    Boundary,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SvdModeArg {
    Full,
    Truncated,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisArg {
    N,
    D,
    K,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::N => SweepAxis::N,
            AxisArg::D => SweepAxis::D,
            AxisArg::K => SweepAxis::K,
        }
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// World shape shared by `synth` and `baseline`.
#[derive(Debug, Args, Serialize)]
pub struct WorldArgs {
    /// Number of paired samples.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Observation dimension of modality 1.
    #[arg(long, default_value_t = 2)]
    pub d1: usize,
    /// Observation dimension of modality 2.
    #[arg(long, default_value_t = 2)]
    pub d2: usize,
    /// Latent dimension.
    #[arg(long, default_value_t = 2, value_parser = positive)]
    pub k: usize,
    /// Standard deviation of the additive Gaussian observation noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Seed for every random draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = WorldKind::Gmm)]
    pub world: WorldKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: WorldArgs,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    /// Matrix CSV of modality 1 (d1×n).
    #[arg(long)]
    pub x1: PathBuf,
    /// Matrix CSV of modality 2 (d2×n).
    #[arg(long)]
    pub x2: PathBuf,
    /// Latent dimension.
    #[arg(long, value_parser = positive)]
    pub k: usize,
    /// Relative threshold below which singular values count as zero.
    #[arg(long, default_value_t = DEFAULT_RANK_TOLERANCE)]
    pub rank_tol: f64,
    #[arg(long, value_enum, default_value_t = SvdModeArg::Full)]
    pub svd_mode: SvdModeArg,
    /// Optional ground-truth latents (k×n) for MLRE.
    #[arg(long)]
    pub z_true: Option<PathBuf>,
    /// Print the metric report as JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Output directory for A1/A2/Z1hat/Z2hat/report CSVs.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Comma-separated, strictly increasing axis values (default grid per axis).
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<usize>>,
    /// Fixed sample count when not swept.
    #[arg(long)]
    pub n: Option<usize>,
    /// Fixed modality-1 dimension when not swept.
    #[arg(long)]
    pub d1: Option<usize>,
    /// Fixed modality-2 dimension when not swept.
    #[arg(long)]
    pub d2: Option<usize>,
    /// Fixed latent dimension when not swept.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated noise levels; one plot series each.
    #[arg(long, value_delimiter = ',')]
    pub noise_sigma: Option<Vec<f64>>,
    /// Comma-separated seeds (default 0,1,2,3,4).
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    pub seeds: Option<Vec<u64>>,
    /// Single seed; shorthand for `--seeds <seed>`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use d1 = d2 = k at every point.
    #[arg(long)]
    pub match_d_to_k: bool,
    #[arg(long, default_value_t = DEFAULT_RANK_TOLERANCE)]
    pub rank_tol: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Record wall time per point (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value = "sweep_out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: WorldArgs,
    #[arg(long, default_value_t = 0.1)]
    pub temperature: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Mini-batch size; 0 trains full-batch.
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    /// Standard deviation of the Gaussian encoder initialization.
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value = "baseline_out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AlignEmbeddingsArgs {
    /// Directory holding z1.csv, z2.csv, manifest.json and optionally labels.csv.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, value_parser = positive)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_RANK_TOLERANCE)]
    pub rank_tol: f64,
    /// Fraction of trailing pairs held out from the solve and scored separately.
    #[arg(long, default_value_t = 0.0)]
    pub holdout_fraction: f64,
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value = "aligned_out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundaryArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value = "boundary_out")]
    pub out: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Baseline(a) => baseline(a),
        Command::AlignEmbeddings(a) => align(a),
        Command::Boundary(a) => boundary(a),
    }
}

fn announce(command: &str, config: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string(config).map_err(|e| Error::config(e.to_string()))?;
    eprintln!("{command}: resolved configuration {json}");
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn print_report(report: &impl Serialize, text: impl std::fmt::Display, json: bool) -> Result<()> {
    if json {
        let s = serde_json::to_string_pretty(report).map_err(|e| Error::data(e.to_string()))?;
        println!("{s}");
    } else {
        print!("{text}");
    }
    Ok(())
}

fn world_spec(kind: WorldKind, w: &WorldArgs) -> Result<WorldSpec> {
    Ok(match kind {
        WorldKind::Gmm => WorldSpec::gmm(w.n, w.d1, w.d2, w.k, w.noise_sigma, w.seed),
        WorldKind::Boundary => {
            if w.k != 2 {
                return Err(Error::config("the boundary world has k = 2"));
            }
            WorldSpec {
                noise_sigma: w.noise_sigma,
                ..WorldSpec::boundary(w.n, w.d1, w.d2, w.seed)
            }
        }
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = world_spec(a.world, &a.shape)?;
    announce("synth", &serde_json::json!({ "world": spec, "out": a.out }))?;
    let world = SyntheticWorld::generate(&spec)?;
    ensure_dir(&a.out)?;
    world.save(&a.out)?;
    println!("wrote {} samples to {}", spec.n, a.out.display());
    Ok(())
}

fn solve(a: SolveArgs) -> Result<()> {
    announce("solve", &a)?;
    let x1 = io::read_matrix(&a.x1)?;
    let x2 = io::read_matrix(&a.x2)?;
    let z_true = a.z_true.as_deref().map(io::read_matrix).transpose()?;
    let mode = match a.svd_mode {
        SvdModeArg::Full => SvdMode::Full,
        SvdModeArg::Truncated => SvdMode::TruncatedSmallestK,
    };
    let problem = AlignmentProblem::new(x1, x2, a.k)?
        .with_rank_tolerance(a.rank_tol)?
        .with_svd_mode(mode);
    let solution = solve_alignment(&problem)?;
    let (z1, z2) = solution.encode_pair(&problem.x1, &problem.x2)?;
    let report = MetricReport::compute(&z1, &z2, z_true.as_ref(), solution.residual_frobenius)?;

    ensure_dir(&a.out)?;
    io::write_matrix(&a.out.join("A1.csv"), &solution.a1)?;
    io::write_matrix(&a.out.join("A2.csv"), &solution.a2)?;
    io::write_matrix(&a.out.join("Z1hat.csv"), &z1)?;
    io::write_matrix(&a.out.join("Z2hat.csv"), &z2)?;
    io::write_atomic(&a.out.join("report.csv"), report.to_csv().as_bytes())?;

    let text = format!(
        "{report}perfect             {}\nleft null dim       {}\n",
        solution.perfect, solution.left_null_dim
    );
    print_report(&report, text, a.json)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let axis = SweepAxis::from(a.axis);
    let base = SweepConfig::new(axis);
    let config = SweepConfig {
        axis,
        axis_values: a.values.unwrap_or(base.axis_values),
        n: a.n.unwrap_or(base.n),
        d1: a.d1.unwrap_or(base.d1),
        d2: a.d2.unwrap_or(base.d2),
        k: a.k.unwrap_or(base.k),
        noise_sigmas: a.noise_sigma.unwrap_or(base.noise_sigmas),
        seeds: a.seeds.or(a.seed.map(|s| vec![s])).unwrap_or(base.seeds),
        match_d_to_k: a.match_d_to_k,
        rank_tolerance: a.rank_tol,
        record_timing: a.timing,
        jobs: a.jobs,
    };
    config.validate()?;
    announce(
        "sweep",
        &serde_json::json!({ "sweep": config, "out": a.out }),
    )?;
    let (records, plots) = run_sweep_to_dir(&config, &a.out)?;
    let failed = records.iter().filter(|r| r.metrics().is_none()).count();
    println!(
        "{} records ({} failed) written to {}",
        records.len(),
        failed,
        a.out.join(crate::experiments::sweep::SWEEP_CSV).display()
    );
    for p in plots {
        println!("plot {}", p.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineSummary<'a> {
    baseline: &'a MetricReport,
    perfect_alignment: &'a MetricReport,
    final_loss: Option<f64>,
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let spec = world_spec(WorldKind::Gmm, &a.shape)?;
    let cfg = ContrastiveConfig {
        k: a.shape.k,
        temperature: a.temperature,
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: (a.batch_size > 0).then_some(a.batch_size),
        seed: a.shape.seed,
        init_scale: a.init_scale,
    };
    announce(
        "baseline",
        &serde_json::json!({ "world": spec, "training": cfg, "out": a.out }),
    )?;
    let pa = run_world_suite(&spec, DEFAULT_RANK_TOLERANCE)?;
    let world = &pa.world;
    let trained = train_linear_contrastive(&world.x_list[0], &world.x_list[1], &cfg)?;
    let z1 = trained.a1.matmul(&world.x_list[0])?;
    let z2 = trained.a2.matmul(&world.x_list[1])?;
    let residual = z1.sub(&z2)?.frobenius_norm();
    let report = MetricReport::compute(&z1, &z2, Some(&world.z_true), residual)?;

    ensure_dir(&a.out)?;
    io::write_matrix(&a.out.join("A1.csv"), &trained.a1)?;
    io::write_matrix(&a.out.join("A2.csv"), &trained.a2)?;
    io::write_matrix(&a.out.join("Z1hat.csv"), &z1)?;
    io::write_matrix(&a.out.join("Z2hat.csv"), &z2)?;
    let mut history = String::from("epoch,loss\n");
    for (i, l) in trained.loss_history.iter().enumerate() {
        history.push_str(&format!("{i},{}\n", io::format_f64(*l)));
    }
    io::write_atomic(&a.out.join("loss_history.csv"), history.as_bytes())?;
    io::write_atomic(&a.out.join("report.csv"), report.to_csv().as_bytes())?;
    io::write_atomic(&a.out.join("pa_report.csv"), pa.report.to_csv().as_bytes())?;
    io::write_json(&a.out.join("config.json"), &cfg)?;
    EmbeddingPairSet::new(
        z1,
        z2,
        Some(world.labels.clone()),
        "linear-infonce",
        Some(a.shape.seed),
    )?
    .save(&a.out.join("embeddings"))?;

    let summary = BaselineSummary {
        baseline: &report,
        perfect_alignment: &pa.report,
        final_loss: trained.loss_history.last().copied(),
    };
    let text = format!(
        "contrastive baseline\n{report}\nclosed-form alignment on the same world\n{}",
        pa.report
    );
    print_report(&summary, text, a.json)
}

#[derive(Serialize)]
struct AlignSummary<'a> {
    n_train: usize,
    perfect: bool,
    pre_alignment_cmae: Option<f64>,
    train: &'a MetricReport,
    holdout: Option<&'a MetricReport>,
}

fn align(a: AlignEmbeddingsArgs) -> Result<()> {
    announce("align-embeddings", &a)?;
    let pairs = EmbeddingPairSet::load(&a.dir)?;
    let result = align_embeddings(&pairs, a.k, a.rank_tol, a.holdout_fraction)?;
    write_embedding_artifacts(&result, &a.out)?;
    let summary = AlignSummary {
        n_train: result.n_train,
        perfect: result.solution.perfect,
        pre_alignment_cmae: result.pre_alignment_cmae,
        train: &result.train_report,
        holdout: result.holdout_report.as_ref(),
    };
    let mut text = String::new();
    if let Some(c) = result.pre_alignment_cmae {
        text.push_str(&format!("CMAE before         {c:.6e}\n"));
    }
    text.push_str(&format!(
        "training split ({} pairs)\n{}",
        result.n_train, result.train_report
    ));
    if let Some(h) = &result.holdout_report {
        text.push_str(&format!("held-out split ({} pairs)\n{h}", h.n));
    }
    print_report(&summary, text, a.json)
}

#[derive(Serialize)]
struct BoundarySummary<'a> {
    report: &'a MetricReport,
    separable: bool,
    normal: Option<Vec<f64>>,
    offset: Option<f64>,
}

fn boundary(a: BoundaryArgs) -> Result<()> {
    announce("boundary", &a)?;
    let outcome = run_boundary_suite(a.seed)?;
    ensure_dir(&a.out)?;
    write_suite_artifacts(&outcome, &a.out)?;
    io::write_labels(&a.out.join("labels.csv"), &outcome.world.labels)?;
    let summary = BoundarySummary {
        report: &outcome.report,
        separable: outcome.separator.is_some(),
        normal: outcome.separator.as_ref().map(|h| h.normal.clone()),
        offset: outcome.separator.as_ref().map(|h| h.offset),
    };
    io::write_json(&a.out.join("separator.json"), &summary)?;
    let text = format!(
        "{}linearly separable  {}\n",
        outcome.report, summary.separable
    );
    print_report(&summary, text, a.json)
}
