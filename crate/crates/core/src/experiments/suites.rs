//! End-to-end runs on synthetic worlds: generate, solve, score.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::alignment::{solve_alignment, AlignmentProblem, AlignmentSolution};
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::Matrix;
use crate::metrics::{self, MetricReport};
use crate::synthetic::{pseudo_inverse_encode, SyntheticWorld, WorldSpec, LABEL_ABOVE};

use super::analysis::linear_image_residual;
use super::separability::{find_separating_hyperplane, Hyperplane};

/// Sample count, modality dimensions and latent dimension of the reference GMM world.
pub const REFERENCE_N: usize = 2000;
pub const REFERENCE_D: usize = 2;
pub const REFERENCE_K: usize = 2;

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub world: SyntheticWorld,
    pub solution: AlignmentSolution,
    pub z1_hat: Matrix,
    pub z2_hat: Matrix,
    pub report: MetricReport,
    /// MLRE of `S_m†·X_m` against the true latents, per modality.
    pub pinv_mlre: Vec<f64>,
    /// `‖Ẑ1 − M·Z‖_F` for the least-squares `M`: zero when the estimate is a
    /// linear image of the ground truth.
    pub linear_image_residual: f64,
    /// A hyperplane separating the two classes in `Ẑ1`, when one was found.
    pub separator: Option<Hyperplane>,
    /// Time spent solving and scoring, excluding world generation.
    pub elapsed: Duration,
}

/// Solves a two-modality world at its own latent dimension and scores the result.
pub fn run_world_suite(spec: &WorldSpec, rank_tolerance: f64) -> Result<SuiteOutcome> {
    let world = SyntheticWorld::generate(spec)?;
    if world.x_list.len() != 2 {
        return Err(Error::config(
            "alignment suites need exactly two modalities",
        ));
    }
    let start = Instant::now();
    let problem = AlignmentProblem::new(world.x_list[0].clone(), world.x_list[1].clone(), spec.k)?
        .with_rank_tolerance(rank_tolerance)?;
    let solution = solve_alignment(&problem)?;
    let (z1_hat, z2_hat) = solution.encode_pair(&world.x_list[0], &world.x_list[1])?;
    let report = MetricReport::compute(
        &z1_hat,
        &z2_hat,
        Some(&world.z_true),
        solution.residual_frobenius,
    )?;
    let elapsed = start.elapsed();

    let pinv_mlre = world
        .s_list
        .iter()
        .zip(&world.x_list)
        .map(|(s, x)| metrics::mlre(&world.z_true, &pseudo_inverse_encode(s, x)?))
        .collect::<Result<Vec<_>>>()?;
    let linear_image_residual = linear_image_residual(&world.z_true, &z1_hat)?;
    Ok(SuiteOutcome {
        world,
        solution,
        z1_hat,
        z2_hat,
        report,
        pinv_mlre,
        linear_image_residual,
        separator: None,
        elapsed,
    })
}

/// The reference run: two-cluster GMM latents (n = 2000, k = 2) seen through
/// two random 2×2 maps with entries uniform on [-5, 5], noiseless.
pub fn run_synthetic_suite(seed: u64) -> Result<SuiteOutcome> {
    run_world_suite(
        &WorldSpec::gmm(
            REFERENCE_N,
            REFERENCE_D,
            REFERENCE_D,
            REFERENCE_K,
            0.0,
            seed,
        ),
        crate::DEFAULT_RANK_TOLERANCE,
    )
}

/// Uniform latents split by the line `y = x − 10`, solved at k = 2, with an
/// explicit separating-hyperplane search in the aligned space.
pub fn run_boundary_suite(seed: u64) -> Result<SuiteOutcome> {
    let spec = WorldSpec::boundary(REFERENCE_N, REFERENCE_D, REFERENCE_D, seed);
    let mut outcome = run_world_suite(&spec, crate::DEFAULT_RANK_TOLERANCE)?;
    outcome.separator =
        find_separating_hyperplane(&outcome.z1_hat, &outcome.world.labels, LABEL_ABOVE)?;
    Ok(outcome)
}

/// Writes encoders, latents, the metric report and a per-class scatter table.
pub fn write_suite_artifacts(outcome: &SuiteOutcome, dir: &Path) -> Result<()> {
    io::write_matrix(&dir.join("A1.csv"), &outcome.solution.a1)?;
    io::write_matrix(&dir.join("A2.csv"), &outcome.solution.a2)?;
    io::write_matrix(&dir.join("Z1hat.csv"), &outcome.z1_hat)?;
    io::write_matrix(&dir.join("Z2hat.csv"), &outcome.z2_hat)?;
    io::write_atomic(&dir.join("report.csv"), outcome.report.to_csv().as_bytes())?;
    io::write_atomic(
        &dir.join("zhat_scatter.csv"),
        scatter_table(&[&outcome.z1_hat, &outcome.z2_hat], &outcome.world.labels).as_bytes(),
    )
}

/// Long-format scatter data: `modality,sample,label,z1,…,zk`.
pub fn scatter_table(latents: &[&Matrix], labels: &[usize]) -> String {
    let k = latents.first().map_or(0, |z| z.rows());
    let mut out = String::from("modality,sample,label");
    for j in 1..=k {
        let _ = write!(out, ",z{j}");
    }
    out.push('\n');
    for (m, z) in latents.iter().enumerate() {
        for (i, label) in labels.iter().enumerate().take(z.cols()) {
            let _ = write!(out, "{},{},{}", m + 1, i, label);
            for j in 0..k {
                let _ = write!(out, ",{}", io::format_f64(z.get(j, i)));
            }
            out.push('\n');
        }
    }
    out
}
