//! Experiment drivers: reference suites, parameter sweeps with plots, and
//! alignment of externally produced feature files.

pub mod analysis;
pub mod embeddings;
pub mod plot;
pub mod separability;
pub mod suites;
pub mod sweep;

pub use embeddings::{align_embeddings, EmbeddingAlignment, EmbeddingManifest, EmbeddingPairSet};
pub use suites::{run_boundary_suite, run_synthetic_suite, run_world_suite, SuiteOutcome};
pub use sweep::{run_sweep, run_sweep_to_dir, SweepAxis, SweepConfig, SweepRecord};
