//! Random-projection ensemble clustering for high-dimensional data.
//!
//! The pipeline draws many random orthonormal projections of an `n x p` data
//! matrix, fits a Gaussian mixture on each projected view, scores every
//! projection by a composite model-selection criterion (mixture BIC on the
//! projected coordinates plus regression BIC of the complement coordinates on
//! the projected ones), keeps the best-scoring projections and merges their
//! partitions into a single consensus clustering.
//!
//! Module map:
//!
//! - [`rproj`] — Haar-distributed orthonormal projection pairs and data
//!   projection.
//! - [`gmm`] — Gaussian mixture fitting by EM with hard partition extraction
//!   and the mixture BIC term.
//! - [`condreg`] — multivariate linear regression of the complement
//!   coordinates on the projected ones and the regression BIC term.
//! - [`consensus`] — greedy aggregation of membership matrices with optimal
//!   label matching.
//! - [`pipeline`] — the end-to-end ensemble run.
//! - [`simgen`] — synthetic benchmark scenario generator.
//! - [`evaluation`] — partition metrics (ARI, ensemble diversity), a
//!   distance-distortion check for projections and a k-means baseline.
//! - [`seeding`] — deterministic seed derivation for reproducible parallel
//!   runs.

pub use nalgebra;

pub mod condreg;
pub mod consensus;
pub mod error;
pub mod evaluation;
pub mod gmm;
pub mod pipeline;
pub mod rproj;
pub mod seeding;
pub mod simgen;

pub use condreg::{bic_reg, composite_bic, fit_regression, RegressionFit, RegressionStructure};
pub use consensus::{aggregate, dissimilarity, optimal_permutation, ConsensusState, MembershipMatrix};
pub use error::{Error, Result};
pub use evaluation::{
    adjusted_rand_index, jl_distortion, kmeans_baseline, pairwise_diversity, AriReport,
    DistortionReport, DiversitySummary,
};
pub use gmm::{bic_gmm, fit_gmm, map_partition, CovarianceStructure, EmConfig, GmmModel, HardPartition};
pub use pipeline::{
    default_d, run, select_top, RegressionChoice, RpecluConfig, RunDiagnostics, RunOutput,
    ScoredPartition,
};
pub use rproj::{generate_haar, project, ProjectionPair};
pub use simgen::{generate, scenario_table, LabeledDataset, ScenarioConfig, Transform};
