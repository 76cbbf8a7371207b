//! End-to-end ensemble run: generate, fit, score, select, aggregate.
//!
//! For each of `b` projections the run derives an independent seed, draws a
//! projection pair, fits the mixture on the projected view, regresses the
//! complement on it, and records the composite score. Projections whose fit
//! degenerates are skipped and reported rather than aborting the run. The
//! ranking sorts by score, the top `b_star` partitions are aggregated by the
//! greedy consensus, and the sweep order is descending score so the
//! best-scoring partition anchors the candidate.
//!
//! The projection loop is a parallel map with per-index seeds followed by a
//! deterministic sort, so results are independent of the execution schedule
//! and of the thread count.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::condreg::{bic_reg, composite_bic, fit_regression, RegressionStructure};
use crate::consensus::{aggregate, MembershipMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{pairwise_diversity, DiversitySummary};
use crate::gmm::{bic_gmm, fit_gmm, map_partition, CovarianceStructure, EmConfig, HardPartition};
use crate::rproj::{generate_haar, project};
use crate::seeding::derive_seed;

const PROJECTION_SEED_TAG: u64 = 0x5052_4f4a;
const EM_SEED_TAG: u64 = 0x454d_4649;

/// Residual covariance structure request; `Auto` picks per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionChoice {
    /// Full when the complement is small relative to the sample, else diagonal.
    Auto,
    Full,
    Diagonal,
}

impl std::fmt::Display for RegressionChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegressionChoice::Auto => "auto",
            RegressionChoice::Full => "full",
            RegressionChoice::Diagonal => "diagonal",
        })
    }
}

/// Configuration of one ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct RpecluConfig {
    /// Number of clusters to fit.
    pub g: usize,
    /// Projection dimension; `None` resolves to [`default_d`]`(g)`.
    pub d: Option<usize>,
    /// Number of projections to draw.
    pub b: usize,
    /// Number of top-scoring projections to aggregate.
    pub b_star: usize,
    /// Master seed; all per-projection randomness derives from it.
    pub seed: u64,
    /// Covariance structure of the projected-space mixture.
    pub gmm_cov: CovarianceStructure,
    /// Residual covariance structure of the complement regression.
    pub reg_structure: RegressionChoice,
    /// EM stopping and restart settings.
    pub em: EmConfig,
}

impl RpecluConfig {
    /// Defaults: `b = 1000`, `b_star = 100`, derived `d`, full mixture
    /// covariance, automatic regression structure.
    pub fn new(g: usize) -> Self {
        Self {
            g,
            d: None,
            b: 1000,
            b_star: 100,
            seed: 0,
            gmm_cov: CovarianceStructure::Full,
            reg_structure: RegressionChoice::Auto,
            em: EmConfig::default(),
        }
    }
}

/// Default projection dimension for `g` clusters: `round(10 ln g) + 1`.
///
/// Evaluates to 8 for two clusters, 12 for three, 15 for four and 17 for
/// five. A single-cluster run has no sensible default and must set `d`
/// explicitly.
pub fn default_d(g: usize) -> Result<usize> {
    if g < 2 {
        return Err(Error::InvalidConfig(
            "default projection dimension needs g >= 2; set d explicitly".into(),
        ));
    }
    Ok((10.0 * (g as f64).ln()).round() as usize + 1)
}

/// One successfully scored projection.
#[derive(Debug, Clone)]
pub struct ScoredPartition {
    /// 1-based index of the projection in the ensemble.
    pub projection_index: usize,
    /// Composite score, `bic_gmm + bic_reg`.
    pub bic: f64,
    /// Mixture term of the score.
    pub bic_gmm: f64,
    /// Regression term of the score.
    pub bic_reg: f64,
    /// Maximum-posterior partition induced by the projection.
    pub partition: HardPartition,
}

/// A projection whose scoring failed, with the reason.
#[derive(Debug, Clone)]
pub struct SkippedProjection {
    pub projection_index: usize,
    pub reason: String,
}

/// Settings resolved at run time from the data shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedSettings {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub regression: RegressionStructure,
}

/// Run metadata surfaced alongside the partition.
#[derive(Debug, Clone)]
pub struct RunDiagnostics {
    pub resolved: ResolvedSettings,
    /// Projections that failed to score.
    pub skipped: Vec<SkippedProjection>,
    /// Pairwise ARI summary over the selected partitions (absent when only
    /// one is selected).
    pub selected_diversity: Option<DiversitySummary>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Consensus partition of the input rows.
    pub partition: HardPartition,
    /// All scored projections, sorted by descending score with index
    /// tie-break; the first `b_star` entries are the selected ones.
    pub ranking: Vec<ScoredPartition>,
    pub diagnostics: RunDiagnostics,
}

fn sort_ranking(ranking: &mut [ScoredPartition]) {
    ranking.sort_by(|a, b| {
        b.bic
            .total_cmp(&a.bic)
            .then_with(|| a.projection_index.cmp(&b.projection_index))
    });
}

/// Sorted copy of the `b_star` best-scoring partitions.
///
/// Descending score, ties to the smaller projection index.
pub fn select_top(scored: &[ScoredPartition], b_star: usize) -> Result<Vec<ScoredPartition>> {
    if scored.len() < b_star {
        return Err(Error::PartialEnsemble { scored: scored.len(), required: b_star });
    }
    let mut sorted = scored.to_vec();
    sort_ranking(&mut sorted);
    sorted.truncate(b_star);
    Ok(sorted)
}

fn resolve_settings(x: &DMatrix<f64>, config: &RpecluConfig) -> Result<ResolvedSettings> {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 || p == 0 {
        return Err(Error::EmptyInput("data matrix"));
    }
    if config.g == 0 {
        return Err(Error::InvalidConfig("g must be at least 1".into()));
    }
    if n < config.g {
        return Err(Error::Infeasible(format!(
            "cannot fit {} clusters to {n} observations",
            config.g
        )));
    }
    if config.b == 0 || config.b_star == 0 || config.b_star > config.b {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= b_star <= b, got b={}, b_star={}",
            config.b, config.b_star
        )));
    }
    let d = match config.d {
        Some(d) => d,
        None => default_d(config.g)?,
    };
    if d == 0 || d >= p {
        return Err(Error::InvalidConfig(format!(
            "projection dimension must satisfy 1 <= d < p, got d={d}, p={p}"
        )));
    }
    if n <= d + 1 {
        return Err(Error::Infeasible(format!(
            "complement regression needs n > d + 1 (n={n}, d={d})"
        )));
    }
    let residual_dim = p - d;
    let regression = match config.reg_structure {
        RegressionChoice::Full => {
            if n <= residual_dim {
                return Err(Error::StructureInfeasible { n, residual_dim });
            }
            RegressionStructure::Full
        }
        RegressionChoice::Diagonal => RegressionStructure::Diagonal,
        RegressionChoice::Auto => {
            // The full structure cancels the projection-specific share of the
            // complement's variance against the mixture term, which the
            // diagonal form cannot do, so prefer it whenever the sample
            // supports a stable estimate of the residual covariance.
            if residual_dim as f64 <= n as f64 / 2.0 {
                RegressionStructure::Full
            } else {
                RegressionStructure::Diagonal
            }
        }
    };
    Ok(ResolvedSettings { n, p, d, regression })
}

fn score_projection(
    x: &DMatrix<f64>,
    config: &RpecluConfig,
    resolved: &ResolvedSettings,
    index: usize,
) -> std::result::Result<ScoredPartition, SkippedProjection> {
    let skip = |e: Error| SkippedProjection { projection_index: index, reason: e.to_string() };
    let proj_seed = derive_seed(config.seed, PROJECTION_SEED_TAG, index as u64);
    let em_seed = derive_seed(config.seed, EM_SEED_TAG, index as u64);

    let pair = generate_haar(resolved.p, resolved.d, proj_seed).map_err(skip)?;
    let (y, y_comp) = project(x, &pair).map_err(skip)?;
    let (model, resp) = fit_gmm(&y, config.g, config.gmm_cov, em_seed, &config.em).map_err(skip)?;
    let partition = map_partition(&resp).map_err(skip)?;
    let fit = fit_regression(&y, &y_comp, resolved.regression).map_err(skip)?;
    let bic_gmm_value = bic_gmm(&model, resolved.n);
    let bic_reg_value = bic_reg(&fit, resolved.n);
    let bic = composite_bic(bic_gmm_value, bic_reg_value).map_err(skip)?;
    Ok(ScoredPartition {
        projection_index: index,
        bic,
        bic_gmm: bic_gmm_value,
        bic_reg: bic_reg_value,
        partition,
    })
}

/// Runs the full ensemble on `x`.
///
/// Identical inputs produce identical outputs regardless of how the
/// projection loop is scheduled across threads.
pub fn run(x: &DMatrix<f64>, config: &RpecluConfig) -> Result<RunOutput> {
    let resolved = resolve_settings(x, config)?;

    let results: Vec<std::result::Result<ScoredPartition, SkippedProjection>> = (1..=config.b)
        .into_par_iter()
        .map(|index| score_projection(x, config, &resolved, index))
        .collect();

    let mut ranking = Vec::with_capacity(config.b);
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(s) => ranking.push(s),
            Err(s) => skipped.push(s),
        }
    }
    if ranking.len() < config.b_star {
        return Err(Error::PartialEnsemble { scored: ranking.len(), required: config.b_star });
    }
    sort_ranking(&mut ranking);

    let selected = &ranking[..config.b_star];
    let members: Vec<MembershipMatrix> =
        selected.iter().map(|s| MembershipMatrix::from_hard(&s.partition)).collect();
    let (_, partition) = aggregate(&members)?;

    let selected_diversity = if selected.len() >= 2 {
        let parts: Vec<HardPartition> = selected.iter().map(|s| s.partition.clone()).collect();
        Some(pairwise_diversity(&parts)?)
    } else {
        None
    };

    Ok(RunOutput {
        partition,
        ranking,
        diagnostics: RunDiagnostics { resolved, skipped, selected_diversity },
    })
}
