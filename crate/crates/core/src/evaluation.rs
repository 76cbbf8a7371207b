//! Partition quality metrics and benchmark helpers.
//!
//! The Adjusted Rand Index compares two hard partitions through their
//! contingency table, corrected for chance agreement; diversity summarizes
//! the pairwise index over an ensemble. A distance-distortion check reports
//! which fraction of pairwise distances a projection preserves within a
//! stated factor, and a seeded multi-start k-means serves as the benchmark
//! baseline.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gmm::HardPartition;
use crate::rproj::ProjectionPair;
use crate::seeding::{assign_to_nearest, derive_seed, kmeanspp_indices};

const KMEANS_SEED_TAG: u64 = 0x4b4d_4e53;
const KMEANS_MAX_ITER: usize = 100;

/// Chance-corrected agreement between two partitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AriReport {
    /// Adjusted Rand Index in `[-1, 1]`; 1 means identical up to relabeling.
    pub ari: f64,
    /// Number of observations compared.
    pub n: usize,
}

/// Summary of the pairwise index over an ensemble of partitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversitySummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// Outcome of a distance-preservation check for one projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionReport {
    /// Distortion factor the check was run at.
    pub epsilon: f64,
    /// Fraction of evaluated pairs within the `1 +- epsilon` band; zero when
    /// no pair was evaluable.
    pub fraction_within: f64,
    /// Projection dimension used.
    pub d_used: usize,
    /// Number of point pairs with positive distance that entered the count.
    pub pairs_evaluated: usize,
}

fn pairs2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand Index between two equal-length partitions.
///
/// Computed from the contingency table in an integer-exact rearrangement, so
/// hand-checkable cases come out exact and the index is invariant under any
/// relabeling of either argument. Degenerate comparisons where the chance
/// correction cancels (both partitions trivial) report 1.
pub fn adjusted_rand_index(a: &HardPartition, b: &HardPartition) -> Result<AriReport> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::LengthMismatch { left: n, right: b.len() });
    }
    let ga = a.group_count();
    let gb = b.group_count();
    let mut table = vec![0u64; ga * gb];
    let mut rows = vec![0u64; ga];
    let mut cols = vec![0u64; gb];
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        table[la * gb + lb] += 1;
        rows[la] += 1;
        cols[lb] += 1;
    }
    let index: f64 = table.iter().map(|&c| pairs2(c as f64)).sum();
    let sum_a: f64 = rows.iter().map(|&c| pairs2(c as f64)).sum();
    let sum_b: f64 = cols.iter().map(|&c| pairs2(c as f64)).sum();
    let total = pairs2(n as f64);

    // ari = (index - sum_a sum_b / total) / ((sum_a + sum_b)/2 - sum_a sum_b / total),
    // cleared of the inner division so every term stays integer-valued.
    let numerator = 2.0 * (total * index - sum_a * sum_b);
    let denominator = total * (sum_a + sum_b) - 2.0 * sum_a * sum_b;
    let ari = if denominator == 0.0 { 1.0 } else { numerator / denominator };
    Ok(AriReport { ari, n })
}

/// Min, mean and max pairwise ARI over all unordered pairs of partitions.
pub fn pairwise_diversity(partitions: &[HardPartition]) -> Result<DiversitySummary> {
    if partitions.len() < 2 {
        return Err(Error::Infeasible(
            "diversity needs at least two partitions".into(),
        ));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..partitions.len() {
        for j in i + 1..partitions.len() {
            let ari = adjusted_rand_index(&partitions[i], &partitions[j])?.ari;
            min = min.min(ari);
            max = max.max(ari);
            sum += ari;
            count += 1;
        }
    }
    Ok(DiversitySummary { min, mean: sum / count as f64, max })
}

/// Checks how well a projection preserves pairwise distances.
///
/// A pair `(i, j)` counts as preserved when the projected distance, rescaled
/// by `scale` (default `sqrt(p/d)`, which restores the expected squared
/// norm), lies within `1 +- epsilon` of the original distance. Coincident
/// points are excluded from the count.
pub fn jl_distortion(
    x: &DMatrix<f64>,
    pair: &ProjectionPair,
    epsilon: f64,
    scale: Option<f64>,
) -> Result<DistortionReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    let p = pair.p();
    let d = pair.d();
    if x.ncols() != p {
        return Err(Error::ColumnMismatch { expected: p, actual: x.ncols() });
    }
    let scale = scale.unwrap_or_else(|| (p as f64 / d as f64).sqrt());
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
    }

    let y = x * pair.basis();
    let n = x.nrows();
    let mut within = 0usize;
    let mut evaluated = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let orig = (x.row(i) - x.row(j)).norm();
            if orig == 0.0 {
                continue;
            }
            evaluated += 1;
            let proj = scale * (y.row(i) - y.row(j)).norm();
            if proj >= (1.0 - epsilon) * orig && proj <= (1.0 + epsilon) * orig {
                within += 1;
            }
        }
    }
    let fraction_within = if evaluated == 0 { 0.0 } else { within as f64 / evaluated as f64 };
    Ok(DistortionReport { epsilon, fraction_within, d_used: d, pairs_evaluated: evaluated })
}

/// One Lloyd run from distance-squared-weighted seeds; returns labels,
/// centers, the final within-cluster sum of squares and its per-iteration
/// trace.
fn lloyd(
    x: &DMatrix<f64>,
    g: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<Vec<f64>>, f64, Vec<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let mut centers: Vec<Vec<f64>> = kmeanspp_indices(x, g, rng)
        .into_iter()
        .map(|i| x.row(i).iter().copied().collect())
        .collect();
    let mut labels = assign_to_nearest(x, &centers);
    let mut trace = Vec::new();

    let wcss = |labels: &[usize], centers: &[Vec<f64>]| -> f64 {
        let mut total = 0.0;
        for i in 0..n {
            let c = &centers[labels[i]];
            for j in 0..p {
                let diff = x[(i, j)] - c[j];
                total += diff * diff;
            }
        }
        total
    };

    for _ in 0..KMEANS_MAX_ITER {
        // Update step.
        let mut counts = vec![0usize; g];
        let mut sums = vec![vec![0.0; p]; g];
        for i in 0..n {
            counts[labels[i]] += 1;
            for j in 0..p {
                sums[labels[i]][j] += x[(i, j)];
            }
        }
        for k in 0..g {
            if counts[k] == 0 {
                // Move an empty cluster onto the point farthest from its
                // current center assignment.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da: f64 = (0..p)
                            .map(|j| (x[(a, j)] - centers[labels[a]][j]).powi(2))
                            .sum();
                        let db: f64 = (0..p)
                            .map(|j| (x[(b, j)] - centers[labels[b]][j]).powi(2))
                            .sum();
                        da.total_cmp(&db)
                    })
                    .expect("n >= 1");
                centers[k] = x.row(far).iter().copied().collect();
            } else {
                for j in 0..p {
                    centers[k][j] = sums[k][j] / counts[k] as f64;
                }
            }
        }
        let new_labels = assign_to_nearest(x, &centers);
        trace.push(wcss(&new_labels, &centers));
        if new_labels == labels {
            labels = new_labels;
            break;
        }
        labels = new_labels;
    }
    let final_wcss = wcss(&labels, &centers);
    (labels, centers, final_wcss, trace)
}

/// Multi-start Lloyd baseline; returns the partition of the best start by
/// within-cluster sum of squares. Deterministic given the seed.
pub fn kmeans_baseline(x: &DMatrix<f64>, g: usize, seed: u64, n_starts: usize) -> Result<HardPartition> {
    let n = x.nrows();
    if g == 0 || n_starts == 0 {
        return Err(Error::InvalidConfig("k-means needs g >= 1 and n_starts >= 1".into()));
    }
    if n < g {
        return Err(Error::Infeasible(format!(
            "cannot split {n} observations into {g} clusters"
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for start in 0..n_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, KMEANS_SEED_TAG, start as u64));
        let (labels, _, wcss, _) = lloyd(x, g, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| wcss < *b) {
            best = Some((wcss, labels));
        }
    }
    HardPartition::new(best.expect("n_starts >= 1").1, g)
}
