//! Deterministic seed derivation and cluster-center seeding helpers.
//!
//! Every stochastic stage of the pipeline draws its randomness from a seed
//! derived with [`derive_seed`] from a master seed, a stage tag and a task
//! index. Derivation is counter-based, so any execution schedule of the
//! parallel stages reproduces the same streams.

use nalgebra::DMatrix;
use rand::Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from `(master, tag, index)`.
///
/// The same triple always yields the same seed; distinct tags give distinct
/// streams for the same index.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let a = splitmix64(master ^ tag.wrapping_mul(GOLDEN));
    splitmix64(a ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Squared Euclidean distance between row `i` of `x` and `center`.
fn row_dist2(x: &DMatrix<f64>, i: usize, center: &[f64]) -> f64 {
    let mut s = 0.0;
    for (j, c) in center.iter().enumerate() {
        let diff = x[(i, j)] - c;
        s += diff * diff;
    }
    s
}

/// Picks `g` rows of `x` as initial centers with distance-squared weighting.
///
/// The first center is uniform; every following one is sampled with
/// probability proportional to the squared distance from the nearest center
/// already chosen. Falls back to a uniform pick when all remaining distances
/// are zero (duplicate points).
pub(crate) fn kmeanspp_indices<R: Rng>(x: &DMatrix<f64>, g: usize, rng: &mut R) -> Vec<usize> {
    let n = x.nrows();
    assert!(g >= 1 && n >= g, "need at least g rows");
    let mut chosen = Vec::with_capacity(g);
    let first = rng.random_range(0..n);
    chosen.push(first);

    let center: Vec<f64> = x.row(first).iter().copied().collect();
    let mut dist2: Vec<f64> = (0..n).map(|i| row_dist2(x, i, &center)).collect();

    while chosen.len() < g {
        let total: f64 = dist2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(idx);
        let center: Vec<f64> = x.row(idx).iter().copied().collect();
        for (i, nearest) in dist2.iter_mut().enumerate() {
            let d = row_dist2(x, i, &center);
            if d < *nearest {
                *nearest = d;
            }
        }
    }
    chosen
}

/// Assigns every row of `x` to the nearest of the given center rows,
/// breaking ties toward the smaller center index.
pub(crate) fn assign_to_nearest(x: &DMatrix<f64>, centers: &[Vec<f64>]) -> Vec<usize> {
    let n = x.nrows();
    let mut labels = vec![0usize; n];
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        for (k, c) in centers.iter().enumerate() {
            let d = row_dist2(x, i, c);
            if d < best {
                best = d;
                *label = k;
            }
        }
    }
    labels
}
