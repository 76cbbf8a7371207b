//! Greedy consensus over an ensemble of cluster membership matrices.
//!
//! Cluster labels are arbitrary, so two partitions are compared only after
//! the columns of one have been optimally permuted against the other. The
//! dissimilarity between a membership matrix `U` and a consensus candidate
//! `P` is the permutation-minimized mean squared row distance. Aggregation
//! sweeps the ensemble once: each member is relabeled against the running
//! candidate and folded in with weight `1/b`, an approach that sidesteps the
//! intractable joint minimization over all candidates and all relabelings.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gmm::HardPartition;

/// Relative tolerance used to recognize equal assignment objectives.
const TIE_EPS: f64 = 1e-9;

/// An `n x g` membership matrix with rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    u: DMatrix<f64>,
    hard: bool,
}

impl MembershipMatrix {
    /// Indicator encoding of a hard partition.
    pub fn from_hard(partition: &HardPartition) -> Self {
        let n = partition.len();
        let g = partition.group_count();
        let mut u = DMatrix::zeros(n, g);
        for (i, &label) in partition.labels().iter().enumerate() {
            u[(i, label)] = 1.0;
        }
        Self { u, hard: true }
    }

    /// Wraps a soft responsibility matrix, validating entries in `[0, 1]`
    /// and row sums within `1e-8` of one.
    pub fn from_soft(u: DMatrix<f64>) -> Result<Self> {
        if u.nrows() == 0 || u.ncols() == 0 {
            return Err(Error::EmptyInput("membership matrix"));
        }
        for i in 0..u.nrows() {
            let mut sum = 0.0;
            for k in 0..u.ncols() {
                let v = u[(i, k)];
                if !(0.0..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::InvalidConfig(format!(
                        "membership entry ({i},{k}) = {v} outside [0,1]"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidConfig(format!(
                    "membership row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { u, hard: false })
    }

    /// The underlying matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Whether the matrix encodes a hard partition.
    pub fn is_hard(&self) -> bool {
        self.hard
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.u.nrows()
    }

    /// True when the matrix has no rows.
    pub fn is_empty(&self) -> bool {
        self.u.nrows() == 0
    }

    /// Number of clusters (columns).
    pub fn group_count(&self) -> usize {
        self.u.ncols()
    }
}

/// Running consensus candidate and the number of partitions absorbed so far.
#[derive(Debug, Clone)]
pub struct ConsensusState {
    p_mat: DMatrix<f64>,
    count: usize,
}

impl ConsensusState {
    /// The soft consensus matrix, row-stochastic by construction.
    pub fn consensus_matrix(&self) -> &DMatrix<f64> {
        &self.p_mat
    }

    /// How many partitions the candidate averages.
    pub fn absorbed(&self) -> usize {
        self.count
    }
}

/// Minimum-cost perfect assignment on a square cost matrix, `O(g^3)`.
///
/// Returns `row_of_col[k]` = the row assigned to column `k`.
fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    // Shortest-augmenting-path formulation with row/column potentials;
    // indices are offset by one so 0 can mean "unmatched".
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| matched_row[j] - 1).collect()
}

/// Maximum-score assignment plus its canonically summed objective.
fn max_assignment(score: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let perm = min_cost_assignment(&(-score));
    let value = assignment_value(score, &perm);
    (perm, value)
}

fn assignment_value(score: &DMatrix<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(k, &j)| score[(j, k)]).sum()
}

/// Lexicographically smallest permutation among those achieving the optimal
/// assignment score (within a relative tolerance).
fn lex_smallest_optimal(score: &DMatrix<f64>, optimum: f64) -> Vec<usize> {
    let g = score.nrows();
    let eps = TIE_EPS * (1.0 + optimum.abs());
    let mut perm = vec![usize::MAX; g];
    let mut used = vec![false; g];
    let mut fixed_value = 0.0;
    for k in 0..g {
        let free_cols: Vec<usize> = (k + 1..g).collect();
        for j in 0..g {
            if used[j] {
                continue;
            }
            // Best completion with perm[k] = j on the remaining rows/columns.
            let free_rows: Vec<usize> =
                (0..g).filter(|&r| !used[r] && r != j).collect();
            let rest = if free_rows.is_empty() {
                0.0
            } else {
                let sub = DMatrix::from_fn(free_rows.len(), free_cols.len(), |r, c| {
                    score[(free_rows[r], free_cols[c])]
                });
                max_assignment(&sub).1
            };
            if fixed_value + score[(j, k)] + rest >= optimum - eps {
                perm[k] = j;
                used[j] = true;
                fixed_value += score[(j, k)];
                break;
            }
        }
        debug_assert!(perm[k] != usize::MAX, "refinement failed to place column {k}");
    }
    perm
}

/// Cross-product matrix `m[j][k] = <U[:,j], P[:,k]>`.
fn column_cross_products(u: &DMatrix<f64>, p_mat: &DMatrix<f64>) -> DMatrix<f64> {
    u.transpose() * p_mat
}

fn check_shapes(u: &MembershipMatrix, p_mat: &DMatrix<f64>) -> Result<()> {
    if u.matrix().nrows() != p_mat.nrows() || u.matrix().ncols() != p_mat.ncols() {
        return Err(Error::ShapeMismatch {
            left_rows: u.matrix().nrows(),
            left_cols: u.matrix().ncols(),
            right_rows: p_mat.nrows(),
            right_cols: p_mat.ncols(),
        });
    }
    Ok(())
}

/// The column permutation of `u` that minimizes the mean squared row distance
/// to `p_mat`.
///
/// Returned as `perm` with `perm[k]` = the column of `u` relabeled to
/// position `k`. Minimizing the distance is equivalent to maximizing the
/// trace of the matched column cross-products, solved exactly as a linear
/// assignment; ties resolve to the lexicographically smallest permutation.
pub fn optimal_permutation(u: &MembershipMatrix, p_mat: &DMatrix<f64>) -> Result<Vec<usize>> {
    check_shapes(u, p_mat)?;
    let score = column_cross_products(u.matrix(), p_mat);
    let (_, optimum) = max_assignment(&score);
    Ok(lex_smallest_optimal(&score, optimum))
}

/// Permutation-minimized mean squared row distance between `u` and `p_mat`.
///
/// Zero exactly when `u` equals `p_mat` up to a column permutation.
pub fn dissimilarity(u: &MembershipMatrix, p_mat: &DMatrix<f64>) -> Result<f64> {
    let perm = optimal_permutation(u, p_mat)?;
    let n = p_mat.nrows();
    let g = p_mat.ncols();
    let mut total = 0.0;
    for i in 0..n {
        for k in 0..g {
            let diff = u.matrix()[(i, perm[k])] - p_mat[(i, k)];
            total += diff * diff;
        }
    }
    Ok(total / n as f64)
}

/// Sequentially folds the ensemble into one consensus.
///
/// The first matrix anchors the candidate; each subsequent member is
/// optimally relabeled against the current candidate and averaged in with
/// weight `1/b`. The hard partition is the row-wise argmax of the final
/// candidate, ties to the smaller cluster index.
pub fn aggregate(partitions: &[MembershipMatrix]) -> Result<(ConsensusState, HardPartition)> {
    let first = partitions.first().ok_or(Error::EmptyInput("partition ensemble"))?;
    let n = first.len();
    let g = first.group_count();
    for part in partitions {
        if part.len() != n || part.group_count() != g {
            return Err(Error::ShapeMismatch {
                left_rows: n,
                left_cols: g,
                right_rows: part.len(),
                right_cols: part.group_count(),
            });
        }
    }

    let mut p_mat = first.matrix().clone();
    for (idx, part) in partitions.iter().enumerate().skip(1) {
        let b = (idx + 1) as f64;
        let perm = optimal_permutation(part, &p_mat)?;
        let w_old = (b - 1.0) / b;
        let w_new = 1.0 / b;
        for i in 0..n {
            for k in 0..g {
                p_mat[(i, k)] = w_old * p_mat[(i, k)] + w_new * part.matrix()[(i, perm[k])];
            }
        }
    }

    let labels: Vec<usize> = (0..n)
        .map(|i| {
            let mut arg = 0usize;
            let mut best = p_mat[(i, 0)];
            for k in 1..g {
                if p_mat[(i, k)] > best {
                    best = p_mat[(i, k)];
                    arg = k;
                }
            }
            arg
        })
        .collect();
    let hard = HardPartition::new(labels, g)?;
    Ok((ConsensusState { p_mat, count: partitions.len() }, hard))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hard(n: usize, g: usize, rng: &mut ChaCha8Rng) -> MembershipMatrix {
        // Every cluster gets at least one point so columns are non-trivial.
        let mut labels: Vec<usize> = (0..n).map(|i| i % g).collect();
        for l in labels.iter_mut() {
            if rng.random::<f64>() < 0.7 {
                *l = rng.random_range(0..g);
            }
        }
        MembershipMatrix::from_hard(&HardPartition::new(labels, g).unwrap())
    }

    fn permutations(g: usize) -> Vec<Vec<usize>> {
        // Lexicographic-order enumeration by recursion.
        fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
            let g = used.len();
            if prefix.len() == g {
                out.push(prefix.clone());
                return;
            }
            for j in 0..g {
                if !used[j] {
                    used[j] = true;
                    prefix.push(j);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[j] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; g], &mut out);
        out
    }

    /// Brute-force oracle: first permutation (in lexicographic order) whose
    /// matched cross-product sum ties the maximum, with the same tie
    /// tolerance the implementation uses.
    fn brute_force_optimal(u: &MembershipMatrix, p_mat: &DMatrix<f64>) -> Vec<usize> {
        let g = p_mat.ncols();
        let score = column_cross_products(u.matrix(), p_mat);
        let all = permutations(g);
        let best = all
            .iter()
            .map(|perm| assignment_value(&score, perm))
            .fold(f64::NEG_INFINITY, f64::max);
        let eps = TIE_EPS * (1.0 + best.abs());
        all.into_iter()
            .find(|perm| assignment_value(&score, perm) >= best - eps)
            .unwrap()
    }

    fn permute_columns(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, k| m[(i, perm[k])])
    }

    #[test]
    fn identical_matrices_give_identity_permutation_and_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = random_hard(10, 3, &mut rng);
        let perm = optimal_permutation(&u, u.matrix()).unwrap();
        assert_eq!(perm, vec![0, 1, 2]);
        assert_eq!(dissimilarity(&u, u.matrix()).unwrap(), 0.0);
    }

    #[test]
    fn swapped_columns_are_recovered_with_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_hard(12, 3, &mut rng);
        // p is u with columns 0 and 1 swapped; relabeling u against p must
        // place u's column 1 first.
        let p = permute_columns(u.matrix(), &[1, 0, 2]);
        let perm = optimal_permutation(&u, &p).unwrap();
        assert_eq!(perm, vec![1, 0, 2]);
        assert_eq!(dissimilarity(&u, &p).unwrap(), 0.0);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for case in 0..300 {
            let g = 2 + (case % 3);
            let n = 4 + (case % 9);
            let u = random_hard(n, g, &mut rng);
            // Consensus-like p: average of a few hard matrices.
            let m = 1 + (case % 4);
            let mut p = DMatrix::zeros(n, g);
            for _ in 0..m {
                p += random_hard(n, g, &mut rng).matrix();
            }
            p /= m as f64;
            let fast = optimal_permutation(&u, &p).unwrap();
            let brute = brute_force_optimal(&u, &p);
            assert_eq!(fast, brute, "case {case}");
        }
    }

    #[test]
    fn hungarian_matches_brute_force_on_dense_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in 2..=6 {
            for _ in 0..60 {
                let score = DMatrix::from_fn(g, g, |_, _| rng.random::<f64>());
                let (perm, value) = max_assignment(&score);
                let mut best = f64::NEG_INFINITY;
                for cand in permutations(g) {
                    best = best.max(assignment_value(&score, &cand));
                }
                assert!((value - best).abs() < 1e-12);
                assert!((assignment_value(&score, &perm) - best).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hand_checked_dissimilarity() {
        // u = [0,0,1,1], p from [0,1,1,1]: after the best relabeling exactly
        // one point disagrees, each disagreement contributes 2 to the squared
        // distance, so h = 2/4.
        let u = MembershipMatrix::from_hard(&HardPartition::new(vec![0, 0, 1, 1], 2).unwrap());
        let p = MembershipMatrix::from_hard(&HardPartition::new(vec![0, 1, 1, 1], 2).unwrap());
        let h = dissimilarity(&u, p.matrix()).unwrap();
        assert!((h - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let u = MembershipMatrix::from_hard(&HardPartition::new(vec![0, 1], 2).unwrap());
        let p = DMatrix::zeros(3, 2);
        assert!(matches!(
            optimal_permutation(&u, &p),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn aggregate_of_one_partition_is_that_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_hard(9, 3, &mut rng);
        let (state, hard) = aggregate(std::slice::from_ref(&u)).unwrap();
        assert_eq!(state.consensus_matrix(), u.matrix());
        assert_eq!(state.absorbed(), 1);
        let back = MembershipMatrix::from_hard(&hard);
        assert_eq!(back.matrix(), u.matrix());
    }

    #[test]
    fn aggregate_of_relabeled_copies_recovers_the_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = HardPartition::new(vec![0, 0, 1, 2, 1, 2, 0, 1], 3).unwrap();
        let u0 = MembershipMatrix::from_hard(&base);
        let mut ensemble = vec![u0.clone()];
        for _ in 0..9 {
            let perms = permutations(3);
            let perm = &perms[rng.random_range(0..perms.len())];
            let shuffled = permute_columns(u0.matrix(), perm);
            ensemble.push(MembershipMatrix::from_soft(shuffled).unwrap());
        }
        let (state, hard) = aggregate(&ensemble).unwrap();
        // Every relabeled copy maps exactly onto the anchor, so the consensus
        // stays the anchor itself.
        assert!((state.consensus_matrix() - u0.matrix()).abs().max() < 1e-12);
        assert_eq!(hard.labels(), base.labels());
    }

    #[test]
    fn aggregate_rejects_empty_and_mismatched_input() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput(_))));
        let a = MembershipMatrix::from_hard(&HardPartition::new(vec![0, 1], 2).unwrap());
        let b = MembershipMatrix::from_hard(&HardPartition::new(vec![0, 1, 1], 2).unwrap());
        assert!(matches!(aggregate(&[a, b]), Err(Error::ShapeMismatch { .. })));
    }

    /// Exhaustive consensus objective: mean permutation-minimized distance
    /// from the ensemble to the best hard candidate over all g^n labelings.
    fn exhaustive_best_objective(ensemble: &[MembershipMatrix]) -> f64 {
        let n = ensemble[0].len();
        let g = ensemble[0].group_count();
        let mut best = f64::INFINITY;
        let total = g.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                labels.push(c % g);
                c /= g;
            }
            let cand = MembershipMatrix::from_hard(&HardPartition::new(labels, g).unwrap());
            let obj: f64 = ensemble
                .iter()
                .map(|u| dissimilarity(u, cand.matrix()).unwrap())
                .sum::<f64>()
                / ensemble.len() as f64;
            best = best.min(obj);
        }
        best
    }

    fn greedy_objective(ensemble: &[MembershipMatrix]) -> f64 {
        let (_, hard) = aggregate(ensemble).unwrap();
        let cand = MembershipMatrix::from_hard(&hard);
        ensemble
            .iter()
            .map(|u| dissimilarity(u, cand.matrix()).unwrap())
            .sum::<f64>()
            / ensemble.len() as f64
    }

    #[test]
    fn greedy_consensus_finds_the_exhaustive_optimum_on_a_tiny_instance() {
        // Three partitions of six points disagreeing on one point.
        let parts = [
            HardPartition::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap(),
            HardPartition::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap(),
            HardPartition::new(vec![0, 0, 1, 1, 1, 1], 2).unwrap(),
        ];
        let ensemble: Vec<_> = parts.iter().map(MembershipMatrix::from_hard).collect();
        let greedy = greedy_objective(&ensemble);
        let best = exhaustive_best_objective(&ensemble);
        assert!(
            (greedy - best).abs() < 1e-12,
            "greedy {greedy} vs exhaustive {best}"
        );
        let (_, hard) = aggregate(&ensemble).unwrap();
        assert_eq!(hard.labels(), &[0, 0, 0, 1, 1, 1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // Permuting the columns of every ensemble member leaves the final
        // hard consensus unchanged. Soft matrices with continuous entries
        // keep the per-step optima unique, so the tie-break never engages.
        #[test]
        fn label_switching_invariance(seed in 0u64..2000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = 3usize;
            let ensemble: Vec<_> = (0..4)
                .map(|_| {
                    let raw = DMatrix::from_fn(8, g, |_, _| rng.random::<f64>() + 0.05);
                    let normalized = DMatrix::from_fn(8, g, |i, k| {
                        raw[(i, k)] / raw.row(i).sum()
                    });
                    MembershipMatrix::from_soft(normalized).unwrap()
                })
                .collect();
            let (_, base) = aggregate(&ensemble).unwrap();

            let perms = permutations(g);
            let shuffled: Vec<_> = ensemble
                .iter()
                .map(|u| {
                    let perm = &perms[rng.random_range(0..perms.len())];
                    MembershipMatrix::from_soft(permute_columns(u.matrix(), perm)).unwrap()
                })
                .collect();
            let (_, relabeled) = aggregate(&shuffled).unwrap();

            // Compare partitions up to relabeling via the exact distance.
            let d = dissimilarity(
                &MembershipMatrix::from_hard(&base),
                MembershipMatrix::from_hard(&relabeled).matrix(),
            ).unwrap();
            prop_assert!(d.abs() < 1e-12);
        }

        // The running candidate stays row-stochastic after every sweep.
        #[test]
        fn consensus_rows_stay_stochastic(seed in 0u64..2000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ensemble: Vec<_> = (0..5).map(|_| random_hard(7, 3, &mut rng)).collect();
            let (state, _) = aggregate(&ensemble).unwrap();
            for i in 0..7 {
                let s: f64 = (0..3).map(|k| state.consensus_matrix()[(i, k)]).sum();
                prop_assert!((s - 1.0).abs() < 1e-10);
            }
        }
    }
}
