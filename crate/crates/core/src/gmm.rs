//! Gaussian mixture fitting by EM on projected data.
//!
//! Fits a `g`-component mixture with full, diagonal or spherical component
//! covariances, reports the maximized log-likelihood and the free-parameter
//! count, and extracts the maximum-posterior hard partition. Each fit runs a
//! configurable number of restarts seeded by distance-squared-weighted center
//! picks and keeps the best restart by log-likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeding::{assign_to_nearest, derive_seed, kmeanspp_indices};

/// Shape constraint on the component covariance matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceStructure {
    /// Unconstrained symmetric positive-definite matrices.
    Full,
    /// Independent per-coordinate variances.
    Diagonal,
    /// One shared variance per component.
    Spherical,
}

impl std::fmt::Display for CovarianceStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CovarianceStructure::Full => "full",
            CovarianceStructure::Diagonal => "diagonal",
            CovarianceStructure::Spherical => "spherical",
        })
    }
}

/// EM stopping and restart configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    /// Relative log-likelihood change below which EM stops.
    pub tol: f64,
    /// Hard cap on EM iterations per restart.
    pub max_iter: usize,
    /// Number of independently seeded restarts.
    pub n_starts: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 200, n_starts: 3 }
    }
}

/// Relative scale of the covariance eigenvalue floor: `1e-6 * trace / d`.
const RIDGE_SCALE: f64 = 1e-6;
/// Absolute backstop for the eigenvalue floor on degenerate components.
const ABS_VARIANCE_FLOOR: f64 = 1e-12;
/// Responsibility mass below which a component counts as empty.
const EMPTY_MASS: f64 = 1e-8;
/// Empty-component rescues allowed before a restart is abandoned.
const MAX_EMPTY_EVENTS: usize = 3;

const START_SEED_TAG: u64 = 0x454d_5354;

/// A fitted Gaussian mixture.
#[derive(Debug, Clone)]
pub struct GmmModel {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    loglik: f64,
    q_y: usize,
    cov_structure: CovarianceStructure,
}

impl GmmModel {
    /// Mixing weights, non-negative and summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Component means.
    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    /// Component covariances, stored as `d x d` matrices for every structure.
    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    /// Maximized log-likelihood achieved by the fit.
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    /// Number of free parameters of the fitted model.
    pub fn free_parameters(&self) -> usize {
        self.q_y
    }

    /// Covariance structure the model was fitted under.
    pub fn structure(&self) -> CovarianceStructure {
        self.cov_structure
    }

    /// Number of components.
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    /// Evaluates the mixture log-likelihood of `y` under this model.
    pub fn log_likelihood_of(&self, y: &DMatrix<f64>) -> Result<f64> {
        let d = self.means[0].len();
        if y.ncols() != d {
            return Err(Error::ColumnMismatch { expected: d, actual: y.ncols() });
        }
        let comps: Vec<Component> = (0..self.weights.len())
            .map(|k| Component {
                weight: self.weights[k],
                mean: self.means[k].clone(),
                cov: self.covariances[k].clone(),
            })
            .collect();
        let prepared = prepare_all(&comps, self.cov_structure)
            .map_err(|e| Error::FitFailure(format!("model covariance not usable: {e}")))?;
        let n = y.nrows();
        let mut resp = DMatrix::zeros(n, comps.len());
        let mut lse = vec![0.0; n];
        Ok(e_step(y, &comps, &prepared, &mut resp, &mut lse))
    }
}

/// A hard assignment of every observation to one of `g` clusters.
///
/// Labels are zero-based cluster indices in `0..g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardPartition {
    labels: Vec<usize>,
    g: usize,
}

impl HardPartition {
    /// Builds a partition, validating that every label lies in `0..g`.
    pub fn new(labels: Vec<usize>, g: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("partition labels"));
        }
        if g == 0 {
            return Err(Error::InvalidConfig("partition needs g >= 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= g) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for g={g}"
            )));
        }
        Ok(Self { labels, g })
    }

    /// Cluster index of every observation.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of clusters the labels are drawn from.
    pub fn group_count(&self) -> usize {
        self.g
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// True when the partition holds no observations (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Closed-form free-parameter count for a `g`-component mixture in `d`
/// dimensions: `g-1` weights, `g*d` means, plus the covariance parameters of
/// the chosen structure.
pub fn free_parameter_count(g: usize, d: usize, structure: CovarianceStructure) -> usize {
    let cov = match structure {
        CovarianceStructure::Full => g * d * (d + 1) / 2,
        CovarianceStructure::Diagonal => g * d,
        CovarianceStructure::Spherical => g,
    };
    (g - 1) + g * d + cov
}

struct Component {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

enum Prepared {
    Full { chol: Cholesky<f64, Dyn>, logdet: f64 },
    Diagonal { inv_var: DVector<f64>, logdet: f64 },
    Spherical { inv_var: f64, logdet: f64 },
}

const LN_2PI: f64 = 1.8378770664093453;

fn prepare(comp: &Component, structure: CovarianceStructure) -> std::result::Result<Prepared, String> {
    let d = comp.mean.len();
    match structure {
        CovarianceStructure::Full => {
            let chol = comp
                .cov
                .clone()
                .cholesky()
                .ok_or_else(|| "covariance not positive definite".to_string())?;
            let l = chol.l_dirty();
            let logdet: f64 = (0..d).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
            Ok(Prepared::Full { chol, logdet })
        }
        CovarianceStructure::Diagonal => {
            let mut inv_var = DVector::zeros(d);
            let mut logdet = 0.0;
            for j in 0..d {
                let v = comp.cov[(j, j)];
                if v <= 0.0 {
                    return Err("zero variance coordinate".to_string());
                }
                inv_var[j] = 1.0 / v;
                logdet += v.ln();
            }
            Ok(Prepared::Diagonal { inv_var, logdet })
        }
        CovarianceStructure::Spherical => {
            let v = comp.cov[(0, 0)];
            if v <= 0.0 {
                return Err("zero spherical variance".to_string());
            }
            Ok(Prepared::Spherical { inv_var: 1.0 / v, logdet: d as f64 * v.ln() })
        }
    }
}

fn prepare_all(
    comps: &[Component],
    structure: CovarianceStructure,
) -> std::result::Result<Vec<Prepared>, String> {
    comps.iter().map(|c| prepare(c, structure)).collect()
}

fn log_density(prep: &Prepared, mean: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let d = mean.len();
    let diff = x - mean;
    let (logdet, quad) = match prep {
        Prepared::Full { chol, logdet } => {
            let solved = chol.solve(&diff);
            (*logdet, diff.dot(&solved))
        }
        Prepared::Diagonal { inv_var, logdet } => {
            let quad: f64 = (0..d).map(|j| diff[j] * diff[j] * inv_var[j]).sum();
            (*logdet, quad)
        }
        Prepared::Spherical { inv_var, logdet } => (*logdet, diff.norm_squared() * inv_var),
    };
    -0.5 * (d as f64 * LN_2PI + logdet + quad)
}

/// Fills `resp` with posterior responsibilities and `lse` with per-point
/// mixture log-densities; returns the total log-likelihood.
fn e_step(
    y: &DMatrix<f64>,
    comps: &[Component],
    prepared: &[Prepared],
    resp: &mut DMatrix<f64>,
    lse: &mut [f64],
) -> f64 {
    let n = y.nrows();
    let g = comps.len();
    let mut logs = vec![0.0; g];
    let mut total = 0.0;
    let mut x = DVector::zeros(y.ncols());
    for i in 0..n {
        for (j, v) in y.row(i).iter().enumerate() {
            x[j] = *v;
        }
        for k in 0..g {
            logs[k] = comps[k].weight.ln() + log_density(&prepared[k], &comps[k].mean, &x);
        }
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logs.iter().map(|&l| (l - m).exp()).sum();
        let row_lse = m + sum_exp.ln();
        for k in 0..g {
            resp[(i, k)] = (logs[k] - row_lse).exp();
        }
        lse[i] = row_lse;
        total += row_lse;
    }
    total
}

/// Eigenvalue floor for an estimated covariance: relative to its average
/// eigenvalue with an absolute backstop.
fn eig_floor(trace: f64, d: usize) -> f64 {
    (RIDGE_SCALE * trace / d as f64).max(ABS_VARIANCE_FLOOR)
}

/// Clamps the smallest eigenvalue of a symmetric matrix to the floor by a
/// uniform diagonal shift. Healthy matrices pass through unchanged.
fn floor_full_covariance(mut cov: DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let floor = eig_floor(cov.trace(), d);
    let min_eig = cov.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < floor {
        for i in 0..d {
            cov[(i, i)] += floor - min_eig;
        }
    }
    cov
}

fn floor_diagonal_covariance(vars: &mut [f64]) {
    let d = vars.len();
    let trace: f64 = vars.iter().sum();
    let floor = eig_floor(trace, d);
    for v in vars.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }
}

/// Structure-shaped covariance from a weighted scatter around `mean`.
fn weighted_covariance(
    y: &DMatrix<f64>,
    weights: &[f64],
    total: f64,
    mean: &DVector<f64>,
    structure: CovarianceStructure,
) -> DMatrix<f64> {
    let n = y.nrows();
    let d = y.ncols();
    match structure {
        CovarianceStructure::Full => {
            let mut s = DMatrix::zeros(d, d);
            for i in 0..n {
                let w = weights[i];
                if w == 0.0 {
                    continue;
                }
                for a in 0..d {
                    let wa = w * (y[(i, a)] - mean[a]);
                    for b in a..d {
                        s[(a, b)] += wa * (y[(i, b)] - mean[b]);
                    }
                }
            }
            for a in 0..d {
                for b in a..d {
                    let v = s[(a, b)] / total;
                    s[(a, b)] = v;
                    s[(b, a)] = v;
                }
            }
            floor_full_covariance(s)
        }
        CovarianceStructure::Diagonal => {
            let mut vars = vec![0.0; d];
            for i in 0..n {
                let w = weights[i];
                if w == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let diff = y[(i, j)] - mean[j];
                    vars[j] += w * diff * diff;
                }
            }
            for v in vars.iter_mut() {
                *v /= total;
            }
            floor_diagonal_covariance(&mut vars);
            DMatrix::from_diagonal(&DVector::from_vec(vars))
        }
        CovarianceStructure::Spherical => {
            let mut sum = 0.0;
            for i in 0..n {
                let w = weights[i];
                if w == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let diff = y[(i, j)] - mean[j];
                    sum += w * diff * diff;
                }
            }
            let mut var = sum / (total * d as f64);
            let floor = eig_floor(var * d as f64, d);
            if var < floor {
                var = floor;
            }
            DMatrix::from_diagonal_element(d, d, var)
        }
    }
}

/// Diagonal covariance built from the global per-column variances, used to
/// re-seed degenerate components.
fn global_fallback_cov(y: &DMatrix<f64>, structure: CovarianceStructure) -> DMatrix<f64> {
    let n = y.nrows();
    let d = y.ncols();
    let mut mean = DVector::zeros(d);
    for i in 0..n {
        for j in 0..d {
            mean[j] += y[(i, j)];
        }
    }
    mean /= n as f64;
    let uniform = vec![1.0 / n as f64; n];
    // A diagonal matrix is valid under every structure here.
    let shaped = match structure {
        CovarianceStructure::Spherical => CovarianceStructure::Spherical,
        _ => CovarianceStructure::Diagonal,
    };
    weighted_covariance(y, &uniform, 1.0, &mean, shaped)
}

struct EmOutcome {
    comps: Vec<Component>,
    resp: DMatrix<f64>,
    loglik: f64,
    /// Log-likelihood trajectory; inspected by the monotonicity tests.
    #[cfg_attr(not(test), allow(dead_code))]
    trace: Vec<f64>,
}

fn init_components(
    y: &DMatrix<f64>,
    g: usize,
    structure: CovarianceStructure,
    rng: &mut ChaCha8Rng,
) -> Vec<Component> {
    let n = y.nrows();
    let d = y.ncols();
    let center_rows = kmeanspp_indices(y, g, rng);
    let centers: Vec<Vec<f64>> = center_rows
        .iter()
        .map(|&i| y.row(i).iter().copied().collect())
        .collect();
    let labels = assign_to_nearest(y, &centers);
    let fallback = global_fallback_cov(y, structure);

    (0..g)
        .map(|k| {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == k).collect();
            if members.len() < 2 {
                let mean = DVector::from_vec(centers[k].clone());
                return Component { weight: 1.0 / n as f64, mean, cov: fallback.clone() };
            }
            let mut mean = DVector::zeros(d);
            for &i in &members {
                for j in 0..d {
                    mean[j] += y[(i, j)];
                }
            }
            mean /= members.len() as f64;
            let mut w = vec![0.0; n];
            for &i in &members {
                w[i] = 1.0;
            }
            let cov = weighted_covariance(y, &w, members.len() as f64, &mean, structure);
            Component { weight: members.len() as f64 / n as f64, mean, cov }
        })
        .collect()
}

fn normalize_weights(comps: &mut [Component]) {
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    for c in comps.iter_mut() {
        c.weight /= total;
    }
}

fn em_single_start(
    y: &DMatrix<f64>,
    g: usize,
    structure: CovarianceStructure,
    seed: u64,
    config: &EmConfig,
) -> std::result::Result<EmOutcome, String> {
    let n = y.nrows();
    let d = y.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps = init_components(y, g, structure, &mut rng);
    normalize_weights(&mut comps);

    let mut resp = DMatrix::zeros(n, g);
    let mut lse = vec![0.0; n];
    let mut trace = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut empty_events = 0usize;

    for _ in 0..config.max_iter {
        let prepared = prepare_all(&comps, structure)?;
        let ll = e_step(y, &comps, &prepared, &mut resp, &mut lse);
        if !ll.is_finite() {
            return Err("log-likelihood became non-finite".to_string());
        }
        trace.push(ll);
        if prev_ll.is_finite() && (ll - prev_ll).abs() < config.tol * ll.abs().max(1.0) {
            return Ok(EmOutcome { comps, resp, loglik: ll, trace });
        }
        prev_ll = ll;

        // M-step.
        for k in 0..g {
            let mass: f64 = (0..n).map(|i| resp[(i, k)]).sum();
            if mass < EMPTY_MASS {
                empty_events += 1;
                if empty_events > MAX_EMPTY_EVENTS {
                    return Err(format!(
                        "component collapsed {empty_events} times; restart abandoned"
                    ));
                }
                // Re-seed at the point the current mixture explains worst.
                let worst = (0..n)
                    .min_by(|&a, &b| lse[a].total_cmp(&lse[b]))
                    .expect("n >= 1");
                comps[k].mean = DVector::from_iterator(d, y.row(worst).iter().copied());
                comps[k].cov = global_fallback_cov(y, structure);
                comps[k].weight = 1.0 / n as f64;
                continue;
            }
            comps[k].weight = mass / n as f64;
            let mut mean = DVector::zeros(d);
            for i in 0..n {
                let w = resp[(i, k)];
                for j in 0..d {
                    mean[j] += w * y[(i, j)];
                }
            }
            mean /= mass;
            let col: Vec<f64> = (0..n).map(|i| resp[(i, k)]).collect();
            comps[k].cov = weighted_covariance(y, &col, mass, &mean, structure);
            comps[k].mean = mean;
        }
        normalize_weights(&mut comps);
    }

    // Iteration budget exhausted: evaluate once more so the returned
    // responsibilities and likelihood match the final parameters.
    let prepared = prepare_all(&comps, structure)?;
    let ll = e_step(y, &comps, &prepared, &mut resp, &mut lse);
    if !ll.is_finite() {
        return Err("log-likelihood became non-finite".to_string());
    }
    trace.push(ll);
    Ok(EmOutcome { comps, resp, loglik: ll, trace })
}

/// Fits a `g`-component Gaussian mixture to `y` by EM.
///
/// Runs `config.n_starts` independently seeded restarts and returns the best
/// by log-likelihood, together with the posterior responsibility matrix.
/// Deterministic given `(y, g, structure, seed, config)`.
pub fn fit_gmm(
    y: &DMatrix<f64>,
    g: usize,
    structure: CovarianceStructure,
    seed: u64,
    config: &EmConfig,
) -> Result<(GmmModel, DMatrix<f64>)> {
    let n = y.nrows();
    let d = y.ncols();
    if g == 0 {
        return Err(Error::InvalidConfig("mixture needs g >= 1".into()));
    }
    if d == 0 || n == 0 {
        return Err(Error::EmptyInput("projected data"));
    }
    if n < g {
        return Err(Error::Infeasible(format!(
            "cannot fit {g} components to {n} observations"
        )));
    }
    if config.n_starts == 0 || config.max_iter == 0 || !config.tol.is_finite() || config.tol <= 0.0 {
        return Err(Error::InvalidConfig(
            "EM needs n_starts >= 1, max_iter >= 1 and tol > 0".into(),
        ));
    }

    let mut best: Option<EmOutcome> = None;
    let mut last_err = String::new();
    for start in 0..config.n_starts {
        let start_seed = derive_seed(seed, START_SEED_TAG, start as u64);
        match em_single_start(y, g, structure, start_seed, config) {
            Ok(out) => {
                if best.as_ref().is_none_or(|b| out.loglik > b.loglik) {
                    best = Some(out);
                }
            }
            Err(e) => last_err = e,
        }
    }

    let out = best.ok_or_else(|| {
        Error::FitFailure(format!("all {} restarts degenerated: {last_err}", config.n_starts))
    })?;

    let model = GmmModel {
        weights: out.comps.iter().map(|c| c.weight).collect(),
        means: out.comps.iter().map(|c| c.mean.clone()).collect(),
        covariances: out.comps.iter().map(|c| c.cov.clone()).collect(),
        loglik: out.loglik,
        q_y: free_parameter_count(g, d, structure),
        cov_structure: structure,
    };
    Ok((model, out.resp))
}

/// Maximum-posterior hard assignment; ties go to the smaller cluster index.
pub fn map_partition(responsibilities: &DMatrix<f64>) -> Result<HardPartition> {
    let n = responsibilities.nrows();
    let g = responsibilities.ncols();
    if n == 0 || g == 0 {
        return Err(Error::EmptyInput("responsibility matrix"));
    }
    let labels = (0..n)
        .map(|i| {
            let mut arg = 0usize;
            let mut best = responsibilities[(i, 0)];
            for k in 1..g {
                if responsibilities[(i, k)] > best {
                    best = responsibilities[(i, k)];
                    arg = k;
                }
            }
            arg
        })
        .collect();
    HardPartition::new(labels, g)
}

/// Mixture BIC term: `2 * loglik - q_y * ln(n)`. Larger is better.
pub fn bic_gmm(model: &GmmModel, n: usize) -> f64 {
    2.0 * model.loglik - model.q_y as f64 * (n as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
    }

    /// Closed-form single-Gaussian MLE: column means, scatter / n.
    fn single_gaussian_mle(y: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>, f64) {
        let n = y.nrows();
        let d = y.ncols();
        let mut mean = DVector::zeros(d);
        for i in 0..n {
            for j in 0..d {
                mean[j] += y[(i, j)];
            }
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..n {
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] += (y[(i, a)] - mean[a]) * (y[(i, b)] - mean[b]);
                }
            }
        }
        cov /= n as f64;
        let chol = cov.clone().cholesky().unwrap();
        let logdet: f64 = (0..d).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
        let mut ll = 0.0;
        for i in 0..n {
            let diff = DVector::from_iterator(d, y.row(i).iter().copied()) - &mean;
            let quad = diff.dot(&chol.solve(&diff));
            ll += -0.5 * (d as f64 * LN_2PI + logdet + quad);
        }
        (mean, cov, ll)
    }

    #[test]
    fn single_component_fit_is_the_closed_form_mle() {
        let y = gaussian_matrix(80, 3, 11);
        let (model, resp) = fit_gmm(&y, 1, CovarianceStructure::Full, 0, &EmConfig::default()).unwrap();
        let (mean, cov, ll) = single_gaussian_mle(&y);
        assert!((model.means()[0].clone() - mean).abs().max() < 1e-8);
        assert!((model.covariances()[0].clone() - cov).abs().max() < 1e-8);
        assert!((model.loglik() - ll).abs() < 1e-8 * ll.abs());
        assert!(resp.iter().all(|&r| (r - 1.0).abs() < 1e-12));
        assert_eq!(model.free_parameters(), 3 + 6);
    }

    #[test]
    fn two_separated_blobs_match_the_per_cluster_mle_oracle() {
        // 100 points at -10 and 100 at +10 in one dimension. Both cluster
        // variances are zero, so the fit and the oracle sit exactly on the
        // variance floor.
        let mut vals = vec![-10.0; 100];
        vals.extend(vec![10.0; 100]);
        let y = DMatrix::from_vec(200, 1, vals);
        let (model, resp) =
            fit_gmm(&y, 2, CovarianceStructure::Full, 42, &EmConfig::default()).unwrap();

        for i in 0..200 {
            let own = if y[(i, 0)] < 0.0 {
                // the component whose mean is negative
                (0..2).find(|&k| model.means()[k][0] < 0.0).unwrap()
            } else {
                (0..2).find(|&k| model.means()[k][0] > 0.0).unwrap()
            };
            assert!((resp[(i, own)] - 1.0).abs() < 1e-6);
            assert!(resp[(i, 1 - own)].abs() < 1e-6);
        }

        // Oracle: pi = 1/2, means +-10, variance at the absolute floor, and
        // the off-cluster density underflows to zero.
        let oracle = 200.0 * (0.5f64.ln() - 0.5 * (LN_2PI + ABS_VARIANCE_FLOOR.ln()));
        assert!(
            (model.loglik() - oracle).abs() < 1e-6 * oracle.abs(),
            "loglik {} vs oracle {}",
            model.loglik(),
            oracle
        );
    }

    #[test]
    fn free_parameter_count_matches_the_closed_forms() {
        assert_eq!(free_parameter_count(2, 8, CovarianceStructure::Full), 89);
        assert_eq!(free_parameter_count(3, 4, CovarianceStructure::Full), 2 + 12 + 30);
        assert_eq!(free_parameter_count(3, 4, CovarianceStructure::Diagonal), 2 + 12 + 12);
        assert_eq!(free_parameter_count(3, 4, CovarianceStructure::Spherical), 2 + 12 + 3);
    }

    #[test]
    fn map_partition_takes_the_row_argmax_with_low_index_ties() {
        let resp = DMatrix::from_row_slice(4, 2, &[0.9, 0.1, 0.5, 0.5, 0.2, 0.8, 1.0, 0.0]);
        let part = map_partition(&resp).unwrap();
        assert_eq!(part.labels(), &[0, 0, 1, 0]);
        assert_eq!(part.group_count(), 2);

        let empty = DMatrix::<f64>::zeros(0, 2);
        assert!(matches!(map_partition(&empty), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn bic_matches_direct_arithmetic() {
        let model = GmmModel {
            weights: vec![1.0],
            means: vec![DVector::zeros(1)],
            covariances: vec![DMatrix::identity(1, 1)],
            loglik: -100.0,
            q_y: 10,
            cov_structure: CovarianceStructure::Full,
        };
        let bic = bic_gmm(&model, 100);
        assert!((bic - (-200.0 - 10.0 * 100f64.ln())).abs() < 1e-12);
        assert!((bic + 246.05170185988092).abs() < 1e-9);

        let zero = GmmModel { loglik: 0.0, q_y: 0, ..model.clone() };
        assert_eq!(bic_gmm(&zero, 5), 0.0);

        // Same q_y and data size: higher loglik gives higher BIC.
        let better = GmmModel { loglik: -90.0, ..model.clone() };
        assert!(bic_gmm(&better, 100) > bic_gmm(&model, 100));
    }

    #[test]
    fn loglik_sequence_is_monotone() {
        let mut y = gaussian_matrix(120, 2, 3);
        for i in 60..120 {
            y[(i, 0)] += 4.0;
            y[(i, 1)] -= 3.0;
        }
        for structure in [
            CovarianceStructure::Full,
            CovarianceStructure::Diagonal,
            CovarianceStructure::Spherical,
        ] {
            let out = em_single_start(&y, 2, structure, 9, &EmConfig::default()).unwrap();
            for w in out.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "trace dipped: {w:?}");
            }
        }
    }

    #[test]
    fn loglik_is_invariant_under_component_relabeling() {
        let mut y = gaussian_matrix(90, 2, 5);
        for i in 0..30 {
            y[(i, 0)] += 6.0;
        }
        let (model, _) = fit_gmm(&y, 3, CovarianceStructure::Full, 1, &EmConfig::default()).unwrap();
        let base = model.log_likelihood_of(&y).unwrap();
        assert!((base - model.loglik()).abs() < 1e-9 * base.abs());

        let swapped = GmmModel {
            weights: vec![model.weights[2], model.weights[0], model.weights[1]],
            means: vec![model.means[2].clone(), model.means[0].clone(), model.means[1].clone()],
            covariances: vec![
                model.covariances[2].clone(),
                model.covariances[0].clone(),
                model.covariances[1].clone(),
            ],
            ..model.clone()
        };
        let permuted = swapped.log_likelihood_of(&y).unwrap();
        assert!((base - permuted).abs() < 1e-9 * base.abs());
    }

    #[test]
    fn infeasible_when_fewer_points_than_components() {
        let y = gaussian_matrix(3, 2, 0);
        assert!(matches!(
            fit_gmm(&y, 4, CovarianceStructure::Full, 0, &EmConfig::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn fit_is_deterministic_in_the_seed() {
        let y = gaussian_matrix(60, 3, 21);
        let (a, ra) = fit_gmm(&y, 2, CovarianceStructure::Diagonal, 7, &EmConfig::default()).unwrap();
        let (b, rb) = fit_gmm(&y, 2, CovarianceStructure::Diagonal, 7, &EmConfig::default()).unwrap();
        assert_eq!(a.loglik(), b.loglik());
        assert_eq!(ra, rb);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn responsibilities_rows_sum_to_one(seed in 0u64..500) {
            let y = gaussian_matrix(40, 2, seed);
            let (_, resp) = fit_gmm(&y, 3, CovarianceStructure::Full, seed, &EmConfig::default()).unwrap();
            for i in 0..resp.nrows() {
                let s: f64 = (0..resp.ncols()).map(|k| resp[(i, k)]).sum();
                prop_assert!((s - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn weights_form_a_distribution(seed in 0u64..500) {
            let y = gaussian_matrix(50, 2, seed.wrapping_add(1000));
            let (model, _) = fit_gmm(&y, 2, CovarianceStructure::Spherical, seed, &EmConfig::default()).unwrap();
            let total: f64 = model.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(model.weights().iter().all(|&w| w >= 0.0));
        }
    }
}
