//! Random orthonormal projections and their orthogonal complements.
//!
//! A projection pair holds a `p x d` matrix with orthonormal columns that is
//! uniform over all such matrices (rotation invariant), together with a
//! `p x (p-d)` orthonormal basis of the complementary subspace, so the
//! horizontal concatenation of the two is a `p x p` orthogonal matrix.
//!
//! Sampling draws a `p x d` standard Gaussian matrix and factors it with
//! Householder reflections; forcing the diagonal of the triangular factor
//! positive makes the orthogonal factor unique and uniformly distributed.
//! The complement comes from applying the same `d` reflections to the
//! identity, which costs `O(p^2 d)` instead of a full `p x p` factorization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Element-wise tolerance for the orthonormality checks in [`ProjectionPair::from_parts`].
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// An orthonormal projection basis together with its orthogonal complement.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    basis: DMatrix<f64>,
    complement: DMatrix<f64>,
    seed: u64,
}

impl ProjectionPair {
    /// Builds a pair from explicit matrices, validating orthonormality of
    /// both blocks and their mutual orthogonality at [`ORTHONORMALITY_TOL`].
    ///
    /// Unlike [`generate_haar`], this accepts `d == p` with an empty
    /// complement, which is occasionally useful for isometry checks.
    pub fn from_parts(basis: DMatrix<f64>, complement: DMatrix<f64>, seed: u64) -> Result<Self> {
        let p = basis.nrows();
        let d = basis.ncols();
        if p == 0 || d == 0 || d > p {
            return Err(Error::InvalidProjectionDims { p, d });
        }
        if complement.nrows() != p || complement.ncols() != p - d {
            return Err(Error::ShapeMismatch {
                left_rows: p,
                left_cols: p - d,
                right_rows: complement.nrows(),
                right_cols: complement.ncols(),
            });
        }
        let check = |m: &DMatrix<f64>, what: &str| -> Result<()> {
            let gram = m.transpose() * m;
            let dev = (&gram - DMatrix::identity(gram.nrows(), gram.ncols())).abs().max();
            if m.ncols() > 0 && dev > ORTHONORMALITY_TOL {
                return Err(Error::NotOrthonormal(format!(
                    "{what} deviates from orthonormality by {dev:.3e}"
                )));
            }
            Ok(())
        };
        check(&basis, "basis")?;
        check(&complement, "complement")?;
        if p > d {
            let cross = basis.transpose() * &complement;
            let dev = cross.abs().max();
            if dev > ORTHONORMALITY_TOL {
                return Err(Error::NotOrthonormal(format!(
                    "basis and complement are not orthogonal (max |cross| = {dev:.3e})"
                )));
            }
        }
        Ok(Self { basis, complement, seed })
    }

    /// Ambient dimension `p`.
    pub fn p(&self) -> usize {
        self.basis.nrows()
    }

    /// Projection dimension `d`.
    pub fn d(&self) -> usize {
        self.basis.ncols()
    }

    /// Seed the pair was generated from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The `p x d` orthonormal projection basis.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// The `p x (p-d)` orthonormal basis of the complementary subspace.
    pub fn complement(&self) -> &DMatrix<f64> {
        &self.complement
    }
}

/// One Householder reflector `H = I - beta v v^T`, with `v` zero above `start`.
struct Reflector {
    v: DVector<f64>,
    beta: f64,
    start: usize,
}

/// Draws a uniformly distributed orthonormal `p x d` basis and its
/// complement, deterministically from `seed`.
///
/// Returns an error unless `1 <= d < p`.
pub fn generate_haar(p: usize, d: usize, seed: u64) -> Result<ProjectionPair> {
    if p == 0 || d == 0 || d >= p {
        return Err(Error::InvalidProjectionDims { p, d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = DMatrix::<f64>::from_fn(p, d, |_, _| rng.sample(StandardNormal));

    let mut reflectors: Vec<Reflector> = Vec::with_capacity(d);
    let mut diag_signs = Vec::with_capacity(d);

    for j in 0..d {
        let norm = (j..p).map(|i| work[(i, j)] * work[(i, j)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Zero column (measure zero for Gaussian input): identity reflector.
            reflectors.push(Reflector { v: DVector::zeros(p), beta: 0.0, start: j });
            diag_signs.push(1.0);
            continue;
        }
        let sign = if work[(j, j)] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = DVector::<f64>::zeros(p);
        for i in j..p {
            v[i] = work[(i, j)];
        }
        v[j] += sign * norm;
        let vtv: f64 = (j..p).map(|i| v[i] * v[i]).sum();
        let beta = 2.0 / vtv;
        // Apply H to the remaining columns of the working matrix.
        for c in j..d {
            let w: f64 = (j..p).map(|i| v[i] * work[(i, c)]).sum();
            let bw = beta * w;
            for i in j..p {
                work[(i, c)] -= bw * v[i];
            }
        }
        // After reflection the pivot entry equals -sign * norm.
        diag_signs.push(-sign);
        reflectors.push(Reflector { v, beta, start: j });
    }

    // Accumulate the full orthogonal factor by applying the reflectors to the
    // identity in reverse order. A reflector starting at row j only touches
    // columns >= j at that point, so updates stay in the trailing block.
    let mut q = DMatrix::<f64>::identity(p, p);
    for r in reflectors.iter().rev() {
        if r.beta == 0.0 {
            continue;
        }
        let j = r.start;
        for c in j..p {
            let w: f64 = (j..p).map(|i| r.v[i] * q[(i, c)]).sum();
            let bw = r.beta * w;
            for i in j..p {
                q[(i, c)] -= bw * r.v[i];
            }
        }
    }

    // Flip columns whose triangular-factor diagonal came out negative.
    for (j, &s) in diag_signs.iter().enumerate() {
        if s < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }

    let basis = q.columns(0, d).into_owned();
    let complement = q.columns(d, p - d).into_owned();
    Ok(ProjectionPair { basis, complement, seed })
}

/// Projects the rows of `x` onto the pair's basis and complement.
///
/// Returns `(x * basis, x * complement)`.
pub fn project(x: &DMatrix<f64>, pair: &ProjectionPair) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if x.ncols() != pair.p() {
        return Err(Error::ColumnMismatch { expected: pair.p(), actual: x.ncols() });
    }
    Ok((x * pair.basis(), x * pair.complement()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_abs_dev_from_identity(m: &DMatrix<f64>) -> f64 {
        (m - DMatrix::identity(m.nrows(), m.ncols())).abs().max()
    }

    fn check_invariants(pair: &ProjectionPair) {
        let a = pair.basis();
        let c = pair.complement();
        assert!(max_abs_dev_from_identity(&(a.transpose() * a)) < 1e-10);
        assert!(max_abs_dev_from_identity(&(c.transpose() * c)) < 1e-10);
        assert!((a.transpose() * c).abs().max() < 1e-10);
        let mut full = DMatrix::zeros(pair.p(), pair.p());
        full.columns_mut(0, pair.d()).copy_from(a);
        full.columns_mut(pair.d(), pair.p() - pair.d()).copy_from(c);
        assert!(max_abs_dev_from_identity(&(full.transpose() * &full)) < 1e-10);
    }

    #[test]
    fn orthogonality_invariants_hold() {
        for (p, d, seed) in [(5, 2, 0u64), (10, 3, 1), (37, 11, 2), (80, 17, 99)] {
            let pair = generate_haar(p, d, seed).unwrap();
            assert_eq!(pair.p(), p);
            assert_eq!(pair.d(), d);
            check_invariants(&pair);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            generate_haar(5, 5, 0),
            Err(Error::InvalidProjectionDims { p: 5, d: 5 })
        ));
        assert!(generate_haar(5, 6, 0).is_err());
        assert!(generate_haar(0, 0, 0).is_err());
        assert!(generate_haar(3, 0, 0).is_err());
    }

    #[test]
    fn deterministic_for_equal_seeds() {
        let a = generate_haar(12, 4, 777).unwrap();
        let b = generate_haar(12, 4, 777).unwrap();
        assert_eq!(a.basis(), b.basis());
        assert_eq!(a.complement(), b.complement());
        let c = generate_haar(12, 4, 778).unwrap();
        assert_ne!(a.basis(), c.basis());
    }

    #[test]
    fn complement_in_two_dimensions_is_the_rotated_basis() {
        // For p=2, d=1 the complement is the unique unit vector orthogonal to
        // the basis, up to sign.
        for seed in 0..10u64 {
            let pair = generate_haar(2, 1, seed).unwrap();
            let a = pair.basis();
            let c = pair.complement();
            let expected = [-a[(1, 0)], a[(0, 0)]];
            let same = (c[(0, 0)] - expected[0]).abs() < 1e-12
                && (c[(1, 0)] - expected[1]).abs() < 1e-12;
            let flipped = (c[(0, 0)] + expected[0]).abs() < 1e-12
                && (c[(1, 0)] + expected[1]).abs() < 1e-12;
            assert!(same || flipped);
        }
    }

    #[test]
    fn basis_entries_have_uniform_second_moment() {
        // Column entries of a uniformly random orthonormal basis have second
        // moment 1/p; a 10^4-draw Monte Carlo average must land within 0.005.
        let (p, d) = (10, 3);
        let draws = 10_000u64;
        let mut sum_sq = 0.0;
        for seed in 0..draws {
            let pair = generate_haar(p, d, seed).unwrap();
            sum_sq += pair.basis().iter().map(|v| v * v).sum::<f64>();
        }
        let mean_sq = sum_sq / (draws as f64 * (p * d) as f64);
        assert!(
            (mean_sq - 1.0 / p as f64).abs() < 0.005,
            "mean squared entry {mean_sq} too far from {}",
            1.0 / p as f64
        );
    }

    #[test]
    fn projecting_identity_recovers_the_pair() {
        let pair = generate_haar(9, 4, 3).unwrap();
        let eye = DMatrix::<f64>::identity(9, 9);
        let (y, y_comp) = project(&eye, &pair).unwrap();
        assert_eq!(&y, pair.basis());
        assert_eq!(&y_comp, pair.complement());
    }

    #[test]
    fn coordinate_selector_basis_picks_leading_columns() {
        let (p, d) = (6, 2);
        let eye = DMatrix::<f64>::identity(p, p);
        let basis = eye.columns(0, d).into_owned();
        let complement = eye.columns(d, p - d).into_owned();
        let pair = ProjectionPair::from_parts(basis, complement, 0).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::<f64>::from_fn(8, p, |_, _| rng.sample(StandardNormal));
        let (y, _) = project(&x, &pair).unwrap();
        assert_eq!(y, x.columns(0, d).into_owned());
    }

    #[test]
    fn project_rejects_width_mismatch() {
        let pair = generate_haar(7, 2, 0).unwrap();
        let x = DMatrix::<f64>::zeros(3, 6);
        match project(&x, &pair) {
            Err(Error::ColumnMismatch { expected: 7, actual: 6 }) => {}
            other => panic!("expected column mismatch, got {other:?}"),
        }
    }

    #[test]
    fn from_parts_rejects_non_orthonormal_input() {
        let basis = DMatrix::<f64>::from_row_slice(2, 1, &[1.0, 1.0]);
        let complement = DMatrix::<f64>::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(
            ProjectionPair::from_parts(basis, complement, 0),
            Err(Error::NotOrthonormal(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        // Row norms split exactly across the basis and its complement.
        #[test]
        fn norm_decomposition(seed in 0u64..1000, n in 1usize..24) {
            let pair = generate_haar(10, 4, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            let x = DMatrix::<f64>::from_fn(n, 10, |_, _| rng.sample(StandardNormal));
            let (y, y_comp) = project(&x, &pair).unwrap();
            for i in 0..n {
                let orig = x.row(i).norm_squared();
                let split = y.row(i).norm_squared() + y_comp.row(i).norm_squared();
                prop_assert!((orig - split).abs() < 1e-8 * orig.max(1.0));
            }
        }
    }
}
