//! Error type shared by all modules of the crate.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building or running an ensemble.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Projection dimensions must satisfy `1 <= d < p`.
    #[error("invalid projection dimensions: need 1 <= d < p, got p={p}, d={d}")]
    InvalidProjectionDims { p: usize, d: usize },

    /// A user-supplied matrix fails the orthonormality checks.
    #[error("matrix is not orthonormal: {0}")]
    NotOrthonormal(String),

    /// Data width does not match the projection it is used with.
    #[error("data has {actual} columns, expected {expected}")]
    ColumnMismatch { expected: usize, actual: usize },

    /// Two matrices that must share a shape do not.
    #[error("shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    /// Two label vectors that must share a length do not.
    #[error("partitions have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// An operation received an empty collection it cannot work with.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// The problem size makes the requested fit impossible.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// EM could not produce a usable mixture after all restarts.
    #[error("mixture fit failed: {0}")]
    FitFailure(String),

    /// A full residual covariance cannot be estimated from this sample size.
    #[error(
        "full residual covariance needs n > p - d (n={n}, p-d={residual_dim}); \
         use the diagonal structure"
    )]
    StructureInfeasible { n: usize, residual_dim: usize },

    /// A projection score came out non-finite and the projection is skipped.
    #[error("non-finite projection score (bic_gmm={bic_gmm}, bic_reg={bic_reg})")]
    NonFiniteScore { bic_gmm: f64, bic_reg: f64 },

    /// Fewer projections scored successfully than the ensemble needs.
    #[error("only {scored} of the {required} required projections scored successfully")]
    PartialEnsemble { scored: usize, required: usize },

    /// A configuration value is out of its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
