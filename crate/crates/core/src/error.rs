use thiserror::Error;

/// Errors surfaced by the orey toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside the documented domain (bad parameter ranges, points off the grid).
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity that must be (near-)nonnegative came out negative beyond tolerance.
    #[error("numerical consistency error: {0}")]
    NumericalConsistency(String),

    /// Operation requires Orey metadata (gamma, kappa) that the model does not carry.
    #[error("missing Orey metadata: {0}")]
    MissingMetadata(String),

    /// Cholesky factorization failed even after jitter escalation.
    #[error("simulation error: factorization failed at pivot {pivot} after jitter escalation (pivot value {value:e})")]
    Factorization { pivot: usize, value: f64 },

    /// Circulant embedding produced a significantly negative eigenvalue.
    #[error(
        "embedding error: eigenvalue {min_eigenvalue:e} below -1e-9 of maximum {max_eigenvalue:e}"
    )]
    Embedding {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    /// Malformed path file.
    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    /// Degenerate input such as a path with vanishing quadratic variation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Requested series tolerance needs more terms than the truncation cap allows.
    #[error("truncation error: requested tolerance needs J = {required} terms, cap is {cap}")]
    Truncation { required: u64, cap: u64 },

    /// Confidence interval refused because the point estimate left the valid range.
    #[error("sigma evaluation refused: gamma_hat = {gamma_hat} outside (0.01, 0.99), confidence interval omitted")]
    CiRefused { gamma_hat: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
