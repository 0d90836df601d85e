use thiserror::Error;

/// Errors surfaced by the simulation and estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Process model violates an invariant (non-positive sigma, non-finite field).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Requested grid cannot be represented (index overflow).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Sampling grid or subsampling request is malformed.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Contamination kernel parameters out of range.
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// Operation is not defined for this kernel variant.
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    /// Bad input data (negative price, empty series, mismatched lengths).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Index list for a grid quadratic variation is unsorted or out of range.
    #[error("invalid indices: {0}")]
    InvalidIndices(String),

    /// Subgrid count K outside [1, n].
    #[error("invalid subgrid count K={k}: must satisfy 1 <= K <= n = {n}")]
    InvalidK { k: usize, n: usize },

    /// Experiment configuration violates an invariant. The message names the field.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
