use thiserror::Error;

/// Errors shared by all numerical modules.
#[derive(Debug, Error)]
pub enum FracError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("fractional order out of supported range (0,1]: {0}")]
    UnsupportedOrder(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge within {terms} terms")]
    Convergence { terms: usize },

    #[error("grid too coarse: need at least {needed} nodes, got {got}")]
    GridTooCoarse { needed: usize, got: usize },

    #[error("Picard iteration did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Picard iteration did not converge on column {column} (last residual {residual:.3e})")]
    ColumnNonConvergence { column: usize, residual: f64 },

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("iterate left the domain at t = {time}")]
    DomainExit { time: f64 },
}

pub type Result<T> = std::result::Result<T, FracError>;
