use thiserror::Error;

/// Errors raised by model construction, kernel evaluation and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("tolerance {requested:e} unreachable with at most {cap} modes; best certified bound is {achievable:e}")]
    ToleranceUnreachable { requested: f64, achievable: f64, cap: usize },

    #[error("insufficient x resolution: {nodes} quadrature nodes with max gap {max_gap:e} cannot resolve {modes} modes (need max gap <= {required_gap:e})")]
    InsufficientResolution { nodes: usize, modes: usize, max_gap: f64, required_gap: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("compatibility condition violated: {0}")]
    Compatibility(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("iteration did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence { iterations: usize, last_residual: f64, history: Vec<f64> },

    #[error("unstable time step: dt = {dt:e} exceeds stability bound {bound:e}")]
    Unstable { dt: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
