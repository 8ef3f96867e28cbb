use thiserror::Error;

/// Errors raised by the solvers and the experiment drivers.
#[derive(Debug, Error)]
pub enum NelsonError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no bound state: e = {e:.6e} (needs e < -{e_tol:.1e})")]
    NoBoundState { e: f64, e_tol: f64 },

    #[error("spectral gap {gap:.6e} below floor {floor:.1e}")]
    GapTooSmall { gap: f64, floor: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        solver: String,
        iterations: usize,
        residual: f64,
    },

    #[error("picard iteration failed to contract; residual history {history:?}")]
    NoContraction { history: Vec<f64> },

    #[error("step too large: {requested:.3e} > admissible {bound:.3e}")]
    StepTooLarge { requested: f64, bound: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("solver stopped: {0}")]
    Stopped(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NelsonError>;
