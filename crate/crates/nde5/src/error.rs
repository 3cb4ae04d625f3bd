use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("query t = {t} outside trajectory span [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },
    #[error("both bracket endpoints classify as {0}")]
    SameClassAtBracket(String),
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("singular Jacobian at row {0}")]
    SingularJacobian(usize),
    #[error("least-squares fit diverged: {0}")]
    FitDiverged(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("tail extension cannot cover the window: {0}")]
    InsufficientTail(String),
    #[error("no oscillation found: {0}")]
    NoOscillation(String),
    #[error("branch seed collapsed onto branch {0}")]
    BranchCollapse(usize),
    #[error("integration failed: {0}")]
    IntegrationFailed(String),
    #[error("gradient blow-up detected at t = {0}")]
    BlowupDetected(f64),
    #[error("spectral tail rose to {fraction:e} at t = {t}")]
    SpectralTailRise { t: f64, fraction: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
