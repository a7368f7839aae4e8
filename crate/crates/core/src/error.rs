use thiserror::Error;

/// Errors raised across the pipeline.
///
/// Variants are grouped by how the command line reports them: input and
/// configuration problems exit with code 2, numerical failures with code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid beam law: {0}")]
    InvalidLaw(String),

    #[error("residual heat factor is not normalized; compute the reference value first")]
    Unnormalized,

    #[error("temperature diverged at step {step}: {max_temperature:.3e} K exceeds cap")]
    Divergence { step: u64, max_temperature: f64 },

    #[error("pressure projection did not converge at step {step} (residual {residual:.3e})")]
    FluidDivergence { step: u64, residual: f64 },

    #[error("separated fit did not converge in {sweeps} sweeps (relative residual {residual:.3e})")]
    FitFailure { sweeps: usize, residual: f64 },

    #[error("log target returned NaN at chain step {step}")]
    ChainAbort { step: usize },

    #[error("degenerate sampling model: {0}")]
    DegenerateModel(String),

    #[error("surrogate range coverage: {fraction:.2}% of evaluations extrapolated")]
    RangeCoverage { fraction: f64 },

    #[error("non-finite training loss at epoch {epoch}")]
    TrainingAbort { epoch: usize },

    #[error("plant diverged at control step {step}: {source}")]
    PlantDivergence {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad input or configuration rather than
    /// by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InvalidLaw(_)
                | Error::Config(_)
                | Error::Json(_)
                | Error::Io(_)
                | Error::InsufficientData { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite, got {value}")))
    }
}
