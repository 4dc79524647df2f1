use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    /// A parameter or configuration value failed validation. `field` names the offending key.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A quadrature or interpolation point left the classified region of the grid.
    #[error("stencil escapes the classified grid at {point:?}")]
    StencilEscape { point: Vec<f64> },

    #[error("iteration decreased at node {node} by {drop:e}")]
    MonotonicityViolation { node: usize, drop: f64 },

    #[error("no convergence after {iterations} sweeps (last increment {increment:e})")]
    NoConvergence { iterations: usize, increment: f64 },

    #[error("input is not a subsolution: min residual {min_residual:e}")]
    NotSubsolution { min_residual: f64 },

    #[error("rejection sampler exhausted {0} attempts")]
    SamplerExhausted(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl LabError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Invalid { .. }
            | LabError::Dimension { .. }
            | LabError::UnknownScenario(_)
            | LabError::Toml(_)
            | LabError::Unsupported(_) => 2,
            LabError::NoConvergence { .. } | LabError::MonotonicityViolation { .. } => 3,
            _ => 1,
        }
    }
}
