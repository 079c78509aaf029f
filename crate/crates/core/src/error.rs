use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("inconclusive classification: {reason} (trace of f'/f: {trace:?})")]
    InconclusiveClassification { reason: String, trace: Vec<f64> },

    #[error("inconclusive quantization: tail masses are not monotone {masses:?}")]
    InconclusiveQuantization { masses: Vec<f64> },

    #[error("tolerance failure in {what}: achieved estimate {estimate:e}")]
    Tolerance { what: String, estimate: f64 },

    #[error("grid reaches radius {reached} but {needed} is required")]
    Coverage { needed: f64, reached: f64 },

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("domain radius too large: {0}")]
    RhoTooLarge(String),
}

impl LabError {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LabError::Tolerance { .. }
                | LabError::InconclusiveClassification { .. }
                | LabError::InconclusiveQuantization { .. }
                | LabError::Coverage { .. }
        )
    }
}
