use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty conditioning event: ({lo}, {hi}) does not meet the support [{support_lo}, {support_hi}]")]
    EmptyConditioningEvent {
        lo: f64,
        hi: f64,
        support_lo: f64,
        support_hi: f64,
    },

    #[error("scenario has no consumers")]
    EmptyScenario,

    #[error("consumer index {index} out of range for a population of {len}")]
    InvalidIndex { index: usize, len: usize },

    #[error("scenario has no announced price")]
    MissingPrice,

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("type {value} lies outside the support [{lo}, {hi}]")]
    OutsideSupport { value: f64, lo: f64, hi: f64 },

    #[error("no finite agreement type: receiver response has unit slope")]
    NoAgreementType,

    #[error("closed form requires uniform prior")]
    NonUniformPrior,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("degenerate benchmark gap: full-communication welfare {u_fc} does not exceed no-communication welfare {u_nc}")]
    DegenerateBenchmarkGap { u_fc: f64, u_nc: f64 },

    #[error("recovered welfare {0}% is outside the admissible range [-0.1, 100.1]")]
    InconsistentRecoveredWelfare(f64),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
