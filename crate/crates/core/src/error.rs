use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("selector entry {index} is {value}, expected 0 or 1")]
    InvalidSelector { index: usize, value: f64 },

    #[error("selectors are not complementary")]
    NonComplementarySelectors,

    #[error("numerical divergence at step {step} (t = {t:.6} s): {detail}")]
    Divergence { step: u64, t: f64, detail: String },

    #[error("sweep value {value} diverged: {source}")]
    SweepDivergence {
        value: f64,
        #[source]
        source: Box<SimError>,
    },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("bracket is invalid: {0}")]
    InvalidBracket(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
}

impl SimError {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        SimError::InvalidParam {
            field,
            reason: reason.into(),
        }
    }

    /// True for any error that stems from a run blowing up numerically.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            SimError::Divergence { .. } | SimError::SweepDivergence { .. }
        )
    }
}
