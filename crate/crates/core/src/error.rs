use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid problem definition: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("decision vector carries no trajectory layout")]
    MissingLayout,

    /// A function probe produced NaN or an infinity.
    #[error("non-finite value while evaluating {what} (coordinate {coordinate:?})")]
    NonFinite {
        what: &'static str,
        coordinate: Option<usize>,
    },

    #[error("variable {index} = {value} is outside the open bound interval ({lower}, {upper})")]
    BarrierDomain {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("step rejected {retries} times for leaving the barrier domain")]
    StepRejected { retries: usize },

    #[error("unknown {kind} `{name}` (valid: {valid})")]
    UnknownName {
        kind: &'static str,
        name: String,
        valid: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
