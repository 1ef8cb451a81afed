use std::fmt;

/// Everything that can go wrong inside the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("order n = {0} is out of range (supported: 1..={max})", max = crate::surface::MAX_ORDER)]
    OrderOutOfRange(usize),

    #[error("non-finite value from {what} at state {state}")]
    NonFinite {
        what: &'static str,
        state: StateDump,
    },

    #[error("assumption {assumption} violated at t = {t}: {detail}")]
    AssumptionViolated {
        assumption: Assumption,
        t: f64,
        detail: String,
    },

    #[error("simulation diverged at t = {t} (state {state})")]
    Divergence { t: f64, state: StateDump },

    #[error("tail window is empty (window starts at t = {start}, run ends at t = {t_end}); increase t_end")]
    EmptyTail { start: f64, t_end: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: `{field}`: {msg}")]
    Config {
        line: usize,
        field: String,
        msg: String,
    },

    #[error("missing required key `{0}`")]
    MissingField(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Which plant-class assumption a scenario broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// |f̂(x) − f(x)| ≤ F(x)
    ModelBound,
    /// b_min ≤ b(x) ≤ b_max
    GainBound,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::ModelBound => f.write_str("1 (|f_hat - f| <= F)"),
            Assumption::GainBound => f.write_str("2 (b_min <= b <= b_max)"),
        }
    }
}

/// A state vector captured for error messages.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDump(pub Vec<f64>);

impl fmt::Display for StateDump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be a finite value > 0, got {value}"),
        })
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
