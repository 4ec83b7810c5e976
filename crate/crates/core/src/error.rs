use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The NOMA ordering constraint `P_k > rhat0 * sum_{m>k} P_m` failed.
    /// `slot` is zero-based.
    #[error("power ordering constraint violated at slot {slot}: denominator {denominator:e}")]
    ConstraintViolation { slot: usize, denominator: f64 },

    #[error("solver did not converge for event {event} after {iterations} Newton steps")]
    NonConvergence {
        event: usize,
        iterations: usize,
        best: Vec<f64>,
    },

    #[error("budget exhausted by alpha-pinned users at alpha = {alpha:e} (pinned power {pinned:e} >= budget {budget:e})")]
    BudgetExhausted {
        alpha: f64,
        pinned: f64,
        budget: f64,
    },
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
