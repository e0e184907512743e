use thiserror::Error;

/// Errors raised by the solvers, learners and model evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MfcgError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} index {index} out of range (size {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("model contract violated at (x={x}, a={a}): {detail}")]
    ModelContract { x: usize, a: usize, detail: String },

    #[error(
        "{solver} did not converge within {iterations} iterations (last residual {residual:e})"
    )]
    IterationLimit {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("degenerate action gap at extraction (delta = {delta:e}): {detail}")]
    DegenerateGap { delta: f64, detail: String },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("invalid model spec at `{field}`: {detail}")]
    InvalidSpec { field: String, detail: String },

    #[error("invalid rate exponents: {0}")]
    InvalidExponents(String),

    #[error("trace sink failed: {0}")]
    Sink(String),
}

pub type Result<T> = std::result::Result<T, MfcgError>;

impl MfcgError {
    /// True for the iteration-limit family of errors (solver non-convergence).
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, MfcgError::IterationLimit { .. })
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, bound: usize) -> Result<()> {
    if index < bound {
        Ok(())
    } else {
        Err(MfcgError::IndexOutOfRange { what, index, bound })
    }
}
