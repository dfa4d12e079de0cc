use thiserror::Error;

/// Errors raised by problem construction, optimization and certification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("{0} Lipschitz estimation is not available for problem `{1}`")]
    UnsupportedMode(&'static str, String),

    #[error("step size {alpha} exceeds the admissible bound {bound} ({which})")]
    StepSizeTooLarge {
        alpha: f64,
        bound: f64,
        which: &'static str,
    },

    #[error("iteration diverged at k = {iteration}: non-finite value encountered")]
    Diverged { iteration: usize },

    #[error("point is not critical: gradient norm {grad_norm:e} exceeds tolerance {tol:e}")]
    NotCritical { grad_norm: f64, tol: f64 },

    #[error("saddle analysis requires a nonzero momentum parameter beta in (-1, 1)")]
    ZeroMomentum,

    #[error("fit refused: {0}")]
    FitRefused(String),

    #[error("desingularizer must be increasing and vanish at zero: {0}")]
    InvalidDesingularizer(String),

    #[error("flow integration failed: {0}")]
    Integration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected,
            found,
        })
    }
}
