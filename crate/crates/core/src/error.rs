use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::problem::Side;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expression `{field}`: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("evaluating {what} at t={t}, x={x}: {source}")]
    Eval {
        what: &'static str,
        t: f64,
        x: f64,
        #[source]
        source: EvalError,
    },
    #[error("hypothesis violated: {what} at t={t}, x={x} (value {value})")]
    Hypothesis {
        what: &'static str,
        t: f64,
        x: f64,
        value: f64,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unknown catalog problem `{0}`")]
    UnknownCatalog(String),
    #[error("propagation speed c={c} is not positive at t={t}, x={x}")]
    NonPositiveSpeed { t: f64, x: f64, c: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("degenerate dissipative boundary at {side}: beta={beta} equals 1/c={inv_c} at t={t}")]
    Degenerate {
        side: Side,
        t: f64,
        beta: f64,
        inv_c: f64,
    },
    #[error("CFL violation: Courant number {courant} at t={t}, x={x}")]
    Cfl { courant: f64, t: f64, x: f64 },
    #[error("determinate domain emptied at x={x} before reaching the far boundary")]
    MaskEmptied { x: f64 },
    #[error("state requested at t={t}, x={x} lies outside the field mask")]
    OutsideMask { t: f64, x: f64 },
    #[error("time {t} outside the window [{start}, {end}]")]
    OutsideWindow { t: f64, start: f64, end: f64 },
    #[error(
        "determinate domains do not intersect: time condition fails ({integral} is not > {threshold})"
    )]
    TimeCondition { integral: f64, threshold: f64 },
    #[error("determinate domains do not intersect: {0}")]
    NoIntersection(String),
    #[error("unobservable datum: numerator {numerator} with zero observation norm")]
    Unobservable { numerator: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
}

impl Error {
    /// Module that raised the error, for diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Parse { .. } | Error::Eval { .. } => "expr",
            Error::Hypothesis { .. } | Error::Invalid(_) | Error::UnknownCatalog(_) => "problem",
            Error::NonPositiveSpeed { .. } | Error::NoConvergence { .. } | Error::Degenerate { .. } => {
                "charsys"
            }
            Error::Cfl { .. } | Error::MaskEmptied { .. } | Error::OutsideWindow { .. } => "hypersolve",
            Error::OutsideMask { .. } | Error::WindowMismatch(_) => "domains",
            Error::TimeCondition { .. } | Error::NoIntersection(_) => "reconstruct",
            Error::Unobservable { .. } | Error::TooFewSamples { .. } => "observe",
        }
    }

    /// True for both the integral time-condition failure and the geometric
    /// non-intersection found while building the domains.
    pub fn is_non_intersection(&self) -> bool {
        matches!(self, Error::TimeCondition { .. } | Error::NoIntersection(_))
    }

    /// Input/validation failures, as opposed to failures inside a pipeline.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Hypothesis { .. }
                | Error::Invalid(_)
                | Error::UnknownCatalog(_)
                | Error::WindowMismatch(_)
        )
    }
}
