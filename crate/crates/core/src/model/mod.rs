//! Scalar parameters, the response-function triple and the numerical
//! checks that feed the stability conditions.

mod params;
mod response;

pub use params::{ImpulseParams, Regime, REGIME_K_MAX, REGIME_TOL};
pub use response::{
    derivatives_at_zero, estimate_sup_ratios, validate_hypotheses, Derivatives, HypothesisCheck,
    HypothesisReport, ResponseFn, ResponseModel, SupEstimates, DEFAULT_X_MAX,
};

use thiserror::Error;

use crate::expr::EvalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("grid needs at least 100 points, got {0}")]
    GridTooSmall(usize),
    #[error("{function}: evaluation failed at x = {x}: {source}")]
    Eval {
        function: &'static str,
        x: f64,
        source: EvalError,
    },
    #[error("{function}: non-finite value near x = 0")]
    NonFiniteNearZero { function: &'static str },
    #[error("boundedness hypothesis violated: {ratio} grows without bound near x = {x}")]
    Unbounded { ratio: &'static str, x: f64 },
}
