//! Impulsive predator-prey model for crop protection: periodic harvesting
//! of pests and natural enemies combined with periodic release of natural
//! enemies.
//!
//! The pest density `x` and natural-enemy density `y` follow
//! `x' = f(x) - g(x) y`, `y' = h(x) y - d y` between impulses. Harvests
//! remove fractions `alpha_x`, `alpha_y` every `T_h`; releases add `mu T_r`
//! natural enemies every `T_r`.

pub mod expr;
pub mod model;
pub mod periodic;
pub mod quad;
pub mod sim;
pub mod stability;

pub use expr::{parse, EvalError, Expr, ParseError};
pub use model::{
    ImpulseParams, ModelError, Regime, ResponseFn, ResponseModel, SupEstimates,
};
pub use periodic::{PeriodicError, PeriodicSolution};
pub use sim::{simulate, simulate_with, EventKind, SimError, SimOptions, State, Trace};
pub use stability::{
    budget_curve, classify, mu_lower, mu_lower_h, mu_lower_r, Classification, PeriodRatio,
    StabilityError, StabilityReport, Threshold,
};
