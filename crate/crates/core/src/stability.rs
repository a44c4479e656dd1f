//! Minimal release budgets and stability classification of the pest-free
//! periodic solution.
//!
//! For growth-to-predation ratio `S` and attack slope `r` the budget
//! thresholds share the numerator `d (S + ln(1 - alpha_x) / (r T_h))`.
//! Evaluated at the slopes at zero they give the local threshold (pest
//! multiplier `|B11| = 1`); at the suprema over the domain they give the
//! sufficient global one.

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    derivatives_at_zero, estimate_sup_ratios, validate_hypotheses, ImpulseParams, ModelError,
    Regime, ResponseModel, SupEstimates,
};
use crate::periodic::{
    harvest_loss, integral_y_ph, integral_y_pr, release_spacing_factor, PeriodicError,
    PeriodicSolution,
};
use crate::sim::{simulate_with, SimError, SimOptions, State};

/// Grid size used by `classify` for hypothesis checks and suprema.
pub const CLASSIFY_GRID: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("no stability formula for incommensurate periods; simulate instead")]
    Incommensurate,
    #[error("operation requires the {expected} regime, parameters are {actual:?}")]
    WrongRegime { expected: &'static str, actual: Regime },
    #[error("attack slope r must be > 0, got {0}")]
    NonPositiveSlope(f64),
    #[error("sigma({k}) = {value:e} exceeds 1e12 (d T_h too small)")]
    SigmaOverflow { k: u32, value: f64 },
    #[error("no sign change in bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("monotonicity claim vacuous: harvesting alone removes the pests")]
    Vacuous,
    #[error("ratio {0} is neither an integer nor the reciprocal of one")]
    BadRatio(f64),
    #[error("response model fails hypotheses: {0}")]
    Hypotheses(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Periodic(#[from] PeriodicError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A budget threshold; `trivial` means harvesting alone suffices and the
/// threshold is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub mu: f64,
    pub trivial: bool,
}

impl Threshold {
    const TRIVIAL: Threshold = Threshold { mu: 0.0, trivial: true };
}

/// `S + ln(1 - alpha_x) / (r T_h)`, or `None` when it is not positive
/// (including `alpha_x = 1`). Values within roundoff of 0 count as 0.
fn control_margin(s: f64, r: f64, params: &ImpulseParams) -> Result<Option<f64>, StabilityError> {
    if !(r > 0.0) {
        return Err(StabilityError::NonPositiveSlope(r));
    }
    if params.alpha_x >= 1.0 {
        return Ok(None);
    }
    let margin = s + (1.0 - params.alpha_x).ln() / (r * params.t_h);
    Ok((margin > 1e-12 * s.abs().max(1.0)).then_some(margin))
}

/// `e^{-d T_h / k} / (k (1 - e^{-d T_h / k}))`.
pub fn sigma(k: u32, d: f64, t_h: f64) -> Result<f64, StabilityError> {
    let value = release_spacing_factor(k, d, t_h);
    if !(value.is_finite() && value <= 1e12) {
        return Err(StabilityError::SigmaOverflow { k, value });
    }
    Ok(value)
}

/// Minimal budget when `T_h = k T_r`.
pub fn mu_lower_h(s: f64, r: f64, params: &ImpulseParams) -> Result<Threshold, StabilityError> {
    let k = match params.regime() {
        Regime::HarvestMultiple(k) => k,
        actual => return Err(StabilityError::WrongRegime { expected: "harvest-multiple", actual }),
    };
    let Some(margin) = control_margin(s, r, params)? else {
        return Ok(Threshold::TRIVIAL);
    };
    let loss = harvest_loss(params) * sigma(k, params.d, params.t_h)?;
    Ok(Threshold { mu: params.d * margin / (1.0 - loss), trivial: false })
}

/// Minimal budget when `T_r = k T_h`; independent of `T_r`.
pub fn mu_lower_r(s: f64, r: f64, params: &ImpulseParams) -> Result<Threshold, StabilityError> {
    if let actual @ (Regime::HarvestMultiple(_) | Regime::Incommensurate) = params.regime() {
        return Err(StabilityError::WrongRegime { expected: "release-multiple", actual });
    }
    let Some(margin) = control_margin(s, r, params)? else {
        return Ok(Threshold::TRIVIAL);
    };
    Ok(Threshold { mu: release_budget(margin, params), trivial: false })
}

fn release_budget(margin: f64, params: &ImpulseParams) -> f64 {
    let e = (-params.d * params.t_h).exp();
    params.d * margin * (1.0 - (1.0 - params.alpha_y) * e) / (1.0 - e)
}

/// Regime-dispatching threshold.
pub fn mu_lower(s: f64, r: f64, params: &ImpulseParams) -> Result<Threshold, StabilityError> {
    match params.regime() {
        Regime::HarvestMultiple(_) => mu_lower_h(s, r, params),
        Regime::ReleaseMultiple(_) => mu_lower_r(s, r, params),
        Regime::Incommensurate => Err(StabilityError::Incommensurate),
    }
}

/// Pest-direction multiplier of the linearized period map, from given
/// slopes at zero.
pub fn b11_from_slopes(fp0: f64, gp0: f64, params: &ImpulseParams) -> Result<f64, StabilityError> {
    let keep = 1.0 - params.alpha_x;
    match params.regime() {
        Regime::HarvestMultiple(_) => {
            let integral = integral_y_ph(params)?;
            Ok(keep * (fp0 * params.t_h - gp0 * integral).exp())
        }
        Regime::ReleaseMultiple(k) => {
            let integral = integral_y_pr(params)?;
            Ok(keep.powi(k as i32) * (fp0 * params.t_r - gp0 * integral).exp())
        }
        Regime::Incommensurate => Err(StabilityError::Incommensurate),
    }
}

pub fn b11(model: &ResponseModel, params: &ImpulseParams) -> Result<f64, StabilityError> {
    let der = derivatives_at_zero(model)?;
    b11_from_slopes(der.fp0, der.gp0, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    TriviallyStable,
    GloballyStable,
    LocallyStableOnly,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub regime: Regime,
    pub mu: f64,
    pub s_local: f64,
    pub r_local: f64,
    pub s_global: f64,
    pub r_global: f64,
    pub mu_lower_local: f64,
    pub mu_lower_global: f64,
    pub classification: Classification,
    /// Set when `mu` equals the local threshold exactly.
    pub boundary: bool,
    pub trivial_reason: Option<String>,
    /// Slack of the numerical suprema behind the global threshold.
    pub estimation_tolerance: f64,
}

fn classify_mu(mu: f64, local: Threshold, global: Threshold) -> (Classification, bool) {
    if global.trivial {
        (Classification::TriviallyStable, false)
    } else if mu > global.mu {
        (Classification::GloballyStable, false)
    } else if local.trivial || mu > local.mu {
        (Classification::LocallyStableOnly, false)
    } else {
        (Classification::Unstable, mu == local.mu)
    }
}

/// Classification from precomputed ratio estimates.
pub fn classify_with(
    sup: &SupEstimates,
    params: &ImpulseParams,
) -> Result<StabilityReport, StabilityError> {
    let regime = params.regime();
    if !regime.is_commensurate() {
        return Err(StabilityError::Incommensurate);
    }
    let local = mu_lower(sup.s_local, sup.r_local, params)?;
    let global = mu_lower(sup.s_global, sup.r_global, params)?;
    let (classification, boundary) = classify_mu(params.mu, local, global);
    let trivial_reason = global.trivial.then(|| {
        "S + ln(1 - alpha_x)/(r T_h) <= 0: harvesting alone removes the pests, \
         no biological control is needed"
            .to_string()
    });
    Ok(StabilityReport {
        regime,
        mu: params.mu,
        s_local: sup.s_local,
        r_local: sup.r_local,
        s_global: sup.s_global,
        r_global: sup.r_global,
        mu_lower_local: local.mu,
        mu_lower_global: global.mu,
        classification,
        boundary,
        trivial_reason,
        estimation_tolerance: sup.tolerance,
    })
}

/// Local and global thresholds for `params.mu` and the resulting class.
pub fn classify(
    model: &ResponseModel,
    params: &ImpulseParams,
) -> Result<StabilityReport, StabilityError> {
    if !params.regime().is_commensurate() {
        return Err(StabilityError::Incommensurate);
    }
    let report = validate_hypotheses(model, CLASSIFY_GRID)?;
    if !report.all_passed() {
        let failed: Vec<String> =
            report.failures().map(|c| format!("{} ({})", c.name, c.detail)).collect();
        return Err(StabilityError::Hypotheses(failed.join("; ")));
    }
    let sup = estimate_sup_ratios(model, CLASSIFY_GRID)?;
    classify_with(&sup, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalOptions {
    /// Initial pest level is `1e-6 * x_scale`.
    pub x_scale: f64,
    /// Horizon in reference periods.
    pub periods: u32,
    pub iterations: u32,
    /// Integration steps per `min(T_h, T_r)`.
    pub steps_per_base: u32,
}

impl Default for EmpiricalOptions {
    fn default() -> Self {
        EmpiricalOptions { x_scale: 1.0, periods: 60, iterations: 40, steps_per_base: 200 }
    }
}

/// Whether a tiny pest seed started on the periodic orbit has shrunk after
/// the horizon. Compared at the final post-coinciding instant.
pub fn pests_decline(
    model: &ResponseModel,
    params: &ImpulseParams,
    options: &EmpiricalOptions,
) -> Result<bool, StabilityError> {
    let orbit = PeriodicSolution::new(params)?;
    let x0 = 1e-6 * options.x_scale;
    let t_end = f64::from(options.periods) * orbit.period();
    let dt = params.base_period() / f64::from(options.steps_per_base);
    let trace = simulate_with(
        model,
        params,
        State::new(x0, orbit.y_star),
        t_end,
        dt,
        SimOptions { sample_stride: 0 },
    )?;
    Ok(trace.final_state().x < x0)
}

/// Bisection on `mu` between persistence and decline of a tiny pest seed,
/// using the full nonlinear simulation.
pub fn empirical_threshold(
    model: &ResponseModel,
    params: &ImpulseParams,
    bracket: (f64, f64),
) -> Result<f64, StabilityError> {
    empirical_threshold_with(model, params, bracket, &EmpiricalOptions::default())
}

pub fn empirical_threshold_with(
    model: &ResponseModel,
    params: &ImpulseParams,
    (lo, hi): (f64, f64),
    options: &EmpiricalOptions,
) -> Result<f64, StabilityError> {
    if !params.regime().is_commensurate() {
        return Err(StabilityError::Incommensurate);
    }
    let declines = |mu: f64| pests_decline(model, &params.with_mu(mu), options);
    if declines(lo)? || !declines(hi)? {
        return Err(StabilityError::NoSignChange { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..options.iterations {
        let mid = 0.5 * (a + b);
        if declines(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Release-to-harvest period ratio `T_r / T_h`: `k` or `1/k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodRatio {
    /// `T_r = k T_h`.
    Multiple(u32),
    /// `T_r = T_h / k`.
    Fraction(u32),
}

impl PeriodRatio {
    pub fn value(self) -> f64 {
        match self {
            PeriodRatio::Multiple(k) => f64::from(k),
            PeriodRatio::Fraction(k) => 1.0 / f64::from(k),
        }
    }

    pub fn k(self) -> u32 {
        match self {
            PeriodRatio::Multiple(k) | PeriodRatio::Fraction(k) => k,
        }
    }

    /// Accepts a float within `1e-9` of an integer or an integer's reciprocal.
    pub fn from_value(v: f64) -> Result<Self, StabilityError> {
        if !(v.is_finite() && v > 0.0) {
            return Err(StabilityError::BadRatio(v));
        }
        let k = v.round();
        if k >= 1.0 && (v - k).abs() < 1e-9 {
            return Ok(PeriodRatio::Multiple(k as u32));
        }
        let inv = 1.0 / v;
        let k = inv.round();
        if k >= 2.0 && (inv - k).abs() < 1e-9 {
            return Ok(PeriodRatio::Fraction(k as u32));
        }
        Err(StabilityError::BadRatio(v))
    }

    pub fn release_period(self, t_h: f64) -> f64 {
        match self {
            PeriodRatio::Multiple(k) => f64::from(k) * t_h,
            PeriodRatio::Fraction(k) => t_h / f64::from(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetRow {
    pub ratio: PeriodRatio,
    pub regime: Regime,
    pub mu_local: f64,
    pub mu_global: f64,
    pub trivial: bool,
}

/// Thresholds across release periods with `T_h` held fixed.
pub fn budget_curve(
    model: &ResponseModel,
    base: &ImpulseParams,
    ratios: &[PeriodRatio],
) -> Result<Vec<BudgetRow>, StabilityError> {
    let sup = estimate_sup_ratios(model, CLASSIFY_GRID)?;
    budget_curve_with(&sup, base, ratios)
}

pub fn budget_curve_with(
    sup: &SupEstimates,
    base: &ImpulseParams,
    ratios: &[PeriodRatio],
) -> Result<Vec<BudgetRow>, StabilityError> {
    ratios
        .iter()
        .map(|&ratio| {
            let params = base.with_release_period(ratio.release_period(base.t_h));
            let local = mu_lower(sup.s_local, sup.r_local, &params)?;
            let global = mu_lower(sup.s_global, sup.r_global, &params)?;
            Ok(BudgetRow {
                ratio,
                regime: params.regime(),
                mu_local: local.mu,
                mu_global: global.mu,
                trivial: global.trivial,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Monotonicity {
    Holds,
    /// `mu_lower_h(k) >= mu_lower_h(k + 1)` at this `k`.
    ViolatedAt(u32),
}

impl Monotonicity {
    pub fn holds(self) -> bool {
        self == Monotonicity::Holds
    }
}

/// Checks that the harvest-multiple threshold strictly increases with the
/// number of releases per harvest, `k = 1..=k_max`.
pub fn monotonicity_check(
    base: &ImpulseParams,
    s: f64,
    r: f64,
    k_max: u32,
) -> Result<Monotonicity, StabilityError> {
    if control_margin(s, r, base)?.is_none() {
        return Err(StabilityError::Vacuous);
    }
    let at = |k: u32| -> Result<f64, StabilityError> {
        let p = base.with_release_period(base.t_h / f64::from(k));
        Ok(mu_lower_h(s, r, &p)?.mu)
    };
    let mut prev = at(1)?;
    for k in 1..k_max {
        let next = at(k + 1)?;
        if !(next > prev) {
            return Ok(Monotonicity::ViolatedAt(k));
        }
        prev = next;
    }
    Ok(Monotonicity::Holds)
}
