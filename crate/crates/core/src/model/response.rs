use std::sync::Arc;

use serde::Serialize;

use super::ModelError;
use crate::expr::{EvalError, Expr};

/// Default upper bound of the working pest domain.
pub const DEFAULT_X_MAX: f64 = 1e3;

const ZERO_TOL: f64 = 1e-12;
const FD_STEPS: [f64; 3] = [1e-4, 1e-5, 1e-6];
const UNBOUNDED_LIMIT: f64 = 1e9;

/// One of `f`, `g`, `h` as a function of pest density.
#[derive(Debug, Clone)]
pub enum ResponseFn {
    /// `slope * x`
    Linear { slope: f64 },
    /// `rate * x * (1 - x / capacity)`
    Logistic { rate: f64, capacity: f64 },
    /// `scale * attack * x / (1 + attack * handling * x)`
    Holling { attack: f64, handling: f64, scale: f64 },
    Expr(Arc<Expr>),
}

impl ResponseFn {
    #[inline]
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        match self {
            ResponseFn::Linear { slope } => Ok(slope * x),
            ResponseFn::Logistic { rate, capacity } => Ok(rate * x * (1.0 - x / capacity)),
            ResponseFn::Holling { attack, handling, scale } => {
                Ok(scale * attack * x / (1.0 + attack * handling * x))
            }
            ResponseFn::Expr(e) => e.eval(x),
        }
    }
}

impl From<Expr> for ResponseFn {
    fn from(e: Expr) -> Self {
        ResponseFn::Expr(Arc::new(e))
    }
}

/// Growth `f`, functional response `g` and numerical response `h`, plus the
/// domain `(0, x_max]` used for numerical suprema.
#[derive(Debug, Clone)]
pub struct ResponseModel {
    pub f: ResponseFn,
    pub g: ResponseFn,
    pub h: ResponseFn,
    pub x_max: f64,
}

impl ResponseModel {
    pub fn new(f: ResponseFn, g: ResponseFn, h: ResponseFn) -> Self {
        ResponseModel { f, g, h, x_max: DEFAULT_X_MAX }
    }

    /// `f = a x`, `g = b x`, `h = c x`.
    pub fn lotka_volterra(a: f64, b: f64, c: f64) -> Self {
        Self::new(
            ResponseFn::Linear { slope: a },
            ResponseFn::Linear { slope: b },
            ResponseFn::Linear { slope: c },
        )
    }

    /// Logistic growth with a Holling type II response; `h = gamma * g`.
    pub fn logistic_holling(a: f64, capacity: f64, c: f64, tau: f64, gamma: f64) -> Self {
        Self::new(
            ResponseFn::Logistic { rate: a, capacity },
            ResponseFn::Holling { attack: c, handling: tau, scale: 1.0 },
            ResponseFn::Holling { attack: c, handling: tau, scale: gamma },
        )
    }

    pub fn with_x_max(mut self, x_max: f64) -> Self {
        self.x_max = x_max;
        self
    }

    fn named(&self, name: &'static str) -> &ResponseFn {
        match name {
            "f" => &self.f,
            "g" => &self.g,
            _ => &self.h,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Grid point where the check failed (or was decided).
    pub witness: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn log_grid(x_max: f64, n: usize) -> Vec<f64> {
    let lo = x_max * 1e-10;
    let span = (x_max / lo).ln();
    (0..n)
        .map(|i| {
            if i + 1 == n {
                x_max
            } else {
                lo * (span * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

fn pass(name: &'static str, detail: impl Into<String>) -> HypothesisCheck {
    HypothesisCheck { name, passed: true, witness: None, detail: detail.into() }
}

fn fail(name: &'static str, witness: f64, detail: impl Into<String>) -> HypothesisCheck {
    HypothesisCheck { name, passed: false, witness: Some(witness), detail: detail.into() }
}

fn zero_check(name: &'static str, func: &ResponseFn) -> HypothesisCheck {
    match func.eval(0.0) {
        Ok(v) if v.abs() <= ZERO_TOL => pass(name, format!("value {v:e}")),
        Ok(v) => fail(name, 0.0, format!("value {v:e} at x = 0")),
        Err(e) => fail(name, 0.0, e.to_string()),
    }
}

fn positive_check(name: &'static str, func: &ResponseFn, grid: &[f64]) -> HypothesisCheck {
    for &x in grid {
        match func.eval(x) {
            Ok(v) if v > 0.0 => {}
            Ok(v) => return fail(name, x, format!("value {v:e}")),
            Err(e) => return fail(name, x, e.to_string()),
        }
    }
    pass(name, "positive on grid")
}

fn forward_slope(func: &ResponseFn) -> Result<f64, EvalError> {
    let f0 = func.eval(0.0)?;
    let d = |h: f64| -> Result<f64, EvalError> { Ok((func.eval(h)? - f0) / h) };
    let (d1, d2) = (d(FD_STEPS[0])?, d(FD_STEPS[1])?);
    // first-order error, step ratio 10
    Ok((10.0 * d2 - d1) / 9.0)
}

fn ratio_values<F>(grid: &[f64], ratio: F) -> Result<Vec<f64>, (f64, String)>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    grid.iter()
        .map(|&x| match ratio(x) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err((x, format!("non-finite ratio {v}"))),
            Err(e) => Err((x, e.to_string())),
        })
        .collect()
}

/// Ratio still climbing at `x_max`: maximal at the end of the grid and
/// growing at least like `sqrt(x)` over the last decade.
fn grows_at_end(values: &[f64]) -> bool {
    let n = values.len();
    let last = values[n - 1];
    let decade = n - 1 - ((n - 1) as f64 / 10.0).round() as usize;
    let prev = values[decade];
    let is_max = values.iter().all(|&v| v <= last);
    is_max && last > 0.0 && prev > 0.0 && (last / prev).log10() >= 0.5
}

fn bounded_check<F>(name: &'static str, grid: &[f64], ratio: F) -> HypothesisCheck
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    match ratio_values(grid, ratio) {
        Err((x, why)) => fail(name, x, why),
        Ok(values) => {
            let last = *values.last().unwrap_or(&0.0);
            if grows_at_end(&values) {
                fail(name, grid[grid.len() - 1], format!("ratio {last:e} still growing at x_max"))
            } else {
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                pass(name, format!("grid maximum {max:e}"))
            }
        }
    }
}

/// Numerically screens the model against the standing hypotheses on
/// `f`, `g`, `h`. Evaluation failures become failed checks.
pub fn validate_hypotheses(
    model: &ResponseModel,
    grid_n: usize,
) -> Result<HypothesisReport, ModelError> {
    if grid_n < 100 {
        return Err(ModelError::GridTooSmall(grid_n));
    }
    if !(model.x_max.is_finite() && model.x_max > 0.0) {
        return Err(ModelError::InvalidParam {
            name: "x_max",
            value: model.x_max,
            reason: "must be finite and > 0",
        });
    }
    let grid = log_grid(model.x_max, grid_n);
    let mut checks = vec![
        zero_check("f(0) = 0", &model.f),
        zero_check("g(0) = 0", &model.g),
        zero_check("h(0) = 0", &model.h),
        positive_check("g > 0", &model.g, &grid),
        positive_check("h > 0", &model.h, &grid),
    ];
    checks.push(match forward_slope(&model.g) {
        Ok(s) if s > 1e-8 => pass("g'(0) > 0", format!("forward difference {s:e}")),
        Ok(s) => fail("g'(0) > 0", 0.0, format!("forward difference {s:e}")),
        Err(e) => fail("g'(0) > 0", 0.0, e.to_string()),
    });
    checks.push(bounded_check("f/g bounded", &grid, |x| {
        Ok(model.f.eval(x)? / model.g.eval(x)?)
    }));
    checks.push(bounded_check("g/x bounded", &grid, |x| Ok(model.g.eval(x)? / x)));
    Ok(HypothesisReport { checks })
}

/// Slopes at the pest-free state with error estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derivatives {
    pub fp0: f64,
    pub gp0: f64,
    /// Not used by any stability condition; reported for completeness.
    pub hp0: f64,
    pub error: [f64; 3],
}

fn central_slope(func: &ResponseFn, name: &'static str) -> Result<(f64, f64), ModelError> {
    let mut d = [0.0; 3];
    for (slot, &h) in d.iter_mut().zip(FD_STEPS.iter()) {
        let (p, m) = match (func.eval(h), func.eval(-h)) {
            (Ok(p), Ok(m)) if p.is_finite() && m.is_finite() => (p, m),
            _ => return Err(ModelError::NonFiniteNearZero { function: name }),
        };
        *slot = (p - m) / (2.0 * h);
    }
    // second-order error, step ratio 10
    let r1 = (100.0 * d[1] - d[0]) / 99.0;
    let r2 = (100.0 * d[2] - d[1]) / 99.0;
    Ok((r1, (r1 - r2).abs()))
}

/// Central differences at 0 with Richardson extrapolation over the step
/// sequence `1e-4, 1e-5, 1e-6`.
pub fn derivatives_at_zero(model: &ResponseModel) -> Result<Derivatives, ModelError> {
    let (fp0, fe) = central_slope(&model.f, "f")?;
    let (gp0, ge) = central_slope(&model.g, "g")?;
    let (hp0, he) = central_slope(&model.h, "h")?;
    Ok(Derivatives { fp0, gp0, hp0, error: [fe, ge, he] })
}

/// Numerical stand-ins for `sup f/g` and `sup g/x`, and their limits at 0+.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupEstimates {
    pub s_global: f64,
    pub r_global: f64,
    pub s_local: f64,
    pub r_local: f64,
    /// Estimation slack carried by the global values.
    pub tolerance: f64,
}

fn golden_max<F>(mut lo: f64, mut hi: f64, func: F) -> Result<f64, ModelError>
where
    F: Fn(f64) -> Result<f64, ModelError>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = func(a)?;
    let mut fb = func(b)?;
    for _ in 0..80 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = func(b)?;
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = func(a)?;
        }
    }
    Ok(fa.max(fb))
}

fn sup_on_grid<F>(
    grid: &[f64],
    ratio_name: &'static str,
    limit_at_zero: f64,
    ratio: F,
) -> Result<(f64, f64), ModelError>
where
    F: Fn(f64) -> Result<f64, ModelError>,
{
    let values = grid.iter().map(|&x| ratio(x)).collect::<Result<Vec<_>, _>>()?;
    let (best, &grid_max) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    let n = grid.len();
    if best == n - 1 && grid_max > UNBOUNDED_LIMIT && values[n - 2] < grid_max {
        return Err(ModelError::Unbounded { ratio: ratio_name, x: grid[n - 1] });
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(n - 1)];
    let refined = golden_max(lo, hi, &ratio)?;
    let sup = grid_max.max(refined).max(limit_at_zero);
    Ok((sup, (refined - grid_max).abs()))
}

/// Grid maxima of `f/g` and `g/x` over `(0, x_max]`, refined by golden
/// section around the best cell. The limits at 0+ are candidates, so the
/// global values never fall below the local ones.
pub fn estimate_sup_ratios(
    model: &ResponseModel,
    grid_n: usize,
) -> Result<SupEstimates, ModelError> {
    if grid_n < 100 {
        return Err(ModelError::GridTooSmall(grid_n));
    }
    let der = derivatives_at_zero(model)?;
    let s_local = der.fp0 / der.gp0;
    let r_local = der.gp0;
    let grid = log_grid(model.x_max, grid_n);

    let eval = |name: &'static str, x: f64| {
        model.named(name).eval(x).map_err(|source| ModelError::Eval { function: name, x, source })
    };
    let (s_global, s_tol) =
        sup_on_grid(&grid, "f/g", s_local, |x| Ok(eval("f", x)? / eval("g", x)?))?;
    let (r_global, r_tol) = sup_on_grid(&grid, "g/x", r_local, |x| Ok(eval("g", x)? / x))?;
    let deriv_tol = der.error[0] / der.gp0.abs() + der.error[1];
    Ok(SupEstimates {
        s_global,
        r_global,
        s_local,
        r_local,
        tolerance: s_tol.max(r_tol).max(deriv_tol),
    })
}
