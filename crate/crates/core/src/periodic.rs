//! Closed-form pest-free periodic solutions.
//!
//! With no pests the predators only decay between impulses, so over one
//! reference period the post-impulse values follow an affine map whose
//! fixed point `y_star` anchors the periodic orbit. `y_star` is the value
//! just after a coinciding harvest and release.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ImpulseParams, Regime};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeriodicError {
    #[error("operation requires the {expected} regime, parameters are {actual:?}")]
    WrongRegime { expected: &'static str, actual: Regime },
    #[error("time must be >= 0, got {0}")]
    NegativeTime(f64),
    #[error("no closed form for incommensurate periods")]
    Incommensurate,
}

fn harvest_multiple(params: &ImpulseParams) -> Result<u32, PeriodicError> {
    match params.regime() {
        Regime::HarvestMultiple(k) => Ok(k),
        actual => Err(PeriodicError::WrongRegime { expected: "harvest-multiple", actual }),
    }
}

fn release_multiple(params: &ImpulseParams) -> Result<u32, PeriodicError> {
    match params.regime() {
        Regime::ReleaseMultiple(k) => Ok(k),
        actual => Err(PeriodicError::WrongRegime { expected: "release-multiple", actual }),
    }
}

/// `sum_{j=0}^{i-1} e^{-j q}` in closed form, with the small-`q` series
/// used below `1e-12` to avoid cancellation.
pub fn geometric_sum(i: u64, q: f64) -> f64 {
    if i == 0 {
        return 0.0;
    }
    let n = i as f64;
    if q < 1e-12 {
        n - q * n * (n - 1.0) / 2.0
    } else {
        -(-n * q).exp_m1() / -(-q).exp_m1()
    }
}

/// `t mod period` with remainders within `1e-12 period` of `period` snapped
/// to 0, so lattice points read as right limits.
fn wrap(t: f64, period: f64) -> f64 {
    let r = t - period * (t / period).floor();
    if r >= period * (1.0 - 1e-12) || r < 0.0 {
        0.0
    } else {
        r
    }
}

/// Whole sub-periods of length `step` contained in `r`, snapped near
/// integer boundaries, and the leftover.
fn split(r: f64, step: f64, max_index: u64) -> (u64, f64) {
    let q = r / step;
    let mut i = q.floor();
    if q - i > 1.0 - 1e-12 {
        i += 1.0;
    }
    let i = (i.max(0.0) as u64).min(max_index);
    (i, (r - i as f64 * step).max(0.0))
}

/// Post-coinciding fixed point when `T_h = k T_r`.
pub fn ystar_h(params: &ImpulseParams) -> Result<f64, PeriodicError> {
    let k = harvest_multiple(params)?;
    let ImpulseParams { d, alpha_y, t_h, t_r, .. } = *params;
    let ratio = geometric_sum(u64::from(k), d * t_r);
    Ok(((ratio * (1.0 - alpha_y) + alpha_y) * params.release_size())
        / (1.0 - (1.0 - alpha_y) * (-d * t_h).exp()))
}

/// Post-coinciding fixed point when `T_r = k T_h`.
pub fn ystar_r(params: &ImpulseParams) -> Result<f64, PeriodicError> {
    let k = release_multiple(params)?;
    let ImpulseParams { d, alpha_y, t_r, .. } = *params;
    Ok(params.release_size() / (1.0 - (1.0 - alpha_y).powi(k as i32) * (-d * t_r).exp()))
}

fn check_time(t: f64) -> Result<(), PeriodicError> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(PeriodicError::NegativeTime(t))
    }
}

fn eval_ph(t: f64, params: &ImpulseParams, k: u32, y_star: f64) -> f64 {
    let ImpulseParams { d, t_h, t_r, .. } = *params;
    let r = wrap(t, t_h);
    let (i, tau) = split(r, t_r, u64::from(k) - 1);
    y_star * (-d * r).exp() + params.release_size() * (-d * tau).exp() * geometric_sum(i, d * t_r)
}

fn eval_pr(t: f64, params: &ImpulseParams, k: u32, y_star: f64) -> f64 {
    let ImpulseParams { d, alpha_y, t_h, t_r, .. } = *params;
    let r = wrap(t, t_r);
    let (i, _) = split(r, t_h, u64::from(k) - 1);
    y_star * (-d * r).exp() * (1.0 - alpha_y).powi(i as i32)
}

/// Periodic predator level for `T_h = k T_r`, right-continuous at impulses.
pub fn eval_y_ph(t: f64, params: &ImpulseParams) -> Result<f64, PeriodicError> {
    check_time(t)?;
    let k = harvest_multiple(params)?;
    Ok(eval_ph(t, params, k, ystar_h(params)?))
}

/// Periodic predator level for `T_r = k T_h`, right-continuous at impulses.
pub fn eval_y_pr(t: f64, params: &ImpulseParams) -> Result<f64, PeriodicError> {
    check_time(t)?;
    let k = release_multiple(params)?;
    Ok(eval_pr(t, params, k, ystar_r(params)?))
}

/// `(alpha_y (1 - e^{-d T_h}) / (1 - (1 - alpha_y) e^{-d T_h}))`, the
/// predator-harvest loss factor shared by the integral and the budget.
pub fn harvest_loss(params: &ImpulseParams) -> f64 {
    let e = (-params.d * params.t_h).exp();
    params.alpha_y * (1.0 - e) / (1.0 - (1.0 - params.alpha_y) * e)
}

/// `e^{-d T_h / k} / (k (1 - e^{-d T_h / k}))`.
pub fn release_spacing_factor(k: u32, d: f64, t_h: f64) -> f64 {
    let k = f64::from(k);
    let e = (-d * t_h / k).exp();
    e / (k * (1.0 - e))
}

/// Integral of the periodic predator level over one harvest period.
pub fn integral_y_ph(params: &ImpulseParams) -> Result<f64, PeriodicError> {
    let k = harvest_multiple(params)?;
    let ImpulseParams { d, t_h, mu, .. } = *params;
    Ok(mu * t_h / d
        * (1.0 - harvest_loss(params) * release_spacing_factor(k, d, t_h)))
}

/// Integral of the periodic predator level over one release period.
pub fn integral_y_pr(params: &ImpulseParams) -> Result<f64, PeriodicError> {
    release_multiple(params)?;
    let ImpulseParams { d, alpha_y, t_h, t_r, mu, .. } = *params;
    let e = (-d * t_h).exp();
    Ok(mu * t_r / d * (1.0 - e) / (1.0 - (1.0 - alpha_y) * e))
}

/// Regime-tagged pest-free periodic solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicSolution {
    pub regime: Regime,
    pub y_star: f64,
    pub params: ImpulseParams,
}

impl PeriodicSolution {
    pub fn new(params: &ImpulseParams) -> Result<Self, PeriodicError> {
        let regime = params.regime();
        let y_star = match regime {
            Regime::HarvestMultiple(_) => ystar_h(params)?,
            Regime::ReleaseMultiple(_) => ystar_r(params)?,
            Regime::Incommensurate => return Err(PeriodicError::Incommensurate),
        };
        Ok(PeriodicSolution { regime, y_star, params: *params })
    }

    /// Length of the reference period.
    pub fn period(&self) -> f64 {
        match self.regime {
            Regime::ReleaseMultiple(_) => self.params.t_r,
            _ => self.params.t_h,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, PeriodicError> {
        check_time(t)?;
        Ok(match self.regime {
            Regime::HarvestMultiple(k) => eval_ph(t, &self.params, k, self.y_star),
            Regime::ReleaseMultiple(k) => eval_pr(t, &self.params, k, self.y_star),
            Regime::Incommensurate => unreachable!("constructor rejects incommensurate"),
        })
    }

    /// Integral over one reference period.
    pub fn integral(&self) -> f64 {
        match self.regime {
            Regime::HarvestMultiple(_) => integral_y_ph(&self.params),
            _ => integral_y_pr(&self.params),
        }
        .expect("regime fixed at construction")
    }

    /// Impulse instants inside one reference period, endpoints included;
    /// the solution is smooth between consecutive entries.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (k, step) = match self.regime {
            Regime::HarvestMultiple(k) => (k, self.params.t_r),
            Regime::ReleaseMultiple(k) => (k, self.params.t_h),
            Regime::Incommensurate => unreachable!(),
        };
        (0..=k).map(|i| if i == k { self.period() } else { f64::from(i) * step }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(k: u32, alpha_y: f64, mu: f64) -> ImpulseParams {
        ImpulseParams::new(1.0, 0.5, alpha_y, 1.0, 1.0 / f64::from(k), mu).unwrap()
    }

    fn rp(k: u32, alpha_y: f64, mu: f64) -> ImpulseParams {
        ImpulseParams::new(1.0, 0.5, alpha_y, 1.0, f64::from(k), mu).unwrap()
    }

    /// Fixed point of the one-period map over post-coinciding values.
    fn iterate_map(step: impl Fn(f64) -> f64) -> f64 {
        let mut y = 0.0;
        for _ in 0..10_000 {
            let next = step(y);
            if (next - y).abs() < 1e-15 * next.abs().max(1.0) {
                return next;
            }
            y = next;
        }
        y
    }

    #[test]
    fn ystar_h_examples() {
        let e1 = (-1f64).exp();
        let p = ImpulseParams::new(1.0, 0.5, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((ystar_h(&p).unwrap() - 1.0 / (1.0 - e1)).abs() < 1e-14);

        let p = hp(1, 0.5, 1.0);
        let oracle = iterate_map(|y| 0.5 * e1 * y + 1.0);
        assert!((ystar_h(&p).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 1.225_399_673_560_564).abs() < 1e-12);

        assert_eq!(ystar_h(&hp(3, 0.5, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn ystar_h_matches_release_map_for_k_gt_1() {
        let p = hp(4, 0.3, 0.8);
        let decay = (-p.d * p.t_r).exp();
        let oracle = iterate_map(|y| {
            let mut z = y;
            for _ in 0..3 {
                z = z * decay + p.release_size();
            }
            z * decay * (1.0 - p.alpha_y) + p.release_size()
        });
        assert!((ystar_h(&p).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn ystar_r_examples() {
        let p = rp(2, 0.5, 0.5);
        let oracle = iterate_map(|y| 0.25 * (-2f64).exp() * y + 1.0);
        assert!((ystar_r(&p).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 1.035_018_635_031_8).abs() < 1e-12);

        let p = rp(3, 1.0, 0.7);
        assert!((ystar_r(&p).unwrap() - 0.7 * 3.0).abs() < 1e-14);
    }

    #[test]
    fn wrong_regime_is_rejected() {
        assert!(matches!(ystar_r(&hp(2, 0.5, 1.0)), Err(PeriodicError::WrongRegime { .. })));
        assert!(matches!(ystar_h(&rp(2, 0.5, 1.0)), Err(PeriodicError::WrongRegime { .. })));
        assert!(matches!(integral_y_pr(&hp(1, 0.5, 1.0)), Err(PeriodicError::WrongRegime { .. })));
        assert!(eval_y_ph(-1.0, &hp(2, 0.5, 1.0)).is_err());
        let odd = ImpulseParams::new(1.0, 0.5, 0.5, 1.0, 2f64.sqrt(), 1.0).unwrap();
        assert_eq!(PeriodicSolution::new(&odd), Err(PeriodicError::Incommensurate));
    }

    #[test]
    fn evaluator_edges() {
        let p = hp(3, 0.5, 1.0);
        let ys = ystar_h(&p).unwrap();
        assert_eq!(eval_y_ph(0.0, &p).unwrap(), ys);
        let t = p.t_r * (1.0 - 1e-9);
        assert!((eval_y_ph(t, &p).unwrap() - ys * (-t).exp()).abs() < 1e-14);
        // right limit at the first release jumps by mu T_r
        let left = ys * (-p.t_r).exp();
        assert!((eval_y_ph(p.t_r, &p).unwrap() - (left + p.release_size())).abs() < 1e-12);
        // right-continuous at the period boundary
        assert!((eval_y_ph(p.t_h, &p).unwrap() - ys).abs() < 1e-12);

        let p = rp(3, 0.5, 1.0);
        let ys = ystar_r(&p).unwrap();
        assert_eq!(eval_y_pr(0.0, &p).unwrap(), ys);
        let left = eval_y_pr(p.t_h * (1.0 - 1e-12), &p).unwrap();
        let right = eval_y_pr(p.t_h, &p).unwrap();
        assert!((right / left - 0.5).abs() < 1e-9);
    }

    #[test]
    fn integral_examples() {
        let p = ImpulseParams::new(2.0, 0.5, 0.0, 1.5, 0.5, 0.8).unwrap();
        assert!((integral_y_ph(&p).unwrap() - 0.8 * 1.5 / 2.0).abs() < 1e-14);
        let p = ImpulseParams::new(2.0, 0.5, 0.0, 1.5, 3.0, 0.8).unwrap();
        assert!((integral_y_pr(&p).unwrap() - 0.8 * 3.0 / 2.0).abs() < 1e-13);

        // frozen from the quadrature oracle (see tests/periodic.rs)
        assert!((integral_y_ph(&hp(1, 0.5, 1.0)).unwrap() - 0.774_600_326_439_436).abs() < 1e-12);
        assert!((integral_y_pr(&rp(2, 0.5, 0.5)).unwrap() - 0.774_600_326_439_436).abs() < 1e-12);
        assert!((integral_y_ph(&hp(3, 0.5, 1.0)).unwrap() - 0.673_670_374_790_481).abs() < 1e-12);
    }

    #[test]
    fn geometric_sum_small_rate() {
        assert_eq!(geometric_sum(0, 0.3), 0.0);
        assert!((geometric_sum(5, 1e-14) - 5.0).abs() < 1e-12);
        let direct: f64 = (0..7).map(|j| (-0.4 * j as f64).exp()).sum();
        assert!((geometric_sum(7, 0.4) - direct).abs() < 1e-14);
    }

    #[test]
    fn breakpoints_cover_period() {
        let s = PeriodicSolution::new(&hp(3, 0.5, 1.0)).unwrap();
        let b = s.breakpoints();
        assert_eq!(b.len(), 4);
        assert_eq!((b[0], b[3]), (0.0, 1.0));
    }
}
