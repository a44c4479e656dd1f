use biocontrol_core::expr::parse;
use biocontrol_core::model::{estimate_sup_ratios, ImpulseParams, Regime, ResponseFn, ResponseModel};
use biocontrol_core::periodic::PeriodicSolution;
use biocontrol_core::quad::integrate_with_breaks;
use biocontrol_core::sim::{simulate_with, SimOptions, State};
use biocontrol_core::stability::{
    b11_from_slopes, classify, empirical_threshold, monotonicity_check, mu_lower, mu_lower_h,
    mu_lower_r, Classification, Monotonicity,
};
use proptest::prelude::*;

fn unit_schedule(t_r: f64, mu: f64) -> ImpulseParams {
    ImpulseParams::new(1.0, 0.5, 0.5, 1.0, t_r, mu).unwrap()
}

/// `mu` where the pest multiplier crosses 1, with the predator integral
/// taken by quadrature of the periodic evaluator.
fn bisect_unit_multiplier(params: &ImpulseParams, s: f64, r: f64) -> f64 {
    let log_multiplier = |mu: f64| {
        let p = params.with_mu(mu);
        let sol = PeriodicSolution::new(&p).unwrap();
        let int = integrate_with_breaks(|t| sol.eval(t).unwrap(), &sol.breakpoints(), 1e-15, 1e-13)
            .unwrap();
        let (harvests, span) = match p.regime() {
            Regime::HarvestMultiple(_) => (1, p.t_h),
            Regime::ReleaseMultiple(k) => (k as i32, p.t_r),
            Regime::Incommensurate => unreachable!(),
        };
        // f'(0) = S r and g'(0) = r for linear responses
        f64::from(harvests) * (1.0 - p.alpha_x).ln() + s * r * span - r * int
    };
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_multiplier(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn anchor_thresholds_confirmed_by_bisection() {
    for (t_r, anchor) in [
        (1.0, 0.396_143_416_115_700_25),
        (0.5, 0.437_430_353_134_447_1),
        (1.0 / 3.0, 0.455_494_008_528_264_8),
        (2.0, 0.396_143_416_115_700_25),
        (5.0, 0.396_143_416_115_700_25),
    ] {
        let p = unit_schedule(t_r, 0.0);
        let oracle = bisect_unit_multiplier(&p, 1.0, 1.0);
        let formula = mu_lower(1.0, 1.0, &p).unwrap().mu;
        assert!((oracle - anchor).abs() < 1e-10, "T_r={t_r}: oracle {oracle}");
        assert!((formula - anchor).abs() < 1e-12, "T_r={t_r}: formula {formula}");
    }
}

fn lv() -> ResponseModel {
    ResponseModel::lotka_volterra(1.0, 1.0, 1.0)
}

#[test]
fn empirical_threshold_tracks_formula() {
    for t_r in [1.0, 0.5, 1.0 / 3.0, 2.0, 3.0] {
        let p = unit_schedule(t_r, 0.0);
        let formula = mu_lower(1.0, 1.0, &p).unwrap().mu;
        let empirical = empirical_threshold(&lv(), &p, (0.1, 1.0)).unwrap();
        assert!((empirical / formula - 1.0).abs() < 0.02, "T_r={t_r}: {empirical} vs {formula}");
    }
}

#[test]
fn pests_persist_below_local_threshold() {
    let p = unit_schedule(1.0, 0.0);
    let mu = 0.9 * mu_lower_h(1.0, 1.0, &p).unwrap().mu;
    let p = p.with_mu(mu);
    let y_star = PeriodicSolution::new(&p).unwrap().y_star;
    let trace =
        simulate_with(&lv(), &p, State::new(1e-6, y_star), 200.0, 1e-3, SimOptions::default())
            .unwrap();
    assert!(trace.rows().all(|row| row.x > 1e-8));
}

#[test]
fn classification_examples() {
    assert_eq!(classify(&lv(), &unit_schedule(1.0, 0.5)).unwrap().classification, Classification::GloballyStable);
    assert_eq!(classify(&lv(), &unit_schedule(1.0, 0.3)).unwrap().classification, Classification::Unstable);

    // Holling predation saturates, so the global ratio exceeds the local one.
    let holling = ResponseModel::logistic_holling(1.0, 10.0, 1.0, 1.0, 1.0);
    let report = classify(&holling, &unit_schedule(1.0, 0.0)).unwrap();
    assert!(report.mu_lower_global > report.mu_lower_local);
    let mid = 0.5 * (report.mu_lower_local + report.mu_lower_global);
    let report = classify(&holling, &unit_schedule(1.0, mid)).unwrap();
    assert_eq!(report.classification, Classification::LocallyStableOnly);

    let bad = ResponseModel::new(
        ResponseFn::Linear { slope: 1.0 },
        parse("x^2").unwrap().into(),
        ResponseFn::Linear { slope: 1.0 },
    );
    assert!(classify(&bad, &unit_schedule(1.0, 0.5)).is_err());
}

#[test]
fn boundary_flag_at_exact_threshold() {
    let mu = mu_lower_h(1.0, 1.0, &unit_schedule(1.0, 0.0)).unwrap().mu;
    let report = classify(&lv(), &unit_schedule(1.0, mu)).unwrap();
    assert_eq!(report.classification, Classification::Unstable);
    assert!(report.boundary);
}

#[derive(Debug, Clone, Copy)]
struct Draw {
    params: ImpulseParams,
    s: f64,
    r: f64,
}

/// Non-trivial draws: `S + ln(1 - alpha_x)/(r T_h) > 0`.
fn draws(harvest: bool) -> impl Strategy<Value = Draw> {
    (0.1f64..3.0, 0.0f64..0.95, 0.0f64..0.95, 0.2f64..5.0, 1u32..=5, 0.2f64..3.0, 0.2f64..3.0)
        .prop_filter_map("trivial", move |(d, ax, ay, t_h, k, s, r)| {
            let t_r = if harvest { t_h / f64::from(k) } else { t_h * f64::from(k + 1) };
            let params = ImpulseParams::new(d, ax, ay, t_h, t_r, 0.0).ok()?;
            (s + (1.0 - ax).ln() / (r * t_h) > 1e-3).then_some(Draw { params, s, r })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn unit_multiplier_at_threshold_harvest(draw in draws(true)) {
        let mu = mu_lower(draw.s, draw.r, &draw.params).unwrap().mu;
        let b = b11_from_slopes(draw.s * draw.r, draw.r, &draw.params.with_mu(mu)).unwrap();
        prop_assert!((b - 1.0).abs() < 1e-9, "b11 = {b}");
    }

    #[test]
    fn unit_multiplier_at_threshold_release(draw in draws(false)) {
        let mu = mu_lower(draw.s, draw.r, &draw.params).unwrap().mu;
        let b = b11_from_slopes(draw.s * draw.r, draw.r, &draw.params.with_mu(mu)).unwrap();
        prop_assert!((b - 1.0).abs() < 1e-9, "b11 = {b}");
    }

    #[test]
    fn threshold_increases_with_release_frequency(draw in draws(true)) {
        let base = draw.params.with_release_period(draw.params.t_h);
        prop_assert_eq!(monotonicity_check(&base, draw.s, draw.r, 50).unwrap(), Monotonicity::Holds);
    }

    #[test]
    fn plateau_and_continuity(draw in draws(false)) {
        let p = draw.params;
        let plateau = mu_lower_r(draw.s, draw.r, &p).unwrap().mu;
        for k in 2..=6 {
            let pk = p.with_release_period(p.t_h * f64::from(k));
            prop_assert_eq!(mu_lower_r(draw.s, draw.r, &pk).unwrap().mu.to_bits(), plateau.to_bits());
        }
        let one = mu_lower_h(draw.s, draw.r, &p.with_release_period(p.t_h)).unwrap().mu;
        prop_assert!((one - plateau).abs() <= 1e-12 * plateau.max(1.0));
    }

    #[test]
    fn threshold_increasing_in_s_and_r(draw in draws(true), ds in 0.0f64..1.0, dr in 0.0f64..1.0) {
        let lo = mu_lower(draw.s, draw.r, &draw.params).unwrap();
        let hi = mu_lower(draw.s + ds, draw.r + dr, &draw.params).unwrap();
        prop_assert!(hi.mu >= lo.mu);
    }

    #[test]
    fn local_never_exceeds_global(a in 0.2f64..3.0, cap in 1.0f64..50.0, c in 0.2f64..3.0, tau in 0.0f64..2.0,
                                  k in 1u32..=4, harvest in any::<bool>()) {
        let model = ResponseModel::logistic_holling(a, cap, c, tau, 1.0);
        let sup = estimate_sup_ratios(&model, 500).unwrap();
        prop_assert!(sup.s_global >= sup.s_local - 1e-9 && sup.r_global >= sup.r_local - 1e-9);
        let t_r = if harvest { 1.0 / f64::from(k) } else { f64::from(k) };
        let p = unit_schedule(t_r, 0.0);
        let local = mu_lower(sup.s_local, sup.r_local, &p).unwrap();
        let global = mu_lower(sup.s_global, sup.r_global, &p).unwrap();
        if !local.trivial && !global.trivial {
            prop_assert!(local.mu <= global.mu);
        }
    }
}

#[test]
fn grid_starts_go_extinct_above_global_threshold() {
    // Near zero the pests shrink by |B11| ~ e^-0.031 per period at 1.1x the
    // threshold, so the horizon has to cover several hundred periods.
    let base = unit_schedule(1.0, 0.0);
    let report = classify(&lv(), &base).unwrap();
    let p = base.with_mu(1.1 * report.mu_lower_global);
    let rate = -b11_from_slopes(1.0, 1.0, &p).unwrap().ln();
    assert!((rate - 0.0307).abs() < 1e-3, "{rate}");
    let y_star = PeriodicSolution::new(&p).unwrap().y_star;
    for x0 in [0.1, 1.0, 5.0] {
        for y0 in [0.0, y_star, 3.0 * y_star] {
            let trace =
                simulate_with(&lv(), &p, State::new(x0, y0), 400.0, 1e-3, SimOptions::default())
                    .unwrap();
            let t = biocontrol_core::sim::detect_extinction(&trace, 1e-6, 0.0).unwrap();
            assert!(t.is_some(), "x0={x0} y0={y0}");
        }
    }
}
