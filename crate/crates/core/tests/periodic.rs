use biocontrol_core::model::{ImpulseParams, Regime, ResponseModel};
use biocontrol_core::periodic::{
    eval_y_ph, eval_y_pr, integral_y_ph, integral_y_pr, ystar_h, ystar_r, PeriodicError,
    PeriodicSolution,
};
use biocontrol_core::quad::integrate_with_breaks;
use biocontrol_core::sim::{simulate_with, SimOptions, State};
use proptest::prelude::*;

fn harvest_params(d: f64, alpha_y: f64, t_h: f64, k: u32, mu: f64) -> ImpulseParams {
    ImpulseParams::new(d, 0.5, alpha_y, t_h, t_h / f64::from(k), mu).unwrap()
}

fn release_params(d: f64, alpha_y: f64, t_h: f64, k: u32, mu: f64) -> ImpulseParams {
    ImpulseParams::new(d, 0.5, alpha_y, t_h, t_h * f64::from(k), mu).unwrap()
}

/// Post-coinciding value after one reference period, applying the scalar
/// decay and impulse maps one sub-interval at a time.
fn period_map(p: &ImpulseParams, y0: f64) -> f64 {
    let keep = 1.0 - p.alpha_y;
    let dose = p.mu * p.t_r;
    let mut y = y0;
    match p.regime() {
        Regime::HarvestMultiple(k) => {
            for _ in 1..k {
                y = y * (-p.d * p.t_r).exp() + dose;
            }
            keep * y * (-p.d * p.t_r).exp() + dose
        }
        Regime::ReleaseMultiple(k) => {
            for _ in 1..k {
                y = keep * y * (-p.d * p.t_h).exp();
            }
            keep * y * (-p.d * p.t_h).exp() + dose
        }
        Regime::Incommensurate => unreachable!(),
    }
}

fn iterated_fixed_point(p: &ImpulseParams) -> f64 {
    let mut y = 0.0;
    for _ in 0..100_000 {
        let next = period_map(p, y);
        if (next - y).abs() <= 1e-14 * next.abs().max(1e-300) {
            return next;
        }
        y = next;
    }
    y
}

fn quadrature(sol: &PeriodicSolution) -> f64 {
    integrate_with_breaks(|t| sol.eval(t).unwrap(), &sol.breakpoints(), 1e-14, 1e-12).unwrap()
}

fn regime_params() -> impl Strategy<Value = ImpulseParams> {
    (0.1f64..3.0, 0.0f64..0.95, 0.2f64..5.0, 1u32..=5, 0.1f64..5.0, any::<bool>()).prop_map(
        |(d, a, t_h, k, mu, harvest)| {
            if harvest {
                harvest_params(d, a, t_h, k, mu)
            } else {
                release_params(d, a, t_h, k, mu)
            }
        },
    )
}

#[test]
fn anchor_integrals_from_quadrature() {
    let sol = PeriodicSolution::new(&harvest_params(1.0, 0.5, 1.0, 1, 1.0)).unwrap();
    assert!((quadrature(&sol) - 0.774_600_326_439_436_1).abs() < 1e-10);
    let sol = PeriodicSolution::new(&harvest_params(1.0, 0.5, 1.0, 3, 1.0)).unwrap();
    assert!((quadrature(&sol) - 0.673_670_374_790_480_6).abs() < 1e-10);
    let sol = PeriodicSolution::new(&release_params(1.0, 0.5, 1.0, 2, 0.5)).unwrap();
    assert!((quadrature(&sol) - 0.774_600_326_439_436).abs() < 1e-10);
}

#[test]
fn anchor_fixed_points_from_map_iteration() {
    let p = harvest_params(1.0, 0.5, 1.0, 1, 1.0);
    assert!((iterated_fixed_point(&p) - 1.225_399_673_560_564_1).abs() < 1e-12);
    let p = release_params(1.0, 0.5, 1.0, 2, 0.5);
    assert!((iterated_fixed_point(&p) - 1.035_018_635_031_800_2).abs() < 1e-12);
}

#[test]
fn wrong_regime_and_negative_time() {
    let h = harvest_params(1.0, 0.5, 1.0, 2, 1.0);
    let r = release_params(1.0, 0.5, 1.0, 2, 1.0);
    assert!(matches!(ystar_r(&h), Err(PeriodicError::WrongRegime { .. })));
    assert!(matches!(integral_y_pr(&h), Err(PeriodicError::WrongRegime { .. })));
    assert!(matches!(ystar_h(&r), Err(PeriodicError::WrongRegime { .. })));
    assert!(matches!(eval_y_ph(0.5, &r), Err(PeriodicError::WrongRegime { .. })));
    assert_eq!(eval_y_ph(-1.0, &h), Err(PeriodicError::NegativeTime(-1.0)));
    let odd = ImpulseParams::new(1.0, 0.5, 0.5, 1.0, 2f64.sqrt(), 1.0).unwrap();
    assert_eq!(PeriodicSolution::new(&odd), Err(PeriodicError::Incommensurate));
}

#[test]
fn release_multiple_drops_at_harvests() {
    let p = release_params(0.7, 0.3, 1.0, 3, 1.0);
    let left = eval_y_pr(1.0 - 1e-12, &p).unwrap();
    let right = eval_y_pr(1.0, &p).unwrap();
    assert!((right / left - 0.7).abs() < 1e-9);
}

#[test]
fn pest_free_simulation_matches_evaluator() {
    let lv = ResponseModel::lotka_volterra(1.0, 1.0, 1.0);
    for p in [harvest_params(1.0, 0.5, 1.0, 2, 1.0), release_params(0.8, 0.4, 0.7, 3, 1.3)] {
        let sol = PeriodicSolution::new(&p).unwrap();
        let n = 60.0;
        let trace = simulate_with(
            &lv,
            &p,
            State::new(0.0, 0.0),
            n * sol.period() + 0.75 * p.t_h,
            p.base_period() / 1000.0,
            SimOptions::default(),
        )
        .unwrap();
        let last = trace.final_state();
        let expected = sol.eval(0.75 * p.t_h).unwrap();
        assert!((last.y - expected).abs() / expected < 1e-6, "{} vs {}", last.y, expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_integral_matches_quadrature(p in regime_params()) {
        let sol = PeriodicSolution::new(&p).unwrap();
        let q = quadrature(&sol);
        prop_assert!((sol.integral() - q).abs() / q < 1e-8);
    }

    #[test]
    fn closed_form_fixed_point_is_fixed(p in regime_params()) {
        let sol = PeriodicSolution::new(&p).unwrap();
        let once = period_map(&p, sol.y_star);
        prop_assert!((once - sol.y_star).abs() <= 1e-12 * sol.y_star.max(1.0));
    }

    #[test]
    fn periodic_in_reference_period(p in regime_params(), ts in prop::collection::vec(0.0f64..50.0, 16)) {
        let sol = PeriodicSolution::new(&p).unwrap();
        for t in ts {
            let a = sol.eval(t).unwrap();
            let b = sol.eval(t + sol.period()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "t={t}: {a} vs {b}");
            prop_assert!(a > 0.0);
        }
        prop_assert_eq!(sol.eval(0.0).unwrap(), sol.y_star);
    }

    #[test]
    fn regimes_agree_at_ratio_one(d in 0.1f64..3.0, a in 0.0f64..1.0, t in 0.2f64..5.0, mu in 0.0f64..5.0) {
        let p = harvest_params(d, a, t, 1, mu);
        let y_h = ystar_h(&p).unwrap();
        let y_r = mu * t / (1.0 - (1.0 - a) * (-d * t).exp());
        prop_assert!((y_h - y_r).abs() <= 1e-12 * y_r.max(1.0));
        let pr = ImpulseParams { t_r: t, ..p };
        let int_r = mu * t / d * (1.0 - (-d * t).exp()) / (1.0 - (1.0 - a) * (-d * t).exp());
        prop_assert!((integral_y_ph(&pr).unwrap() - int_r).abs() <= 1e-12 * int_r.max(1.0));
    }

    #[test]
    fn no_predator_harvest_gives_mean_level(d in 0.1f64..3.0, t in 0.2f64..5.0, k in 1u32..=5, mu in 0.1f64..5.0) {
        let p = harvest_params(d, 0.0, t, k, mu);
        prop_assert!((integral_y_ph(&p).unwrap() - mu * t / d).abs() < 1e-12 * mu * t / d);
        let p = release_params(d, 0.0, t, k + 1, mu);
        let expected = mu * p.t_r / d;
        prop_assert!((integral_y_pr(&p).unwrap() - expected).abs() < 1e-12 * expected);
    }
}
