//! Self-contained numerical checks of the library against independent
//! oracles. Shared by the `verify` subcommand and the acceptance tests.

use std::fmt;
use std::time::{Duration, Instant};

use biocontrol_core::expr::parse;
use biocontrol_core::model::{
    derivatives_at_zero, estimate_sup_ratios, validate_hypotheses, ImpulseParams, Regime,
    ResponseFn, ResponseModel,
};
use biocontrol_core::periodic::PeriodicSolution;
use biocontrol_core::quad::integrate_with_breaks;
use biocontrol_core::sim::{detect_extinction, simulate_with, EventKind, SimOptions, State};
use biocontrol_core::stability::{
    b11, budget_curve, classify, empirical_threshold, monotonicity_check, mu_lower, mu_lower_h,
    mu_lower_r, Monotonicity, PeriodRatio,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x5eed_b10c;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} [{:.2} s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Runs `body`, failing it when it errors or exceeds `budget`.
fn timed(
    name: &'static str,
    budget: Duration,
    body: impl FnOnce() -> Result<(bool, String), String>,
) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    let elapsed = start.elapsed();
    let over = elapsed > budget;
    let detail = if over { format!("{detail}; over time budget {budget:?}") } else { detail };
    Outcome { name, passed: passed && !over, detail, elapsed }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_schedule(t_r: f64, mu: f64) -> ImpulseParams {
    ImpulseParams::new(1.0, 0.5, 0.5, 1.0, t_r, mu).expect("valid")
}

fn lotka_volterra() -> ResponseModel {
    ResponseModel::lotka_volterra(1.0, 1.0, 1.0)
}

fn schedule(t_h: f64, k: u32, harvest_multiple: bool) -> f64 {
    if harvest_multiple {
        t_h / f64::from(k)
    } else {
        t_h * f64::from(k)
    }
}

fn quadrature(sol: &PeriodicSolution) -> Result<f64, String> {
    integrate_with_breaks(|t| sol.eval(t).unwrap_or(f64::NAN), &sol.breakpoints(), 1e-14, 1e-12)
        .map_err(|e| e.to_string())
}

/// Closed-form period integrals against adaptive quadrature of the
/// periodic evaluators.
pub fn integrals(rng: &mut ChaCha8Rng, draws_per_regime: usize) -> Outcome {
    timed("closed-form integrals vs quadrature", Duration::from_secs(5), || {
        let mut worst: f64 = 0.0;
        for harvest_multiple in [true, false] {
            for _ in 0..draws_per_regime {
                let d = rng.gen_range(0.1..=3.0);
                let alpha = rng.gen_range(0.0..=0.95);
                let t_h = rng.gen_range(0.2..=5.0);
                let k = if harvest_multiple { rng.gen_range(1..=5) } else { rng.gen_range(2..=5) };
                let mu = rng.gen_range(0.1..=5.0);
                let p = ImpulseParams::new(d, alpha, alpha, t_h, schedule(t_h, k, harvest_multiple), mu)
                    .map_err(|e| e.to_string())?;
                let sol = PeriodicSolution::new(&p).map_err(|e| e.to_string())?;
                let q = quadrature(&sol)?;
                worst = worst.max((sol.integral() - q).abs() / q);
            }
        }
        Ok((worst < 1e-8, format!("{} draws, max rel err {worst:.2e} (tol 1e-8)", 2 * draws_per_regime)))
    })
}

fn convergence_cases(rng: &mut ChaCha8Rng, random_sets: usize) -> Vec<ImpulseParams> {
    let mut cases = vec![unit_schedule(1.0, 1.0), unit_schedule(1.0 / 3.0, 1.0), unit_schedule(2.0, 0.5)];
    for _ in 0..random_sets {
        let harvest_multiple = rng.gen_bool(0.5);
        let k = if harvest_multiple { rng.gen_range(1..=4) } else { rng.gen_range(2..=3) };
        let t_h = rng.gen_range(0.5..=2.0);
        let p = ImpulseParams::new(
            rng.gen_range(0.5..=2.0),
            rng.gen_range(0.0..=0.9),
            rng.gen_range(0.0..=0.8),
            t_h,
            schedule(t_h, k, harvest_multiple),
            rng.gen_range(0.1..=5.0),
        );
        cases.push(p.expect("valid"));
    }
    cases
}

/// Per-period contraction of the pest-free post-coinciding map.
pub fn contraction_factor(p: &ImpulseParams) -> f64 {
    match p.regime() {
        Regime::ReleaseMultiple(k) => (1.0 - p.alpha_y).powi(k as i32) * (-p.d * p.t_r).exp(),
        _ => (1.0 - p.alpha_y) * (-p.d * p.t_h).exp(),
    }
}

/// Pest-free simulations from `0`, `y*/2` and `2 y*` converge onto the
/// closed-form periodic solution at the predicted geometric rate.
pub fn periodic_convergence(rng: &mut ChaCha8Rng, random_sets: usize) -> Outcome {
    timed("pest-free convergence to periodic solution", Duration::from_secs(10), || {
        let model = lotka_volterra();
        let (mut worst_sup, mut worst_rate): (f64, f64) = (0.0, 0.0);
        let cases = convergence_cases(rng, random_sets);
        for p in &cases {
            let sol = PeriodicSolution::new(p).map_err(|e| e.to_string())?;
            let period = sol.period();
            let periods = (40.0 / (p.d * period)).ceil();
            let dt = 1e-3 * p.base_period();
            let expected_rate = contraction_factor(p);
            for y0 in [0.0, 0.5 * sol.y_star, 2.0 * sol.y_star] {
                let warm = simulate_with(
                    &model,
                    p,
                    State::new(0.0, y0),
                    periods * period,
                    dt,
                    SimOptions { sample_stride: 0 },
                )
                .map_err(|e| e.to_string())?;
                let mut errors = vec![y0 - sol.y_star];
                errors.extend(
                    warm.impulses
                        .iter()
                        .filter(|i| i.kind == EventKind::Coinciding)
                        .map(|i| i.post.y - sol.y_star),
                );
                if y0 != sol.y_star {
                    let rate = errors[1] / errors[0];
                    worst_rate = worst_rate.max((rate / expected_rate - 1.0).abs());
                }

                let last = simulate_with(&model, p, warm.final_state(), period, dt, SimOptions::default())
                    .map_err(|e| e.to_string())?;
                for row in last.rows() {
                    let reference = if row.t >= period {
                        sol.y_star
                    } else {
                        sol.eval(row.t).map_err(|e| e.to_string())?
                    };
                    // pre-impulse rows are left limits
                    let reference = match row.event {
                        Some((_, false)) => pre_impulse_value(&sol, row.t),
                        _ => reference,
                    };
                    worst_sup = worst_sup.max((row.y - reference).abs());
                }
            }
        }
        let passed = worst_sup < 1e-6 && worst_rate < 0.05;
        Ok((
            passed,
            format!(
                "{} parameter sets x 3 starts, sup err {worst_sup:.2e} (tol 1e-6), contraction deviation {:.2}% (tol 5%)",
                cases.len(),
                100.0 * worst_rate
            ),
        ))
    })
}

/// Left limit of the periodic solution at an impulse instant `t`.
fn pre_impulse_value(sol: &PeriodicSolution, t: f64) -> f64 {
    let p = &sol.params;
    let step = match sol.regime {
        Regime::HarvestMultiple(_) => p.t_r,
        _ => p.t_h,
    };
    sol.eval((t - step).max(0.0)).unwrap_or(f64::NAN) * (-p.d * step).exp()
}

/// Unit pest multiplier at the local threshold, and the empirical
/// threshold from nonlinear simulation against the formula.
pub fn threshold_consistency(rng: &mut ChaCha8Rng, draws_per_regime: usize) -> Outcome {
    timed("threshold consistency", Duration::from_secs(60), || {
        let mut worst_b11: f64 = 0.0;
        let mut drawn = 0;
        for harvest_multiple in [true, false] {
            let mut accepted = 0;
            while accepted < draws_per_regime {
                let model = ResponseModel::lotka_volterra(
                    rng.gen_range(0.2..=3.0),
                    rng.gen_range(0.2..=3.0),
                    rng.gen_range(0.2..=3.0),
                );
                let t_h = rng.gen_range(0.2..=5.0);
                let k = if harvest_multiple { rng.gen_range(1..=5) } else { rng.gen_range(2..=5) };
                let p = ImpulseParams::new(
                    rng.gen_range(0.1..=3.0),
                    rng.gen_range(0.0..=0.95),
                    rng.gen_range(0.0..=0.95),
                    t_h,
                    schedule(t_h, k, harvest_multiple),
                    0.0,
                )
                .map_err(|e| e.to_string())?;
                let der = derivatives_at_zero(&model).map_err(|e| e.to_string())?;
                let threshold =
                    mu_lower(der.fp0 / der.gp0, der.gp0, &p).map_err(|e| e.to_string())?;
                if threshold.trivial {
                    continue;
                }
                let b = b11(&model, &p.with_mu(threshold.mu)).map_err(|e| e.to_string())?;
                worst_b11 = worst_b11.max((b.abs() - 1.0).abs());
                accepted += 1;
                drawn += 1;
            }
        }

        let lv = lotka_volterra();
        let mut worst_emp: f64 = 0.0;
        let mut anchors = Vec::new();
        for t_r in [1.0, 0.5, 1.0 / 3.0, 2.0, 3.0] {
            let p = unit_schedule(t_r, 0.0);
            let formula = mu_lower(1.0, 1.0, &p).map_err(|e| e.to_string())?.mu;
            let empirical = empirical_threshold(&lv, &p, (0.1, 1.0)).map_err(|e| e.to_string())?;
            worst_emp = worst_emp.max((empirical / formula - 1.0).abs());
            anchors.push(formula);
        }
        let anchors_ok = (anchors[0] - 0.396_143).abs() < 5e-7 && (anchors[1] - 0.437_430).abs() < 5e-7;
        let passed = worst_b11 < 1e-9 && worst_emp < 0.02 && anchors_ok;
        Ok((
            passed,
            format!(
                "{drawn} draws max ||B11|-1| {worst_b11:.1e} (tol 1e-9); empirical vs formula max {:.4}% (tol 2%); anchors k=1 {:.6}, k=2 {:.6}",
                100.0 * worst_emp,
                anchors[0],
                anchors[1]
            ),
        ))
    })
}

fn min_pest(model: &ResponseModel, p: &ImpulseParams, start: State, t_end: f64) -> Result<f64, String> {
    let trace = simulate_with(model, p, start, t_end, 1e-3 * p.base_period(), SimOptions::default())
        .map_err(|e| e.to_string())?;
    Ok(trace.rows().map(|r| r.x).fold(f64::INFINITY, f64::min))
}

/// Extinction above the global threshold from a grid of starts, and
/// persistence of a small seed below the local threshold.
pub fn gas_and_instability(horizon: f64) -> Outcome {
    timed("global stability and instability by simulation", Duration::from_secs(30), || {
        let lv = lotka_volterra();
        let base = unit_schedule(1.0, 0.0);
        let report = classify(&lv, &base).map_err(|e| e.to_string())?;
        let above = base.with_mu(1.1 * report.mu_lower_global);
        let y_star = PeriodicSolution::new(&above).map_err(|e| e.to_string())?.y_star;
        let mut extinct = 0;
        let mut highest_min: f64 = 0.0;
        for x0 in [0.1, 1.0, 5.0] {
            for y0 in [0.0, y_star, 3.0 * y_star] {
                let trace = simulate_with(
                    &lv,
                    &above,
                    State::new(x0, y0),
                    horizon,
                    1e-3,
                    SimOptions::default(),
                )
                .map_err(|e| e.to_string())?;
                if detect_extinction(&trace, 1e-6, 0.0).map_err(|e| e.to_string())?.is_some() {
                    extinct += 1;
                }
                highest_min = highest_min.max(trace.rows().map(|r| r.x).fold(f64::INFINITY, f64::min));
            }
        }

        let below = base.with_mu(0.9 * report.mu_lower_local);
        let y_star = PeriodicSolution::new(&below).map_err(|e| e.to_string())?.y_star;
        let seed_min = min_pest(&lv, &below, State::new(1e-6, y_star), horizon)?;
        let passed = extinct == 9 && seed_min > 1e-8;
        Ok((
            passed,
            format!(
                "mu=1.1*{:.6}: {extinct}/9 starts below 1e-6 by t={horizon} (largest minimum {highest_min:.2e}); mu=0.9*{:.6}: seed minimum {seed_min:.2e} (needs > 1e-8)",
                report.mu_lower_global, report.mu_lower_local
            ),
        ))
    })
}

/// Budget curve over release-to-harvest ratios: plateau at and above 1,
/// strictly falling toward 1 from below, and continuity at 1.
pub fn budget_curve_shape() -> Outcome {
    timed("budget curve shape", Duration::from_secs(1), || {
        let ratios: Vec<PeriodRatio> = [5, 4, 3, 2]
            .into_iter()
            .map(PeriodRatio::Fraction)
            .chain((1..=5).map(PeriodRatio::Multiple))
            .collect();
        let rows = budget_curve(&lotka_volterra(), &unit_schedule(1.0, 0.0), &ratios).map_err(|e| e.to_string())?;
        let plateau_bits = rows[5].mu_local.to_bits();
        let plateau = rows[5..].iter().all(|r| r.mu_local.to_bits() == plateau_bits);
        let falling = rows[..5].windows(2).all(|w| w[0].mu_local > w[1].mu_local);
        let p = unit_schedule(1.0, 0.0);
        let h1 = mu_lower_h(1.0, 1.0, &p).map_err(|e| e.to_string())?.mu;
        let r1 = mu_lower_r(1.0, 1.0, &unit_schedule(2.0, 0.0)).map_err(|e| e.to_string())?.mu;
        let gap = (h1 - r1).abs();
        let exact_at_one = rows[4].mu_local.to_bits() == plateau_bits;
        Ok((
            plateau && falling && gap <= 1e-12,
            format!(
                "plateau over ratios 2..5 bit-identical: {plateau} (ratio 1 also bit-identical: {exact_at_one}); strictly falling below 1: {falling}; |mu_h(1) - mu_r| = {gap:.1e}; curve {}",
                rows.iter().map(|r| format!("{:.6}", r.mu_local)).collect::<Vec<_>>().join(" ")
            ),
        ))
    })
}

/// The harvest-multiple threshold strictly increases with the number of
/// releases per harvest.
pub fn monotonicity(rng: &mut ChaCha8Rng, draws: usize) -> Outcome {
    timed("threshold increasing in releases per harvest", Duration::from_secs(1), || {
        let mut accepted = 0;
        let mut violations = Vec::new();
        while accepted < draws {
            let t_h = rng.gen_range(0.2..=5.0);
            let p = ImpulseParams::new(
                rng.gen_range(0.1..=3.0),
                rng.gen_range(0.0..=0.95),
                rng.gen_range(0.0..=0.95),
                t_h,
                t_h,
                0.0,
            )
            .map_err(|e| e.to_string())?;
            let (s, r) = (rng.gen_range(0.2..=3.0), rng.gen_range(0.2..=3.0));
            match monotonicity_check(&p, s, r, 50) {
                Ok(Monotonicity::Holds) => {}
                Ok(Monotonicity::ViolatedAt(k)) => violations.push(format!("k={k} for {p:?}")),
                Err(_) => continue,
            }
            accepted += 1;
        }
        Ok((
            violations.is_empty(),
            if violations.is_empty() {
                format!("{draws} parameter sets, k = 1..50")
            } else {
                format!("violations: {}", violations.join("; "))
            },
        ))
    })
}

/// Expressions over the full grammar, printed and reparsed.
pub const ROUND_TRIP_CORPUS: &[&str] = &[
    "x",
    "0",
    "-x",
    "--x",
    "1 - exp(-2*x)",
    "x*(1 - x/10)",
    "x/(1 + x)",
    "2*x/(1 + 0.5*x)",
    "2^3^2",
    "(2^3)^2",
    "-2^2",
    "(-2)^2",
    "2^-x",
    "x^-2^x",
    "1 - 2 - 3",
    "1 - (2 - 3)",
    "8/4/2",
    "8/(4/2)",
    "sqrt(x)*ln(1 + x)",
    "abs(x - 3) + min(x, 2)",
    "max(min(x, 1), -1)",
    "exp(-x^2/2)",
    "x*exp(1 - x)",
    "1.5e-3*x + 2.5E2",
    "-(x + 1)*-(x - 1)",
    "x - -x",
    "((((x))))",
    "3*x^2 - 2*x + 1",
    "x/(1 + x^2)^0.5",
    "ln(exp(x)) - x",
    "-min(-x, x)^2",
    "+x + +1",
    "x^(1/3)",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Op(char),
    Neg,
    Open,
    Close,
}

fn prec(t: Tok) -> (u8, bool) {
    match t {
        Tok::Op('+') | Tok::Op('-') => (1, false),
        Tok::Op('*') | Tok::Op('/') => (2, false),
        Tok::Neg => (3, true),
        Tok::Op('^') => (4, true),
        _ => (0, false),
    }
}

/// Random constant expression: operands with optional unary minus and
/// occasional parenthesized groups.
fn random_tokens(rng: &mut ChaCha8Rng, depth: u32, out: &mut Vec<Tok>) {
    let operands = rng.gen_range(1..=4);
    for i in 0..operands {
        if i > 0 {
            let op = ['+', '-', '*', '/', '^'][rng.gen_range(0..5)];
            out.push(Tok::Op(op));
        }
        if rng.gen_bool(0.25) {
            out.push(Tok::Neg);
        }
        if depth > 0 && rng.gen_bool(0.25) {
            out.push(Tok::Open);
            random_tokens(rng, depth - 1, out);
            out.push(Tok::Close);
        } else if rng.gen_bool(0.5) {
            out.push(Tok::Num(f64::from(rng.gen_range(1..=9))));
        } else {
            out.push(Tok::Num(f64::from(rng.gen_range(1..=400)) / 100.0));
        }
    }
}

fn render(tokens: &[Tok], rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    for t in tokens {
        if rng.gen_bool(0.5) {
            s.push(' ');
        }
        match t {
            Tok::Num(v) => s.push_str(&v.to_string()),
            Tok::Op(c) => s.push(*c),
            Tok::Neg => s.push('-'),
            Tok::Open => s.push('('),
            Tok::Close => s.push(')'),
        }
    }
    s
}

/// Shunting-yard conversion to postfix under the documented precedence
/// table, independent of the parser.
fn to_postfix(tokens: &[Tok]) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut stack: Vec<Tok> = Vec::new();
    for &t in tokens {
        match t {
            Tok::Num(_) => out.push(t),
            Tok::Neg | Tok::Open => stack.push(t),
            Tok::Close => {
                while let Some(top) = stack.pop() {
                    if top == Tok::Open {
                        break;
                    }
                    out.push(top);
                }
            }
            Tok::Op(_) => {
                let (p, right) = prec(t);
                while let Some(&top) = stack.last() {
                    let (q, _) = prec(top);
                    if top != Tok::Open && (q > p || (q == p && !right)) {
                        out.push(stack.pop().expect("non-empty"));
                    } else {
                        break;
                    }
                }
                stack.push(t);
            }
        }
    }
    while let Some(top) = stack.pop() {
        out.push(top);
    }
    out
}

/// Evaluates postfix and renders the fully parenthesized form. Any
/// non-finite intermediate makes the value NaN.
fn eval_postfix(postfix: &[Tok]) -> (f64, String) {
    let mut stack: Vec<(f64, String)> = Vec::new();
    let mut finite = true;
    for &t in postfix {
        match t {
            Tok::Num(v) => stack.push((v, format!("{v}"))),
            Tok::Neg => {
                let (v, s) = stack.pop().expect("operand");
                stack.push((-v, format!("(-{s})")));
            }
            Tok::Op(c) => {
                let (b, sb) = stack.pop().expect("operand");
                let (a, sa) = stack.pop().expect("operand");
                let v = match c {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                };
                finite &= v.is_finite();
                stack.push((v, format!("({sa} {c} {sb})")));
            }
            Tok::Open | Tok::Close => unreachable!("no parentheses in postfix"),
        }
    }
    let (v, s) = stack.pop().expect("result");
    (if finite { v } else { f64::NAN }, s)
}

/// Round-trip corpus plus agreement with the shunting-yard oracle on
/// random constant expressions.
pub fn parser_suite(rng: &mut ChaCha8Rng, random_exprs: usize) -> Outcome {
    timed("expression parser", Duration::from_secs(1), || {
        let mut failures = Vec::new();
        let mut round_trips = 0;
        for src in ROUND_TRIP_CORPUS {
            match parse(src) {
                Err(e) => failures.push(format!("{src:?}: {e}")),
                Ok(tree) => {
                    let printed = tree.to_string();
                    match parse(&printed) {
                        Ok(back) if back == tree => round_trips += 1,
                        Ok(back) => failures.push(format!("{src:?} -> {printed:?} -> {back:?}")),
                        Err(e) => failures.push(format!("{src:?} -> {printed:?}: {e}")),
                    }
                }
            }
        }
        let mut agreed = 0;
        while agreed < random_exprs {
            let mut tokens = Vec::new();
            random_tokens(rng, 2, &mut tokens);
            let (expected, full) = eval_postfix(&to_postfix(&tokens));
            if !expected.is_finite() || expected.abs() > 1e12 {
                continue;
            }
            let src = render(&tokens, rng);
            for text in [&src, &full] {
                match parse(text).map_err(|e| e.to_string()).and_then(|e| e.eval(0.0).map_err(|e| e.to_string())) {
                    Ok(v) if (v - expected).abs() <= 1e-12 * expected.abs().max(1.0) => {}
                    other => failures.push(format!("{text:?}: {other:?}, oracle {expected}")),
                }
            }
            agreed += 1;
        }
        Ok((
            failures.is_empty() && round_trips >= 30,
            if failures.is_empty() {
                format!("{round_trips} round trips, {random_exprs} random expressions agree with oracle")
            } else {
                format!("{} failures, first: {}", failures.len(), failures[0])
            },
        ))
    })
}

/// `mu_lower_h` at one release per harvest against `mu_lower_r`.
pub fn continuity_at_ratio_one(rng: &mut ChaCha8Rng, draws: usize) -> Outcome {
    timed("continuity at ratio 1", Duration::from_secs(1), || {
        let mut worst: f64 = 0.0;
        for _ in 0..draws {
            let t_h = rng.gen_range(0.2..=5.0);
            let p = ImpulseParams::new(
                rng.gen_range(0.1..=3.0),
                rng.gen_range(0.0..=0.95),
                rng.gen_range(0.0..=0.95),
                t_h,
                t_h,
                0.0,
            )
            .map_err(|e| e.to_string())?;
            let (s, r) = (rng.gen_range(0.2..=3.0), rng.gen_range(0.2..=3.0));
            let h = mu_lower_h(s, r, &p).map_err(|e| e.to_string())?.mu;
            let release = mu_lower_r(s, r, &p.with_release_period(2.0 * t_h)).map_err(|e| e.to_string())?.mu;
            worst = worst.max((h - release).abs() / release.max(1.0));
        }
        Ok((worst <= 1e-12, format!("{draws} draws, max gap {worst:.1e} (tol 1e-12)")))
    })
}

fn affine_fixed_point(p: &ImpulseParams) -> f64 {
    let keep = 1.0 - p.alpha_y;
    let dose = p.mu * p.t_r;
    let step = |y0: f64| match p.regime() {
        Regime::HarvestMultiple(k) => {
            let mut y = y0;
            for _ in 1..k {
                y = y * (-p.d * p.t_r).exp() + dose;
            }
            keep * y * (-p.d * p.t_r).exp() + dose
        }
        Regime::ReleaseMultiple(k) => {
            let mut y = y0;
            for _ in 0..k {
                y *= keep * (-p.d * p.t_h).exp();
            }
            y + dose
        }
        Regime::Incommensurate => f64::NAN,
    };
    let mut y = 0.0;
    for _ in 0..100_000 {
        let next = step(y);
        if (next - y).abs() <= 1e-15 * next.abs() {
            return next;
        }
        y = next;
    }
    y
}

/// Closed-form `y*` against iteration of the one-period map.
pub fn fixed_points(rng: &mut ChaCha8Rng, draws: usize) -> Outcome {
    timed("fixed points vs map iteration", Duration::from_secs(1), || {
        let mut worst: f64 = 0.0;
        for i in 0..draws {
            let t_h = rng.gen_range(0.2..=5.0);
            let harvest_multiple = i % 2 == 0;
            let k = if harvest_multiple { rng.gen_range(1..=5) } else { rng.gen_range(2..=5) };
            let p = ImpulseParams::new(
                rng.gen_range(0.1..=3.0),
                rng.gen_range(0.0..=0.95),
                rng.gen_range(0.0..=0.95),
                t_h,
                schedule(t_h, k, harvest_multiple),
                rng.gen_range(0.1..=5.0),
            )
            .map_err(|e| e.to_string())?;
            let sol = PeriodicSolution::new(&p).map_err(|e| e.to_string())?;
            worst = worst.max((sol.y_star - affine_fixed_point(&p)).abs() / sol.y_star);
        }
        Ok((worst <= 1e-12, format!("{draws} draws, max rel err {worst:.1e} (tol 1e-12)")))
    })
}

/// Built-in families pass the model checks, a quadratic predation term
/// fails them, and an optional user model is screened.
pub fn hypotheses(user: Option<&ResponseModel>) -> Outcome {
    timed("response model checks", Duration::from_secs(5), || {
        let mut notes = Vec::new();
        let mut passed = true;
        let builtins = [
            ("lotka_volterra", lotka_volterra()),
            ("logistic_holling", ResponseModel::logistic_holling(1.0, 10.0, 1.0, 1.0, 1.0)),
        ];
        for (name, model) in &builtins {
            let report = validate_hypotheses(model, 1000).map_err(|e| e.to_string())?;
            let sup = estimate_sup_ratios(model, 1000).map_err(|e| e.to_string())?;
            let ordered = sup.s_global >= sup.s_local - 1e-9 && sup.r_global >= sup.r_local - 1e-9;
            passed &= report.all_passed() && ordered;
            notes.push(format!("{name}: {}", if report.all_passed() && ordered { "ok" } else { "failed" }));
        }
        let quadratic = ResponseModel::new(
            ResponseFn::Linear { slope: 1.0 },
            parse("x^2").map_err(|e| e.to_string())?.into(),
            ResponseFn::Linear { slope: 1.0 },
        );
        let report = validate_hypotheses(&quadratic, 1000).map_err(|e| e.to_string())?;
        let caught = report.get("g'(0) > 0").is_some_and(|c| !c.passed);
        passed &= caught;
        notes.push(format!("g = x^2 rejected: {caught}"));
        if let Some(model) = user {
            let report = validate_hypotheses(model, 1000).map_err(|e| e.to_string())?;
            passed &= report.all_passed();
            let failed: Vec<&str> = report.failures().map(|c| c.name).collect();
            notes.push(if failed.is_empty() {
                "configured model: ok".to_string()
            } else {
                format!("configured model fails {}", failed.join(", "))
            });
        }
        Ok((passed, notes.join("; ")))
    })
}

/// The checks run by `verify`: reduced draw counts, all within a minute.
pub fn verify_suite(seed: u64, user: Option<&ResponseModel>) -> Vec<Outcome> {
    let mut rng = rng(seed);
    vec![
        integrals(&mut rng, 50),
        periodic_convergence(&mut rng, 2),
        budget_curve_shape(),
        continuity_at_ratio_one(&mut rng, 100),
        monotonicity(&mut rng, 20),
        parser_suite(&mut rng, 200),
        fixed_points(&mut rng, 100),
        hypotheses(user),
    ]
}
