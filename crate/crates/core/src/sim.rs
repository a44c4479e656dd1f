//! Fixed-step RK4 integration of the predator–prey flow with harvests and
//! releases applied at exactly scheduled instants.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{ImpulseParams, Regime, ResponseModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("t_end must be > 0, got {0}")]
    BadHorizon(f64),
    #[error("dt = {dt} must be > 0 and at most min(T_h, T_r)/10 = {max}")]
    BadStep { dt: f64, max: f64 },
    #[error("initial state must be finite and non-negative, got ({x}, {y})")]
    BadInitialState { x: f64, y: f64 },
    #[error("state became non-finite at t = {time}")]
    BlowUp { time: f64 },
    #[error("response evaluation failed at t = {time}: {source}")]
    Eval { time: f64, source: EvalError },
    #[error("extinction hold {hold} exceeds trace span {span}")]
    HoldTooLong { hold: f64, span: f64 },
    #[error("extinction threshold must be > 0, got {0}")]
    BadThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Harvest,
    Release,
    Coinciding,
}

impl EventKind {
    fn csv_prefix(self) -> &'static str {
        match self {
            EventKind::Harvest => "harvest",
            EventKind::Release => "release",
            EventKind::Coinciding => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpulseEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Harvest index `n` (time `n T_h`), if a harvest happens here.
    pub harvest: Option<u64>,
    /// Release index `m` (time `m T_r`), if a release happens here.
    pub release: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub fn new(x: f64, y: f64) -> Self {
        State { x, y }
    }
}

/// Impulse instants in `(0, t_end]`, strictly increasing.
///
/// Commensurate schedules are laid on the integer lattice of the shorter
/// period and coincidence is integer divisibility. Incommensurate ones merge
/// both sequences and treat `|n T_h - m T_r| < 1e-9 min(T_h, T_r)` as
/// coincident.
pub fn build_schedule(params: &ImpulseParams, t_end: f64) -> Result<Vec<ImpulseEvent>, SimError> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(SimError::BadHorizon(t_end));
    }
    let base = params.base_period();
    let limit = t_end + 1e-9 * base;
    let mut events = Vec::new();
    match params.regime() {
        Regime::HarvestMultiple(k) => {
            let k = u64::from(k);
            for m in 1u64.. {
                let t = m as f64 * params.t_r;
                if t > limit {
                    break;
                }
                if m % k == 0 {
                    let n = m / k;
                    events.push(ImpulseEvent {
                        time: n as f64 * params.t_h,
                        kind: EventKind::Coinciding,
                        harvest: Some(n),
                        release: Some(m),
                    });
                } else {
                    events.push(ImpulseEvent {
                        time: t,
                        kind: EventKind::Release,
                        harvest: None,
                        release: Some(m),
                    });
                }
            }
        }
        Regime::ReleaseMultiple(k) => {
            let k = u64::from(k);
            for n in 1u64.. {
                let t = n as f64 * params.t_h;
                if t > limit {
                    break;
                }
                if n % k == 0 {
                    let m = n / k;
                    events.push(ImpulseEvent {
                        time: m as f64 * params.t_r,
                        kind: EventKind::Coinciding,
                        harvest: Some(n),
                        release: Some(m),
                    });
                } else {
                    events.push(ImpulseEvent {
                        time: t,
                        kind: EventKind::Harvest,
                        harvest: Some(n),
                        release: None,
                    });
                }
            }
        }
        Regime::Incommensurate => {
            let tol = 1e-9 * base;
            let (mut n, mut m) = (1u64, 1u64);
            loop {
                let th = n as f64 * params.t_h;
                let tr = m as f64 * params.t_r;
                let (time, kind) = if (th - tr).abs() < tol {
                    (th, EventKind::Coinciding)
                } else if th < tr {
                    (th, EventKind::Harvest)
                } else {
                    (tr, EventKind::Release)
                };
                if time > limit {
                    break;
                }
                let harvest = (kind != EventKind::Release).then_some(n);
                let release = (kind != EventKind::Harvest).then_some(m);
                if harvest.is_some() {
                    n += 1;
                }
                if release.is_some() {
                    m += 1;
                }
                events.push(ImpulseEvent { time, kind, harvest, release });
            }
        }
    }
    Ok(events)
}

/// Jump map at an impulse instant. At a coinciding instant the harvest
/// fraction is removed before the release is added.
pub fn apply_impulse(state: State, kind: EventKind, params: &ImpulseParams) -> State {
    match kind {
        EventKind::Harvest => State {
            x: (1.0 - params.alpha_x) * state.x,
            y: (1.0 - params.alpha_y) * state.y,
        },
        EventKind::Release => State { x: state.x, y: state.y + params.mu * params.t_r },
        EventKind::Coinciding => State {
            x: (1.0 - params.alpha_x) * state.x,
            y: (1.0 - params.alpha_y) * state.y + params.mu * params.t_r,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpulseRecord {
    pub t: f64,
    pub kind: EventKind,
    pub pre: State,
    pub post: State,
}

/// Simulation output. Step samples exclude impulse instants; those are
/// carried by `impulses` as separate left (`pre`) and right (`post`) values.
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub samples: Vec<Sample>,
    pub impulses: Vec<ImpulseRecord>,
    pub params: ImpulseParams,
    /// Number of times roundoff pushed `x` or `y` below zero and was clamped.
    pub clamped: usize,
    pub first_clamp: Option<f64>,
}

/// One CSV-style row of a trace, in time order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// `None` for a plain sample, else the impulse and whether it is the
    /// post-jump row.
    pub event: Option<(EventKind, bool)>,
}

impl TraceRow {
    pub fn label(&self) -> String {
        match self.event {
            None => String::new(),
            Some((kind, post)) => {
                format!("{}_{}", kind.csv_prefix(), if post { "post" } else { "pre" })
            }
        }
    }
}

impl Trace {
    /// Samples and impulse pre/post rows merged in time order.
    pub fn rows(&self) -> impl Iterator<Item = TraceRow> + '_ {
        let mut s = self.samples.iter().peekable();
        let mut imp = self.impulses.iter().peekable();
        let mut pending_post: Option<TraceRow> = None;
        std::iter::from_fn(move || {
            if let Some(row) = pending_post.take() {
                return Some(row);
            }
            let take_sample = match (s.peek(), imp.peek()) {
                (Some(a), Some(b)) => a.t < b.t,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => return None,
            };
            if take_sample {
                let a = s.next()?;
                Some(TraceRow { t: a.t, x: a.x, y: a.y, event: None })
            } else {
                let b = imp.next()?;
                pending_post = Some(TraceRow {
                    t: b.t,
                    x: b.post.x,
                    y: b.post.y,
                    event: Some((b.kind, true)),
                });
                Some(TraceRow { t: b.t, x: b.pre.x, y: b.pre.y, event: Some((b.kind, false)) })
            }
        })
    }

    pub fn final_state(&self) -> State {
        let last_sample = self.samples.last();
        let last_impulse = self.impulses.last();
        match (last_sample, last_impulse) {
            (Some(s), Some(i)) if i.t >= s.t => i.post,
            (Some(s), _) => State::new(s.x, s.y),
            (None, Some(i)) => i.post,
            (None, None) => State::default(),
        }
    }

    pub fn t_start(&self) -> f64 {
        self.rows().next().map_or(0.0, |r| r.t)
    }

    pub fn t_end(&self) -> f64 {
        let s = self.samples.last().map_or(f64::NEG_INFINITY, |s| s.t);
        let i = self.impulses.last().map_or(f64::NEG_INFINITY, |i| i.t);
        s.max(i)
    }

    /// CSV with header `t,x,y,event`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,event\n");
        for row in self.rows() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(row.t),
                fmt_f64(row.x),
                fmt_f64(row.y),
                row.label()
            );
        }
        out
    }
}

/// Round-trip formatting used by every CSV writer in the crate.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Keep every `sample_stride`-th step; 0 keeps only the initial sample.
    pub sample_stride: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { sample_stride: 1 }
    }
}

/// Default step: `1e-3 min(T_h, T_r)`.
pub fn default_dt(params: &ImpulseParams) -> f64 {
    1e-3 * params.base_period()
}

struct Flow<'a> {
    model: &'a ResponseModel,
    d: f64,
}

impl Flow<'_> {
    #[inline]
    fn rhs(&self, s: State, t: f64) -> Result<(f64, f64), SimError> {
        let err = |source| SimError::Eval { time: t, source };
        let f = self.model.f.eval(s.x).map_err(err)?;
        let g = self.model.g.eval(s.x).map_err(err)?;
        let h = self.model.h.eval(s.x).map_err(err)?;
        Ok((f - g * s.y, h * s.y - self.d * s.y))
    }

    #[inline]
    fn rk4(&self, s: State, t: f64, h: f64) -> Result<State, SimError> {
        let (k1x, k1y) = self.rhs(s, t)?;
        let (k2x, k2y) = self.rhs(State::new(s.x + 0.5 * h * k1x, s.y + 0.5 * h * k1y), t)?;
        let (k3x, k3y) = self.rhs(State::new(s.x + 0.5 * h * k2x, s.y + 0.5 * h * k2y), t)?;
        let (k4x, k4y) = self.rhs(State::new(s.x + h * k3x, s.y + h * k3y), t)?;
        Ok(State::new(
            s.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            s.y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        ))
    }
}

pub fn simulate(
    model: &ResponseModel,
    params: &ImpulseParams,
    x0: f64,
    y0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trace, SimError> {
    simulate_with(model, params, State::new(x0, y0), t_end, dt, SimOptions::default())
}

/// Integrates from `initial` at `t = 0` (taken as a post-impulse value) to
/// `t_end`. Steps have length `dt` except the last one before each impulse,
/// which is shortened to land on the impulse instant.
pub fn simulate_with(
    model: &ResponseModel,
    params: &ImpulseParams,
    initial: State,
    t_end: f64,
    dt: f64,
    options: SimOptions,
) -> Result<Trace, SimError> {
    let max_dt = params.base_period() / 10.0;
    if !(dt > 0.0 && dt <= max_dt * (1.0 + 1e-12)) {
        return Err(SimError::BadStep { dt, max: max_dt });
    }
    let State { x, y } = initial;
    if !(x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0) {
        return Err(SimError::BadInitialState { x, y });
    }
    let schedule = build_schedule(params, t_end)?;
    let flow = Flow { model, d: params.d };

    let mut trace = Trace {
        samples: vec![Sample { t: 0.0, x, y }],
        impulses: Vec::with_capacity(schedule.len()),
        params: *params,
        clamped: 0,
        first_clamp: None,
    };
    let mut state = initial;
    let mut t = 0.0;
    let mut step_count = 0usize;

    let mut stops: Vec<(f64, Option<EventKind>)> =
        schedule.iter().map(|e| (e.time, Some(e.kind))).collect();
    if stops.last().is_none_or(|&(te, _)| te < t_end - 1e-9 * params.base_period()) {
        stops.push((t_end, None));
    }

    for (target, kind) in stops {
        while t < target {
            let remaining = target - t;
            let (h, next_t) = if remaining > dt * (1.0 + 1e-9) {
                (dt, t + dt)
            } else {
                (remaining, target)
            };
            let mut next = flow.rk4(state, t, h)?;
            if !(next.x.is_finite() && next.y.is_finite()) {
                return Err(SimError::BlowUp { time: next_t });
            }
            if next.x < 0.0 || next.y < 0.0 {
                next.x = next.x.max(0.0);
                next.y = next.y.max(0.0);
                trace.clamped += 1;
                trace.first_clamp.get_or_insert(next_t);
            }
            state = next;
            t = next_t;
            step_count += 1;
            let at_impulse = kind.is_some() && t == target;
            let keep = options.sample_stride > 0 && step_count.is_multiple_of(options.sample_stride);
            if !at_impulse && (keep || (kind.is_none() && t == target)) {
                trace.samples.push(Sample { t, x: state.x, y: state.y });
            }
        }
        if let Some(kind) = kind {
            let post = apply_impulse(state, kind, params);
            trace.impulses.push(ImpulseRecord { t: target, kind, pre: state, post });
            state = post;
        }
    }
    Ok(trace)
}

/// Earliest sampled time `t` such that `x < threshold` on every row in
/// `[t, t + hold]`.
pub fn detect_extinction(trace: &Trace, threshold: f64, hold: f64) -> Result<Option<f64>, SimError> {
    if !(threshold > 0.0) {
        return Err(SimError::BadThreshold(threshold));
    }
    let (start, end) = (trace.t_start(), trace.t_end());
    if hold > end - start {
        return Err(SimError::HoldTooLong { hold, span: end - start });
    }
    let mut run_start: Option<f64> = None;
    for row in trace.rows() {
        if row.x < threshold {
            let s = *run_start.get_or_insert(row.t);
            if row.t >= s + hold {
                return Ok(Some(s));
            }
        } else {
            run_start = None;
        }
    }
    Ok(None)
}
