//! Adaptive Gauss–Kronrod (7/15) quadrature with caller-supplied breakpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
    #[error("tolerance {tol:e} not reached after {evals} evaluations (estimate {estimate}, error {error:e})")]
    NoConvergence {
        tol: f64,
        evals: usize,
        estimate: f64,
        error: f64,
    },
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_EVALS: usize = 2_000_000;

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite(x))
        }
    };
    let fc = eval(centre)?;
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = eval(centre - dx)? + eval(centre + dx)?;
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Ok((kron * half, ((kron - gauss) * half).abs()))
}

/// Integrates `f` over `[a, b]` within absolute tolerance `abs_tol` or
/// relative tolerance `rel_tol`, whichever is looser.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    integrate_with_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// Integrates over consecutive segments of `breaks`. Put discontinuities of
/// the integrand at breakpoints; nodes never touch segment endpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error) = kronrod(&f, w[0], w[1])?;
            heap.push(Segment { a: w[0], b: w[1], value, error });
        }
    }
    let mut evals = 15 * heap.len();
    let mut total: f64 = heap.iter().map(|s| s.value).sum();
    let mut error: f64 = heap.iter().map(|s| s.error).sum();
    loop {
        let tol = abs_tol.max(rel_tol * total.abs());
        if error <= tol {
            // re-sum to shed the drift of the running totals
            return Ok(heap.iter().map(|s| s.value).sum());
        }
        if evals > MAX_EVALS {
            return Err(QuadError::NoConvergence { tol, evals, estimate: total, error });
        }
        let Some(seg) = heap.pop() else {
            return Ok(0.0);
        };
        total -= seg.value;
        error -= seg.error;
        let mid = 0.5 * (seg.a + seg.b);
        for (a, b) in [(seg.a, mid), (mid, seg.b)] {
            let (value, err) = kronrod(&f, a, b)?;
            total += value;
            error += err;
            heap.push(Segment { a, b, value, error: err });
        }
        evals += 30;
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}
