//! Summation and quadrature rules.
//!
//! Closed smooth curves use the periodic trapezoid rule, which converges
//! spectrally. Integrands with endpoint or interior power singularities use
//! globally adaptive 7/15-point Gauss-Kronrod with user breakpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Pairwise (cascade) summation; the result depends only on the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Periodic trapezoid rule for `f` on `[0, period)` with `n` nodes.
pub fn periodic_trapezoid(n: usize, period: f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = period / n as f64;
    let vals: Vec<f64> = (0..n).map(|i| f(i as f64 * h)).collect();
    h * pairwise_sum(&vals)
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    let value = k * h;
    let error = ((k - g) * h).abs();
    Piece {
        a,
        b,
        value,
        error: if error.is_finite() { error } else { f64::INFINITY },
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subintervals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subintervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_subintervals: 1 << 20,
        }
    }
}

/// Globally adaptive Gauss-Kronrod on `[a, b]`, splitting first at
/// `breakpoints` (points outside `(a, b)` are ignored). The integrand is never
/// evaluated at an endpoint or breakpoint.
pub fn adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: AdaptiveOptions,
) -> Integral {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap: BinaryHeap<Piece> = cuts.windows(2).map(|w| kronrod(&f, w[0], w[1])).collect();
    let mut total: f64 = heap.iter().map(|p| p.value).sum();
    let mut err: f64 = heap.iter().map(|p| p.error).sum();
    let mut converged = false;
    while heap.len() < opts.max_subintervals {
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            converged = true;
            break;
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval exhausted at machine resolution
            heap.push(Piece { error: 0.0, ..worst });
            err -= worst.error;
            continue;
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    let mut pieces = heap.into_vec();
    pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
    let values: Vec<f64> = pieces.iter().map(|p| p.value).collect();
    let errors: Vec<f64> = pieces.iter().map(|p| p.error).collect();
    let value = pairwise_sum(&values);
    let error = pairwise_sum(&errors);
    Integral {
        value,
        error,
        subintervals: pieces.len(),
        converged: converged || error <= opts.abs_tol.max(opts.rel_tol * value.abs()),
    }
}
