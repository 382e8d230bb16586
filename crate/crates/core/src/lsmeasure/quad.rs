//! Adaptive 15-point Gauss–Kronrod quadrature on a bounded interval.
//!
//! Nodes are strictly interior, so integrable endpoint singularities are
//! fine. A non-finite value at a node splits the interval there.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

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
/// Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_INTERVALS: usize = 1 << 15;
/// Relative floor on the tolerance, below which rounding dominates.
const REL_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub err: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature on ({a}, {b}) did not converge: value {value}, error {err:.3e} after {intervals} intervals")]
    NotConverged { a: f64, b: f64, value: f64, err: f64, intervals: usize },
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("integrand failed at x = {x}: {reason}")]
    Eval { x: f64, reason: String },
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    abs: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
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
        self.err.total_cmp(&other.err)
    }
}

enum Rule {
    Done(Piece),
    Split(f64),
}

fn gk15<F: FnMut(f64) -> Result<f64, QuadError>>(f: &mut F, a: f64, b: f64) -> Result<Rule, QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let (mut k, mut g, mut abs) = (0.0, 0.0, 0.0);
    for (i, (&x, &w)) in XGK.iter().zip(&WGK).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[c] } else { &[c - h * x, c + h * x] };
        for &p in pts {
            // Nodes of tiny intervals can round onto an endpoint.
            let p = if p <= a { a.next_up() } else if p >= b { b.next_down() } else { p };
            let y = f(p)?;
            if !y.is_finite() {
                return Ok(Rule::Split(p));
            }
            k += w * y;
            abs += w * y.abs();
            if i % 2 == 1 {
                g += WG[i / 2] * y;
            }
        }
    }
    Ok(Rule::Done(Piece { a, b, value: k * h, err: ((k - g) * h).abs(), abs: abs * h.abs() }))
}

fn evaluate<F: FnMut(f64) -> Result<f64, QuadError>>(f: &mut F, a: f64, b: f64, out: &mut Vec<Piece>, depth: usize) -> Result<(), QuadError> {
    match gk15(f, a, b)? {
        Rule::Done(p) => out.push(p),
        Rule::Split(x) => {
            if depth > 64 || !(a < x && x < b) {
                return Err(QuadError::NonFinite { x });
            }
            evaluate(f, a, x, out, depth + 1)?;
            evaluate(f, x, b, out, depth + 1)?;
        }
    }
    Ok(())
}

/// Integrates `f` over `(a, b)` to absolute tolerance `tol` (or a relative
/// floor of `1e-13` of `∫|f|`), with at most `max_intervals` subintervals.
pub fn integrate<F: FnMut(f64) -> Result<f64, QuadError>>(mut f: F, a: f64, b: f64, tol: f64, max_intervals: usize) -> Result<Quadrature, QuadError> {
    if a == b {
        return Ok(Quadrature { value: 0.0, err: 0.0, intervals: 0 });
    }
    let mut first = Vec::new();
    evaluate(&mut f, a, b, &mut first, 0)?;
    let mut heap: BinaryHeap<Piece> = first.into_iter().collect();
    loop {
        let (value, err, abs) = heap.iter().fold((0.0, 0.0, 0.0), |(v, e, s), p| (v + p.value, e + p.err, s + p.abs));
        if err <= tol.max(REL_FLOOR * abs) {
            return Ok(Quadrature { value: sum_sorted(&heap), err, intervals: heap.len() });
        }
        if heap.len() >= max_intervals {
            return Err(QuadError::NotConverged { a, b, value, err, intervals: heap.len() });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            return Err(QuadError::NotConverged { a, b, value, err, intervals: heap.len() + 1 });
        }
        let mut kids = Vec::new();
        evaluate(&mut f, worst.a, mid, &mut kids, 0)?;
        evaluate(&mut f, mid, worst.b, &mut kids, 0)?;
        heap.extend(kids);
    }
}

/// Sum in interval order, so the result does not depend on heap layout.
fn sum_sorted(heap: &BinaryHeap<Piece>) -> f64 {
    let mut ps: Vec<(f64, f64)> = heap.iter().map(|p| (p.a, p.value)).collect();
    ps.sort_by(|x, y| x.0.total_cmp(&y.0));
    neumaier(ps.into_iter().map(|p| p.1))
}

/// Compensated sum.
pub fn neumaier(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}
