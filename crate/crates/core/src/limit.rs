//! Numeric limits along geometric sample schedules.
//!
//! A limit is estimated from samples `y_k = phi(x_k)` where `x_k` approaches
//! the limit point geometrically (`h_k = h0 * 2^-k` toward a finite point,
//! `x0 * 2^k` toward infinity). Several extrapolation tables are built over
//! the samples; the limit is accepted as soon as three consecutive entries of
//! any table agree within the tolerance. Failing that, the raw tail is
//! classified as divergent, oscillating (`no_limit`) or inconclusive.

use serde::Serialize;

use crate::extreal::ExtReal;
use crate::tol::Tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitStatus {
    Converged,
    DivergedPos,
    DivergedNeg,
    NoLimit,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub status: LimitStatus,
    /// Present for converged and diverged estimates.
    pub value: Option<ExtReal>,
    pub err_estimate: f64,
    pub samples_used: usize,
    /// For `no_limit`: estimates of the two separated subsequences.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsequences: Option<(f64, f64)>,
    /// Last finite raw sample, kept for diagnostics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_sample: Option<f64>,
}

impl LimitEstimate {
    pub fn is_converged(&self) -> bool {
        self.status == LimitStatus::Converged
    }

    /// Converged or diverged.
    pub fn has_value(&self) -> bool {
        self.value.is_some()
    }

    /// Exactly-known value (used by shortcuts that bypass sampling).
    pub fn exact(v: ExtReal) -> LimitEstimate {
        let status = match v {
            ExtReal::PosInf => LimitStatus::DivergedPos,
            ExtReal::NegInf => LimitStatus::DivergedNeg,
            ExtReal::Finite(_) => LimitStatus::Converged,
        };
        LimitEstimate {
            status,
            value: Some(v),
            err_estimate: 0.0,
            samples_used: 0,
            subsequences: None,
            last_sample: v.finite(),
        }
    }

    /// Agreement with another estimate: both converged within `tol`, or both
    /// diverged toward the same infinity.
    pub fn agrees_with(&self, other: &LimitEstimate, tol: Tolerance) -> bool {
        match (self.value, other.value) {
            (Some(a), Some(b)) => a.close_to(b, tol.rtol, tol.atol),
            _ => false,
        }
    }
}

/// Where the sample points go.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Approach {
    /// `x - h0 * 2^-k`
    FromLeft { x: f64, h0: f64 },
    /// `x + h0 * 2^-k`
    FromRight { x: f64, h0: f64 },
    /// `x0 * 2^k` with `x0 > 0`
    PosInf { x0: f64 },
    /// `-x0 * 2^k` with `x0 > 0`
    NegInf { x0: f64 },
}

impl Approach {
    pub fn point(&self, k: usize) -> f64 {
        let s = (-(k as i32) as f64).exp2();
        match *self {
            Approach::FromLeft { x, h0 } => x - h0 * s,
            Approach::FromRight { x, h0 } => x + h0 * s,
            Approach::PosInf { x0 } => x0 / s,
            Approach::NegInf { x0 } => -x0 / s,
        }
    }

    /// Sample points, truncated where they stop being distinct in f64.
    pub fn points(&self, max_k: usize) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(max_k + 1);
        for k in 0..=max_k {
            let p = self.point(k);
            let target = match *self {
                Approach::FromLeft { x, .. } | Approach::FromRight { x, .. } => x,
                _ => f64::NAN,
            };
            if !p.is_finite() || p == target || out.last() == Some(&p) {
                break;
            }
            out.push(p);
        }
        out
    }
}

/// Estimation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEngine {
    pub tol: Tolerance,
    /// Largest `k` for schedules toward a finite point.
    pub max_k_finite: usize,
    /// Largest `k` for schedules toward an infinite point.
    pub max_k_infinite: usize,
}

impl Default for LimitEngine {
    fn default() -> Self {
        LimitEngine {
            tol: Tolerance::LIMIT,
            max_k_finite: 60,
            max_k_infinite: 20,
        }
    }
}

/// Raw window length for divergence classification.
const DIVERGENCE_WINDOW: usize = 8;
/// Epsilon extrapolants need both tail classifiers to have enough samples.
const MIN_EPSILON_SAMPLES: usize = 9;
/// Consecutive increments must not shrink faster than this for divergence.
const DIVERGENCE_RATIO: f64 = 0.99;

/// How far sample noise may exceed the tolerance in an accepted window.
const NOISE_MARGIN: f64 = 100.0;

const RICHARDSON_ORDERS: [i32; 8] = [1, 1, 2, 2, 3, 3, 4, 4];
/// A full power series in the step, as for ratios of smooth differences.
const POWER_ORDERS: [i32; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

impl LimitEngine {
    pub fn with_tol(tol: Tolerance) -> LimitEngine {
        LimitEngine { tol, ..LimitEngine::default() }
    }

    pub fn max_k(&self, approach: &Approach) -> usize {
        match approach {
            Approach::FromLeft { .. } | Approach::FromRight { .. } => self.max_k_finite,
            _ => self.max_k_infinite,
        }
    }

    /// Samples `phi` along `approach`. `phi` returns `None` when the sample
    /// cannot be produced at all (e.g. a family horizon is exhausted), which
    /// ends the schedule; failed evaluations should be reported as NaN.
    pub fn limit(&self, approach: Approach, mut phi: impl FnMut(f64) -> Option<f64>) -> LimitEstimate {
        let points = approach.points(self.max_k(&approach));
        self.run(points.into_iter().map_while(|p| phi(p).map(|y| (y, 0.0))), &[&RICHARDSON_ORDERS])
    }

    /// Like [`LimitEngine::limit`], with `phi` also returning a bound on the
    /// rounding error of each sample. Agreement is judged to within that
    /// noise (propagated through the extrapolation tables), so a sequence
    /// swamped by rounding is not mistaken for a converged one. The samples
    /// are also extrapolated as a full power series in the step, which suits
    /// difference quotients.
    pub fn limit_noisy(&self, approach: Approach, phi: impl FnMut(f64) -> Option<(f64, f64)>) -> LimitEstimate {
        let points = approach.points(self.max_k(&approach));
        self.run(points.into_iter().map_while(phi), &[&RICHARDSON_ORDERS, &POWER_ORDERS])
    }

    /// Limit of an already-materialized sequence.
    pub fn from_samples(&self, ys: &[f64]) -> LimitEstimate {
        self.run(ys.iter().map(|&y| (y, 0.0)), &[&RICHARDSON_ORDERS])
    }

    fn run(&self, samples: impl Iterator<Item = (f64, f64)>, tables: &[&[i32]]) -> LimitEstimate {
        let mut ys: Vec<f64> = Vec::new();
        let mut noise: Vec<f64> = Vec::new();
        for (y, n) in samples {
            ys.push(y);
            noise.push(n);
            if let Some((value, err)) = self.converged(&ys, &noise, tables) {
                return LimitEstimate {
                    status: LimitStatus::Converged,
                    value: Some(ExtReal::Finite(value)),
                    err_estimate: err,
                    samples_used: ys.len(),
                    subsequences: None,
                    last_sample: last_finite(&ys),
                };
            }
        }
        self.classify_tail(&ys)
    }

    /// The last three entries of `c` agree within the tolerance widened by
    /// their rounding noise. Entries whose noise exceeds the tolerance by
    /// more than `NOISE_MARGIN` are not trusted at all.
    fn agree3(&self, c: &[f64], noise: &[f64]) -> Option<(f64, f64)> {
        let n = c.len();
        if n < 3 {
            return None;
        }
        let w = &c[n - 3..];
        if w.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let spread = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - w.iter().cloned().fold(f64::INFINITY, f64::min);
        let scale = w.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let slack = self.tol.slack(scale);
        let worst = noise[n - 3..].iter().cloned().fold(0.0, f64::max);
        (worst <= NOISE_MARGIN * slack && spread <= slack + 2.0 * worst).then_some((w[2], spread + worst))
    }

    fn converged(&self, ys: &[f64], noise: &[f64], tables: &[&[i32]]) -> Option<(f64, f64)> {
        if let Some(hit) = self.agree3(ys, noise) {
            return Some(hit);
        }
        for &orders in tables {
            let noise_cols = richardson_noise(noise, orders);
            for (col, nc) in richardson(ys, orders).iter().zip(&noise_cols) {
                if let Some(hit) = self.agree3(col, nc) {
                    return Some(hit);
                }
            }
        }
        let noisy = noise.iter().any(|&v| v > 0.0);
        // Epsilon extrapolants map geometric divergence and undamped
        // alternation onto a finite antilimit, so they are only consulted
        // once the raw tail has been seen to do neither.
        // Epsilon tables have no simple error propagation, so they are not
        // used on noisy samples.
        if !noisy && ys.len() >= MIN_EPSILON_SAMPLES && divergence(ys).is_none() && self.oscillation(ys).is_none() {
            let zero = vec![0.0; ys.len()];
            for col in wynn(ys) {
                if let Some(hit) = self.agree3(&col, &zero) {
                    return Some(hit);
                }
            }
        }
        None
    }

    fn classify_tail(&self, ys: &[f64]) -> LimitEstimate {
        let mut est = LimitEstimate {
            status: LimitStatus::Inconclusive,
            value: None,
            err_estimate: f64::INFINITY,
            samples_used: ys.len(),
            subsequences: None,
            last_sample: last_finite(ys),
        };
        if let Some(dir) = divergence(ys) {
            est.status = if dir > 0 { LimitStatus::DivergedPos } else { LimitStatus::DivergedNeg };
            est.value = Some(if dir > 0 { ExtReal::PosInf } else { ExtReal::NegInf });
            est.err_estimate = 0.0;
            return est;
        }
        if let Some((lo, hi)) = self.oscillation(ys) {
            est.status = LimitStatus::NoLimit;
            est.subsequences = Some((lo, hi));
        }
        est
    }

    /// Tail oscillation that does not decay: the last third of the samples
    /// spans more than ten tolerances and at least a quarter of the spread of
    /// the previous third.
    fn oscillation(&self, ys: &[f64]) -> Option<(f64, f64)> {
        let m = ys.len() / 3;
        if m < 3 {
            return None;
        }
        let recent = &ys[ys.len() - m..];
        let earlier = &ys[ys.len() - 2 * m..ys.len() - m];
        if recent.iter().chain(earlier).any(|v| !v.is_finite()) {
            return None;
        }
        let span = |w: &[f64]| {
            let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let (lo, hi) = span(recent);
        let (elo, ehi) = span(earlier);
        let scale = lo.abs().max(hi.abs());
        (hi - lo > 10.0 * self.tol.slack(scale) && hi - lo >= 0.25 * (ehi - elo)).then_some((lo, hi))
    }
}

fn last_finite(ys: &[f64]) -> Option<f64> {
    ys.iter().rev().find(|v| v.is_finite()).copied()
}

/// +1 / -1 when some window of raw samples is strictly monotone with
/// non-shrinking increments, has the sign of the direction of travel, and
/// every later defined sample stays at least that far out. Later samples may
/// be rounding noise (tiny differences of nearly equal values).
fn divergence(ys: &[f64]) -> Option<i8> {
    (DIVERGENCE_WINDOW..=ys.len()).rev().find_map(|end| {
        let dir = divergent_window(&ys[end - DIVERGENCE_WINDOW..end])?;
        let last = ys[end - 1];
        ys[end..].iter().all(|&v| !v.is_finite() || (v.signum() == last.signum() && v.abs() >= last.abs())).then_some(dir)
    })
}

fn divergent_window(w: &[f64]) -> Option<i8> {
    if w.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let d: Vec<f64> = w.windows(2).map(|p| p[1] - p[0]).collect();
    let up = d.iter().all(|&v| v > 0.0);
    let down = d.iter().all(|&v| v < 0.0);
    if !(up || down) {
        return None;
    }
    if !d.windows(2).all(|p| p[1].abs() >= DIVERGENCE_RATIO * p[0].abs()) {
        return None;
    }
    let last = w[w.len() - 1];
    match (up, last > 0.0) {
        (true, true) => Some(1),
        (false, false) if last < 0.0 => Some(-1),
        _ => None,
    }
}

/// Richardson columns for errors in powers of the step (step halves per
/// sample). Entry `k` of each column depends on samples `..=k`; entries that
/// do not exist yet are NaN.
pub(crate) fn richardson(ys: &[f64], orders: &[i32]) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(orders.len());
    let mut prev = ys.to_vec();
    for (j, &p) in orders.iter().enumerate() {
        let f = (p as f64).exp2();
        let col: Vec<f64> = (0..ys.len())
            .map(|k| {
                if k <= j {
                    f64::NAN
                } else {
                    (f * prev[k] - prev[k - 1]) / (f - 1.0)
                }
            })
            .collect();
        cols.push(col.clone());
        prev = col;
    }
    cols
}

/// Rounding bounds carried through [`richardson`].
fn richardson_noise(ns: &[f64], orders: &[i32]) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(orders.len());
    let mut prev = ns.to_vec();
    for (j, &p) in orders.iter().enumerate() {
        let f = (p as f64).exp2();
        let col: Vec<f64> = (0..ns.len()).map(|k| if k <= j { f64::INFINITY } else { (f * prev[k] + prev[k - 1]) / (f - 1.0) }).collect();
        cols.push(col.clone());
        prev = col;
    }
    cols
}

/// Even columns eps_2, eps_4, eps_6 of Wynn's epsilon table, indexed by the
/// last sample each entry depends on.
pub(crate) fn wynn(ys: &[f64]) -> Vec<Vec<f64>> {
    let n = ys.len();
    let depth = 6;
    let mut out = vec![vec![f64::NAN; n]; depth / 2];
    // eps[j][i] is eps_j built from samples i..=i+j
    let mut older = vec![0.0; n + 1];
    let mut cur = ys.to_vec();
    for j in 1..=depth {
        if cur.len() < 2 {
            break;
        }
        let next: Vec<f64> = (0..cur.len() - 1)
            .map(|i| {
                let d = cur[i + 1] - cur[i];
                let v = older[i + 1] + 1.0 / d;
                if d == 0.0 || !v.is_finite() {
                    f64::NAN
                } else {
                    v
                }
            })
            .collect();
        if j % 2 == 0 {
            for (i, v) in next.iter().enumerate() {
                out[j / 2 - 1][i + j] = *v;
            }
        }
        older = cur;
        cur = next;
    }
    out
}
