//! Mean value theorems for `D_α`: Rolle and Cauchy witnesses, and the
//! sandwich `inf D_αf/D_αg <= [f⁻(t)-f⁺(s)]/[g⁻(t)-g⁺(s)] <= sup D_αf/D_αg`.
//!
//! Witnesses are searched on a grid of cell midpoints of `(s, t)` merged
//! with the breakpoints of every function involved, doubling the resolution
//! from 64 to 8192 until the minimum and maximum of the target differ in
//! sign or their product is within `1e-9`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::extreal::ExtReal;
use crate::regulated::{interior_grid, merge_points, RegError, Regulated};
use crate::stieltjes::{d_alpha, DerivError};
use crate::tol::Tolerance;

pub const MIN_RESOLUTION: usize = 64;
pub const MAX_RESOLUTION: usize = 8192;
pub const WITNESS_TOL: f64 = 1e-9;
/// Rolle needs `|f⁺(s) - f⁻(t)| <= ROLLE_TOL (1 + |f⁺(s)|)`.
pub const ROLLE_TOL: f64 = 1e-9;
pub const SANDWICH_RESOLUTION: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessPair {
    pub u: f64,
    pub v: f64,
    /// Target at `u`, the minimiser.
    pub lhs_value: ExtReal,
    /// Target at `v`, the maximiser.
    pub rhs_value: ExtReal,
    /// `lhs_value * rhs_value`, with `0 * inf` read as 0.
    pub product: ExtReal,
    pub grid_resolution: usize,
}

impl WitnessPair {
    pub fn certified(&self) -> bool {
        self.product <= ExtReal::Finite(WITNESS_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MvtError {
    #[error(transparent)]
    Deriv(#[from] DerivError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no witness up to resolution {resolution}: target ranges over [{min}, {max}]")]
    NotFound { resolution: usize, min: ExtReal, max: ExtReal },
}

impl From<RegError> for MvtError {
    fn from(e: RegError) -> Self {
        MvtError::Deriv(e.into())
    }
}

fn check_interval(s: f64, t: f64, fs: &[&dyn Regulated]) -> Result<(), MvtError> {
    if !(s < t) {
        return Err(MvtError::Precondition(format!("need s < t, got s = {s}, t = {t}")));
    }
    for f in fs {
        if !f.contains(s) || !f.contains(t) {
            return Err(MvtError::Precondition(format!("[{s}, {t}] is not inside the domain of `{}`", f.name())));
        }
    }
    Ok(())
}

/// Midpoints of `n` equal cells of `(s, t)` plus the breakpoints of `fs`.
pub fn witness_grid(s: f64, t: f64, n: usize, fs: &[&dyn Regulated]) -> Result<Vec<f64>, RegError> {
    let mut xs = interior_grid(ExtReal::Finite(s), ExtReal::Finite(t), n);
    for f in fs {
        xs = merge_points(xs, f.breakpoints(s, t)?);
    }
    Ok(xs)
}

fn product(a: ExtReal, b: ExtReal) -> ExtReal {
    if a == ExtReal::ZERO || b == ExtReal::ZERO {
        return ExtReal::ZERO;
    }
    a.checked_mul(b).expect("nonzero extended reals multiply")
}

fn sample<T: Fn(f64) -> Result<ExtReal, DerivError> + Sync>(xs: &[f64], target: &T) -> Result<Vec<ExtReal>, DerivError> {
    xs.par_iter().map(|&x| target(x)).collect()
}

fn search<T: Fn(f64) -> Result<ExtReal, DerivError> + Sync>(s: f64, t: f64, fs: &[&dyn Regulated], target: T) -> Result<WitnessPair, MvtError> {
    let mut n = MIN_RESOLUTION;
    loop {
        let xs = witness_grid(s, t, n, fs)?;
        let ys = sample(&xs, &target)?;
        let (mut lo, mut hi) = (0, 0);
        for (i, y) in ys.iter().enumerate() {
            if *y < ys[lo] {
                lo = i;
            }
            if *y > ys[hi] {
                hi = i;
            }
        }
        let pair = WitnessPair {
            u: xs[lo],
            v: xs[hi],
            lhs_value: ys[lo],
            rhs_value: ys[hi],
            product: product(ys[lo], ys[hi]),
            grid_resolution: n,
        };
        if pair.certified() {
            return Ok(pair);
        }
        if n >= MAX_RESOLUTION {
            return Err(MvtError::NotFound { resolution: n, min: ys[lo], max: ys[hi] });
        }
        n *= 2;
    }
}

/// Points `u, v` in `(s, t)` with `D_αf(u) D_αf(v) <= 0`, given
/// `f⁺(s) = f⁻(t)`.
pub fn rolle_witness(f: &dyn Regulated, alpha: &dyn Regulated, s: f64, t: f64) -> Result<WitnessPair, MvtError> {
    check_interval(s, t, &[f, alpha])?;
    let (fs, ft) = (f.right_limit(s)?, f.left_limit(t)?);
    if (fs - ft).abs() > ROLLE_TOL * (1.0 + fs.abs()) {
        return Err(MvtError::Precondition(format!("{0}⁺(s) = {fs} differs from {0}⁻(t) = {ft}", f.name())));
    }
    search(s, t, &[f, alpha], |x| Ok(d_alpha(f, alpha, x)?.value))
}

/// The increments `c_f = f⁻(t) - f⁺(s)` and `c_g = g⁻(t) - g⁺(s)`.
pub fn increments(f: &dyn Regulated, g: &dyn Regulated, s: f64, t: f64) -> Result<(f64, f64), RegError> {
    Ok((f.left_limit(t)? - f.right_limit(s)?, g.left_limit(t)? - g.right_limit(s)?))
}

/// Points `u, v` in `(s, t)` with `E(u) E(v) <= 0` for
/// `E = c_g D_αf - c_f D_αg`.
pub fn cauchy_witness(f: &dyn Regulated, g: &dyn Regulated, alpha: &dyn Regulated, s: f64, t: f64) -> Result<WitnessPair, MvtError> {
    check_interval(s, t, &[f, g, alpha])?;
    let (cf, cg) = increments(f, g, s, t)?;
    search(s, t, &[f, g, alpha], |x| {
        let (df, dg) = (d_alpha(f, alpha, x)?.value, d_alpha(g, alpha, x)?.value);
        let arith = |e: crate::extreal::ExtRealError| DerivError::Arithmetic { x, reason: e.to_string() };
        let a = product(ExtReal::Finite(cg), df);
        let b = product(ExtReal::Finite(cf), dg);
        a.checked_sub(b).map_err(arith)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneBound {
    pub ratio_s: ExtReal,
    pub ratio_t: ExtReal,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sandwich {
    pub lo: ExtReal,
    pub mid: f64,
    pub hi: ExtReal,
    pub ok: bool,
    /// Present when the ratio is monotone on the grid: the mean quotient
    /// also lies between the ratio at `s` and at `t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone: Option<MonotoneBound>,
    pub grid_resolution: usize,
}

fn ratio(f: &dyn Regulated, g: &dyn Regulated, alpha: &dyn Regulated, x: f64) -> Result<ExtReal, DerivError> {
    let (df, dg) = (d_alpha(f, alpha, x)?.value, d_alpha(g, alpha, x)?.value);
    df.checked_div(dg).map_err(|e| DerivError::Arithmetic { x, reason: e.to_string() })
}

fn within(lo: ExtReal, mid: f64, hi: ExtReal) -> bool {
    let tol = Tolerance::RULE;
    let below = |a: ExtReal| a.finite().map_or(a == ExtReal::NegInf, |a| a - tol.slack(a.abs().max(mid.abs())) <= mid);
    let above = |b: ExtReal| b.finite().map_or(b == ExtReal::PosInf, |b| mid <= b + tol.slack(b.abs().max(mid.abs())));
    below(lo) && above(hi)
}

/// Checks the sandwich on a grid of `(s, t)`; `D_αg` must keep one strict
/// sign there.
pub fn sandwich_check(f: &dyn Regulated, g: &dyn Regulated, alpha: &dyn Regulated, s: f64, t: f64) -> Result<Sandwich, MvtError> {
    check_interval(s, t, &[f, g, alpha])?;
    let xs = witness_grid(s, t, SANDWICH_RESOLUTION, &[f, g, alpha])?;
    let dg = sample(&xs, &|x| Ok(d_alpha(g, alpha, x)?.value))?;
    let sign = dg[0].signum();
    if sign == 0 || dg.iter().any(|d| d.signum() != sign) {
        return Err(MvtError::Precondition(format!("D_α{} changes sign or vanishes on ({s}, {t})", g.name())));
    }
    let (cf, cg) = increments(f, g, s, t)?;
    if cg == 0.0 {
        return Err(MvtError::Precondition(format!("{0}⁻(t) = {0}⁺(s)", g.name())));
    }
    let mid = cf / cg;
    let rs = sample(&xs, &|x| ratio(f, g, alpha, x))?;
    let lo = *rs.iter().min().expect("grid is nonempty");
    let hi = *rs.iter().max().expect("grid is nonempty");
    let ok = within(lo, mid, hi);

    let slack = |a: ExtReal, b: ExtReal| match (a.finite(), b.finite()) {
        (Some(a), Some(b)) => Tolerance::RULE.slack(a.abs().max(b.abs())),
        _ => 0.0,
    };
    let le = |a: ExtReal, b: ExtReal| a <= b || a.to_f64() - b.to_f64() <= slack(a, b);
    let increasing = rs.windows(2).all(|w| le(w[0], w[1]));
    let decreasing = rs.windows(2).all(|w| le(w[1], w[0]));
    let monotone = if increasing || decreasing {
        let (ratio_s, ratio_t) = (ratio(f, g, alpha, s)?, ratio(f, g, alpha, t)?);
        let ok = if increasing { within(ratio_s, mid, ratio_t) } else { within(ratio_t, mid, ratio_s) };
        Some(MonotoneBound { ratio_s, ratio_t, ok })
    } else {
        None
    };
    Ok(Sandwich { lo, mid, hi, ok, monotone, grid_resolution: SANDWICH_RESOLUTION })
}
