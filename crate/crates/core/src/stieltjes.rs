//! The derivative of `f` with respect to a strictly increasing `α`:
//!
//! ```text
//! (D_α f)(x) = lim_{h↓0} [f⁻(x+h) - f⁺(x-h)] / [α⁻(x+h) - α⁺(x-h)]
//! ```
//!
//! Where `α` jumps the limit is the jump ratio `(f⁺-f⁻)/(α⁺-α⁻)`, which is
//! returned exactly. Where both functions have classical one-sided
//! derivatives and `f` is continuous, the limit is
//! `(f'₋+f'₊)/(α'₋+α'₊)`; this shortcut is skipped when the denominator is
//! below `1e-8`. Everything else goes through the limit engine.

use serde::Serialize;
use thiserror::Error;

use crate::extreal::ExtReal;
use crate::limit::{Approach, LimitEngine, LimitEstimate, LimitStatus};
use crate::regulated::{interior_grid, merge_points, Combined, RegError, Regulated, Side};
use crate::tol::Tolerance;

/// Smallest `α'₋ + α'₊` for which the classical shortcut is used.
pub const SHORTCUT_MIN_SLOPE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    JumpRatio,
    NumericLimit,
    ClassicalShortcut,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeResult {
    pub value: ExtReal,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<LimitEstimate>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DerivError {
    #[error(transparent)]
    Reg(#[from] RegError),
    #[error("`{name}` is not strictly increasing near x = {x}")]
    NotIncreasing { name: String, x: f64 },
    #[error("D_α{f} does not exist at x = {x}: difference quotient is {:?}", .estimate.status)]
    NoLimit { f: String, x: f64, estimate: Box<LimitEstimate> },
    #[error("{0}")]
    Precondition(String),
    #[error("undefined arithmetic at x = {x}: {reason}")]
    Arithmetic { x: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    /// Allow the classical one-sided-derivative shortcut.
    pub shortcut: bool,
    pub engine: LimitEngine,
}

impl Default for Options {
    fn default() -> Self {
        Options { shortcut: true, engine: LimitEngine::default() }
    }
}

impl Options {
    pub fn numeric() -> Options {
        Options { shortcut: false, ..Options::default() }
    }
}

fn finite_pair(f: &dyn Regulated, x: f64) -> Result<(f64, f64), DerivError> {
    let p = f.one_sided(x)?;
    let side = |v: ExtReal, side| v.finite().ok_or_else(|| RegError::InfiniteLimit { name: f.name().to_string(), x, side });
    Ok((side(p.left, Side::Left)?, side(p.right, Side::Right)?))
}

/// `α` must satisfy `α⁺(x-h) < α⁻(x) <= α⁺(x) < α⁻(x+h)` around `x`.
fn check_local_increase(alpha: &dyn Regulated, x: f64, al: f64, ar: f64, h: f64) -> Result<(), DerivError> {
    let bad = || DerivError::NotIncreasing { name: alpha.name().to_string(), x };
    if ar < al {
        return Err(bad());
    }
    // Differences lost to rounding (very near a domain end) say nothing.
    if alpha.contains(x - h) {
        let below = alpha.right_limit(x - h)?;
        if below >= al && !crate::tol::unresolved(below, al) {
            return Err(bad());
        }
    }
    if alpha.contains(x + h) {
        let above = alpha.left_limit(x + h)?;
        if above <= ar && !crate::tol::unresolved(above, ar) {
            return Err(bad());
        }
    }
    Ok(())
}

pub fn d_alpha(f: &dyn Regulated, alpha: &dyn Regulated, x: f64) -> Result<DerivativeResult, DerivError> {
    d_alpha_with(f, alpha, x, &Options::default())
}

pub fn d_alpha_with(f: &dyn Regulated, alpha: &dyn Regulated, x: f64, opts: &Options) -> Result<DerivativeResult, DerivError> {
    let (al, ar) = finite_pair(alpha, x)?;
    let (fl, fr) = finite_pair(f, x)?;
    let h0 = f.gap(x)?.min(alpha.gap(x)?).min(1.0) / 4.0;
    check_local_increase(alpha, x, al, ar, h0)?;
    if !Tolerance::LIMIT.close(al, ar) {
        return Ok(DerivativeResult {
            value: ExtReal::new((fr - fl) / (ar - al)).map_err(|e| DerivError::Arithmetic { x, reason: e.to_string() })?,
            method: Method::JumpRatio,
            estimate: None,
        });
    }
    if opts.shortcut && Tolerance::LIMIT.close(fl, fr) {
        if let (Some((dfl, dfr)), Some((dal, dar))) = (f.one_sided_derivs(x), alpha.one_sided_derivs(x)) {
            let den = dal + dar;
            if dal >= 0.0 && dar >= 0.0 && den >= SHORTCUT_MIN_SLOPE {
                let v = (dfl + dfr) / den;
                if v.is_finite() {
                    return Ok(DerivativeResult { value: ExtReal::Finite(v), method: Method::ClassicalShortcut, estimate: None });
                }
            }
        }
    }
    numeric(f, alpha, x, h0, opts, true)
}

/// `[f(x+h) - f(x-h)] / [α(x+h) - α(x-h)]` with one-sided limits taken
/// toward `x` (`inner`) or away from it, and a bound on its rounding error.
fn difference_quotient(f: &dyn Regulated, alpha: &dyn Regulated, x: f64, h: f64, inner: bool) -> (f64, f64) {
    let ends = |g: &dyn Regulated| -> Result<(f64, f64), RegError> {
        if inner {
            Ok((g.left_limit(x + h)?, g.right_limit(x - h)?))
        } else {
            Ok((g.right_limit(x + h)?, g.left_limit(x - h)?))
        }
    };
    match (ends(f), ends(alpha)) {
        (Ok((fp, fm)), Ok((ap, am))) if ap != am => {
            let (n, d) = (fp - fm, ap - am);
            let q = n / d;
            let noise = f64::EPSILON * (fp.abs() + fm.abs() + q.abs() * (ap.abs() + am.abs())) / d.abs();
            (q, noise)
        }
        _ => (f64::NAN, f64::INFINITY),
    }
}

fn numeric(f: &dyn Regulated, alpha: &dyn Regulated, x: f64, h0: f64, opts: &Options, inner: bool) -> Result<DerivativeResult, DerivError> {
    // h0 is at most a quarter of the distance to the nearest other
    // breakpoint, so no sample x ± h lands on one. Sampling stops once x ± h
    // is no longer resolved from x.
    let est = opts.engine.limit_noisy(Approach::FromRight { x: 0.0, h0 }, |h| {
        (!crate::tol::unresolved(x + h, x)).then(|| difference_quotient(f, alpha, x, h, inner))
    });
    match est.status {
        LimitStatus::Converged | LimitStatus::DivergedPos | LimitStatus::DivergedNeg => Ok(DerivativeResult {
            value: est.value.expect("converged and diverged estimates carry a value"),
            method: Method::NumericLimit,
            estimate: Some(est),
        }),
        _ => Err(DerivError::NoLimit { f: f.name().to_string(), x, estimate: Box::new(est) }),
    }
}

/// The alternative quotient `[f⁺(x+h) - f⁻(x-h)] / [α⁺(x+h) - α⁻(x-h)]`,
/// always taken numerically.
pub fn symmetric_quotient(f: &dyn Regulated, alpha: &dyn Regulated, x: f64, opts: &Options) -> Result<DerivativeResult, DerivError> {
    let (al, ar) = finite_pair(alpha, x)?;
    let h0 = f.gap(x)?.min(alpha.gap(x)?).min(1.0) / 4.0;
    check_local_increase(alpha, x, al, ar, h0)?;
    numeric(f, alpha, x, h0, opts, false)
}

fn agree(a: ExtReal, b: ExtReal) -> bool {
    a.close_to(b, Tolerance::RULE.rtol, Tolerance::RULE.atol)
}

/// Whether `d_alpha` and [`symmetric_quotient`] agree at `x`.
pub fn d_alpha_symmetric_check(f: &dyn Regulated, alpha: &dyn Regulated, x: f64) -> Result<bool, DerivError> {
    let primary = d_alpha(f, alpha, x)?;
    let symmetric = symmetric_quotient(f, alpha, x, &Options::default())?;
    Ok(agree(primary.value, symmetric.value))
}

/// Left side and the two right sides of a product or quotient rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleTriple {
    pub lhs: ExtReal,
    pub rhs1: ExtReal,
    pub rhs2: ExtReal,
    pub agree: bool,
}

impl RuleTriple {
    fn new(lhs: ExtReal, rhs1: ExtReal, rhs2: ExtReal) -> RuleTriple {
        RuleTriple { lhs, rhs1, rhs2, agree: agree(lhs, rhs1) && agree(lhs, rhs2) }
    }
}

fn ext(x: f64) -> impl Fn(crate::extreal::ExtRealError) -> DerivError {
    move |e| DerivError::Arithmetic { x, reason: e.to_string() }
}

/// `D_α(fg) = g⁻ D_αf + f⁺ D_αg = g⁺ D_αf + f⁻ D_αg`. The left side is
/// computed from the product itself by the limit engine.
pub fn product_rule(f: &dyn Regulated, g: &dyn Regulated, alpha: &dyn Regulated, x: f64) -> Result<RuleTriple, DerivError> {
    let fg = Combined::mul(f, g);
    let lhs = d_alpha_with(&fg, alpha, x, &Options::numeric())?.value;
    let (df, dg) = (d_alpha(f, alpha, x)?.value, d_alpha(g, alpha, x)?.value);
    let (fp, gp) = (f.one_sided(x)?, g.one_sided(x)?);
    let side = |gv: ExtReal, fv: ExtReal| -> Result<ExtReal, DerivError> {
        gv.checked_mul(df).map_err(ext(x))?.checked_add(fv.checked_mul(dg).map_err(ext(x))?).map_err(ext(x))
    };
    Ok(RuleTriple::new(lhs, side(gp.left, fp.right)?, side(gp.right, fp.left)?))
}

/// `D_α(f/g) = (g⁻ D_αf - f⁻ D_αg)/(g⁻g⁺) = (g⁺ D_αf - f⁺ D_αg)/(g⁻g⁺)`,
/// provided `g⁻(x) g⁺(x) != 0`.
pub fn quotient_rule(f: &dyn Regulated, g: &dyn Regulated, alpha: &dyn Regulated, x: f64) -> Result<RuleTriple, DerivError> {
    let (gl, gr) = finite_pair(g, x)?;
    if gl * gr == 0.0 {
        return Err(DerivError::Precondition(format!("{}⁻(x) {}⁺(x) = 0 at x = {x}", g.name(), g.name())));
    }
    let q = Combined::div(f, g);
    let lhs = d_alpha_with(&q, alpha, x, &Options::numeric())?.value;
    let (df, dg) = (d_alpha(f, alpha, x)?.value, d_alpha(g, alpha, x)?.value);
    let fp = f.one_sided(x)?;
    let den = ExtReal::Finite(gl * gr);
    let side = |gv: f64, fv: ExtReal| -> Result<ExtReal, DerivError> {
        let num = ExtReal::Finite(gv)
            .checked_mul(df)
            .map_err(ext(x))?
            .checked_sub(fv.checked_mul(dg).map_err(ext(x))?)
            .map_err(ext(x))?;
        num.checked_div(den).map_err(ext(x))
    };
    Ok(RuleTriple::new(lhs, side(gl, fp.left)?, side(gr, fp.right)?))
}

/// Spot check that `α⁻ <= α⁺` and `α⁺(x_i) < α⁻(x_{i+1})` along a grid of
/// `(s, t)` that includes the breakpoints of `α`.
pub fn check_increasing(alpha: &dyn Regulated, s: ExtReal, t: ExtReal, n: usize) -> Result<(), DerivError> {
    let mut xs = interior_grid(s, t, n);
    if let (Some(&lo), Some(&hi)) = (xs.first(), xs.last()) {
        xs = merge_points(xs, alpha.breakpoints(lo, hi)?);
    }
    let mut prev: Option<f64> = None;
    for &x in &xs {
        let (l, r) = finite_pair(alpha, x)?;
        if r < l || prev.is_some_and(|p| p >= l) {
            return Err(DerivError::NotIncreasing { name: alpha.name().to_string(), x });
        }
        prev = Some(r);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::regulated::{deffile::parse_definitions, PiecewiseFn};

    fn defs(src: &str) -> crate::regulated::deffile::Definitions {
        parse_definitions(src).unwrap()
    }

    const SEC3: &str = "
fn f on (-inf, inf): piece (-inf, 0]: -2*x ; piece (0, inf): 4*x
fn id on (-inf, inf): piece (-inf, inf): x
fn abs on (-inf, inf): piece (-inf, inf): abs(x)
fn step on (-inf, inf): piece (-inf, 0]: 0 ; piece (0, inf): 2
fn unitjump on (-inf, inf): piece (-inf, 0]: x ; piece (0, inf): x + 1
";

    #[test]
    fn averaging_and_jump_ratio() {
        let d = defs(SEC3);
        let (f, id) = (d.function("f").unwrap(), d.function("id").unwrap());
        assert_eq!(d_alpha(f, id, 0.0).unwrap().value, ExtReal::Finite(1.0));
        assert_eq!(d_alpha(f, id, -1.0).unwrap().value, ExtReal::Finite(-2.0));
        assert_eq!(d_alpha(f, id, 0.5).unwrap().value, ExtReal::Finite(4.0));
        let num = d_alpha_with(f, id, 0.0, &Options::numeric()).unwrap();
        assert_eq!(num.method, Method::NumericLimit);
        assert!((num.value.to_f64() - 1.0).abs() < 1e-9);

        let r = d_alpha(d.function("step").unwrap(), d.function("unitjump").unwrap(), 0.0).unwrap();
        assert_eq!((r.value, r.method), (ExtReal::Finite(2.0), Method::JumpRatio));
    }

    #[test]
    fn absolute_value_at_kink() {
        let d = defs(SEC3);
        let r = d_alpha(d.function("abs").unwrap(), d.function("id").unwrap(), 0.0).unwrap();
        assert_eq!(r.method, Method::NumericLimit);
        assert!(r.value.to_f64().abs() < 1e-12);
    }

    #[test]
    fn jump_against_continuous_alpha_is_infinite() {
        let d = defs(SEC3);
        let r = d_alpha(d.function("step").unwrap(), d.function("id").unwrap(), 0.0).unwrap();
        assert_eq!(r.value, ExtReal::PosInf);
    }

    #[test]
    fn decreasing_alpha_is_rejected() {
        let neg = PiecewiseFn::single("neg", ExtReal::NegInf, ExtReal::PosInf, parse("-x").unwrap()).unwrap();
        let d = defs(SEC3);
        assert!(matches!(d_alpha(d.function("f").unwrap(), &neg, 0.3), Err(DerivError::NotIncreasing { .. })));
        assert!(check_increasing(&neg, ExtReal::Finite(-1.0), ExtReal::Finite(1.0), 16).is_err());
        assert!(check_increasing(d.function("unitjump").unwrap(), ExtReal::Finite(-1.0), ExtReal::Finite(1.0), 16).is_ok());
    }

    #[test]
    fn rules_at_a_kink() {
        let d = defs(&format!("{SEC3}\nfn g on (-inf, inf): piece (-inf, inf): x + 1"));
        let (f, g, id) = (d.function("f").unwrap(), d.function("g").unwrap(), d.function("id").unwrap());
        let p = product_rule(f, g, id, 0.0).unwrap();
        assert!(p.agree, "{p:?}");
        let sq = defs("fn f on (0, inf): piece (0, inf): x^2\nfn g on (0, inf): piece (0, inf): x");
        let (f2, g2) = (sq.function("f").unwrap(), sq.function("g").unwrap());
        let q = quotient_rule(f2, g2, g2, 2.0).unwrap();
        assert!(q.agree && (q.lhs.to_f64() - 1.0).abs() < 1e-7, "{q:?}");
        assert!(d_alpha_symmetric_check(f, id, 0.0).unwrap());
        assert!(d_alpha_symmetric_check(f2, g2, 1.0).unwrap());
    }
}
