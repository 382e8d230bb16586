//! Regulated functions: piecewise closed forms with one-sided limits at
//! every interior point.
//!
//! [`PiecewiseFn`] is the concrete representation. The [`Regulated`] trait is
//! what the calculus modules consume, so that products, quotients and affine
//! images of piecewise functions (and sampled polylines) can be used
//! wherever a piecewise function can.

mod combine;
pub mod deffile;
mod piecewise;
mod polyline;

use serde::Serialize;
use thiserror::Error;

use crate::expr::ExprError;
use crate::extreal::ExtReal;
use crate::limit::{Approach, LimitEngine, LimitEstimate, LimitStatus};

pub use combine::{Affine, Combined, Op};
pub use piecewise::{Cell, Family, Offset, Piece, PiecewiseFn, View, DEFAULT_HORIZON, MAX_FAMILY_CELLS};
pub use polyline::PolylineFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Which end of the domain a limit is taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneSidedPair {
    pub left: ExtReal,
    pub right: ExtReal,
}

impl OneSidedPair {
    pub fn both(v: f64) -> OneSidedPair {
        OneSidedPair { left: ExtReal::Finite(v), right: ExtReal::Finite(v) }
    }

    /// `right - left` when both are finite.
    pub fn jump(&self) -> Option<f64> {
        Some(self.right.finite()? - self.left.finite()?)
    }

    pub fn side(&self, side: Side) -> ExtReal {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    /// Both finite, with a jump below `1e-9` relative / `1e-12` absolute.
    pub fn is_continuous(&self) -> bool {
        match (self.left.finite(), self.right.finite()) {
            (Some(l), Some(r)) => crate::tol::Tolerance::LIMIT.close(l, r),
            _ => self.left == self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegError {
    #[error("`{name}`: x = {x} is outside the domain ({a}, {b})")]
    OutOfDomain { name: String, x: f64, a: ExtReal, b: ExtReal },
    #[error("`{name}`: family horizon exhausted near x = {x}")]
    HorizonExhausted { name: String, x: f64 },
    #[error("`{name}`: not regulated at x = {x}: the {side:?} limit is {status:?}")]
    NotRegulated { name: String, x: f64, side: Side, status: LimitStatus, estimate: Box<LimitEstimate> },
    #[error("`{name}`: infinite {side:?} limit at interior point x = {x}")]
    InfiniteLimit { name: String, x: f64, side: Side },
    #[error("`{name}`: {source}")]
    Eval { name: String, source: ExprError },
    #[error("`{name}`: {reason}")]
    Invalid { name: String, reason: String },
    #[error("`{name}`: jump {jump} at x = {x} but the function was declared continuous")]
    Discontinuous { name: String, x: f64, jump: f64 },
}

/// A regulated function on an open interval.
pub trait Regulated: Send + Sync {
    /// Name used in diagnostics.
    fn name(&self) -> &str;

    fn domain(&self) -> (ExtReal, ExtReal);

    /// Largest point the representation can evaluate, when that is short of
    /// the right end of the domain (lazily extended families, finite data).
    fn horizon(&self) -> Option<f64> {
        None
    }

    /// Point value under the function's own convention at breakpoints.
    fn value(&self, x: f64) -> Result<f64, RegError>;

    fn one_sided(&self, x: f64) -> Result<OneSidedPair, RegError>;

    /// Cell boundaries strictly inside `(s, t)`, ascending.
    fn breakpoints(&self, s: f64, t: f64) -> Result<Vec<f64>, RegError>;

    /// Distance from `x` to the nearest cell boundary other than `x` itself
    /// (domain ends count as boundaries).
    fn gap(&self, x: f64) -> Result<f64, RegError>;

    /// Classical one-sided derivatives `(f'_-(x), f'_+(x))` of the cells
    /// meeting at `x`, when both cell bodies are differentiable there.
    fn one_sided_derivs(&self, x: f64) -> Option<(f64, f64)>;

    fn contains(&self, x: f64) -> bool {
        let (a, b) = self.domain();
        x.is_finite() && ExtReal::Finite(x) > a && ExtReal::Finite(x) < b
    }

    /// `f⁻(x)`, which must be finite.
    fn left_limit(&self, x: f64) -> Result<f64, RegError> {
        finite_side(self, x, Side::Left)
    }

    /// `f⁺(x)`, which must be finite.
    fn right_limit(&self, x: f64) -> Result<f64, RegError> {
        finite_side(self, x, Side::Right)
    }
}

fn finite_side<F: Regulated + ?Sized>(f: &F, x: f64, side: Side) -> Result<f64, RegError> {
    f.one_sided(x)?.side(side).finite().ok_or_else(|| RegError::InfiniteLimit {
        name: f.name().to_string(),
        x,
        side,
    })
}

impl<T: Regulated + ?Sized> Regulated for &T {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn domain(&self) -> (ExtReal, ExtReal) {
        (**self).domain()
    }
    fn horizon(&self) -> Option<f64> {
        (**self).horizon()
    }
    fn value(&self, x: f64) -> Result<f64, RegError> {
        (**self).value(x)
    }
    fn one_sided(&self, x: f64) -> Result<OneSidedPair, RegError> {
        (**self).one_sided(x)
    }
    fn breakpoints(&self, s: f64, t: f64) -> Result<Vec<f64>, RegError> {
        (**self).breakpoints(s, t)
    }
    fn gap(&self, x: f64) -> Result<f64, RegError> {
        (**self).gap(x)
    }
    fn one_sided_derivs(&self, x: f64) -> Option<(f64, f64)> {
        (**self).one_sided_derivs(x)
    }
}

/// A cell boundary and the jump `f⁺(x) - f⁻(x)` there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakpoint {
    pub x: f64,
    pub jump: f64,
}

/// All cell boundaries in `(s, t)` with their jumps.
pub fn jumps<F: Regulated + ?Sized>(f: &F, s: f64, t: f64) -> Result<Vec<Breakpoint>, RegError> {
    f.breakpoints(s, t)?
        .into_iter()
        .map(|x| {
            let p = f.one_sided(x)?;
            let jump = p.jump().ok_or_else(|| RegError::InfiniteLimit {
                name: f.name().to_string(),
                x,
                side: if p.left.is_finite() { Side::Right } else { Side::Left },
            })?;
            Ok(Breakpoint { x, jump })
        })
        .collect()
}

/// Sample schedule toward an endpoint of `(a, b)`: `x0 * 2^k` toward an
/// infinite end (`x0 = 4`, moved inside the domain if needed), and
/// `b - h0 * 2^-k` toward a finite one with `h0 = min(1, b - a) / 4`.
pub fn approach_to(domain: (ExtReal, ExtReal), endpoint: Endpoint) -> Approach {
    let (a, b) = domain;
    match endpoint {
        Endpoint::B => match b {
            ExtReal::PosInf => {
                let x0 = match a {
                    ExtReal::Finite(a) if a >= 4.0 => a + 4.0,
                    _ => 4.0,
                };
                Approach::PosInf { x0 }
            }
            _ => {
                let b = b.to_f64();
                Approach::FromLeft { x: b, h0: (b - a.to_f64()).min(1.0) / 4.0 }
            }
        },
        Endpoint::A => match a {
            ExtReal::NegInf => {
                let x0 = match b {
                    ExtReal::Finite(b) if b <= -4.0 => -b + 4.0,
                    _ => 4.0,
                };
                Approach::NegInf { x0 }
            }
            _ => {
                let a = a.to_f64();
                Approach::FromRight { x: a, h0: (b.to_f64() - a).min(1.0) / 4.0 }
            }
        },
    }
}

/// Sample points toward `endpoint`, cut at the representation's horizon.
pub fn schedule<F: Regulated + ?Sized>(f: &F, endpoint: Endpoint, engine: &LimitEngine) -> Vec<f64> {
    let approach = approach_to(f.domain(), endpoint);
    let horizon = f.horizon().unwrap_or(f64::INFINITY);
    approach
        .points(engine.max_k(&approach))
        .into_iter()
        .take_while(|&x| x <= horizon)
        .collect()
}

/// Limit of `f⁻(x)` as `x` tends to `endpoint`.
pub fn end_behavior<F: Regulated + ?Sized>(f: &F, endpoint: Endpoint, engine: &LimitEngine) -> LimitEstimate {
    let xs = schedule(f, endpoint, engine);
    let ys: Vec<f64> = xs.iter().map(|&x| f.left_limit(x).unwrap_or(f64::NAN)).collect();
    engine.from_samples(&ys)
}

/// Interior sample grid of `(s, t)`: `n` midpoints of a uniform partition
/// (so no point sits on the ends), or, for an infinite side, the image of
/// such a partition of `(0, 1)` under `x = s + u / (1 - u)` and its mirror.
pub fn interior_grid(s: ExtReal, t: ExtReal, n: usize) -> Vec<f64> {
    let us = (0..n).map(|i| (i as f64 + 0.5) / n as f64);
    match (s, t) {
        (ExtReal::Finite(s), ExtReal::Finite(t)) => us.map(|u| s + u * (t - s)).collect(),
        (ExtReal::Finite(s), _) => us.map(|u| s + u / (1.0 - u)).collect(),
        (_, ExtReal::Finite(t)) => us.rev().map(|u| t - u / (1.0 - u)).collect(),
        _ => us.map(|u| (std::f64::consts::PI * (u - 0.5)).tan()).collect(),
    }
}

/// Merges sorted point lists, dropping duplicates.
pub fn merge_points(mut xs: Vec<f64>, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    xs.extend(extra);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_stays_inside() {
        let g = interior_grid(ExtReal::Finite(0.0), ExtReal::PosInf, 16);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g[0] > 0.0 && g.iter().all(|x| x.is_finite()));
        let g = interior_grid(ExtReal::NegInf, ExtReal::Finite(1.0), 16);
        assert!(g.windows(2).all(|w| w[0] < w[1]) && *g.last().unwrap() < 1.0);
        let g = interior_grid(ExtReal::Finite(-1.0), ExtReal::Finite(1.0), 4);
        assert_eq!(g, vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn schedules() {
        let d = (ExtReal::Finite(0.0), ExtReal::PosInf);
        assert_eq!(approach_to(d, Endpoint::B), Approach::PosInf { x0: 4.0 });
        assert_eq!(approach_to(d, Endpoint::A), Approach::FromRight { x: 0.0, h0: 0.25 });
        let d = (ExtReal::Finite(0.0), ExtReal::Finite(0.5));
        assert_eq!(approach_to(d, Endpoint::B), Approach::FromLeft { x: 0.5, h0: 0.125 });
    }
}
