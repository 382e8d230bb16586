//! Lebesgue–Stieltjes measures `dα` of increasing piecewise-C¹ bases,
//! realised as a density `α'` on cells plus atoms of mass `α⁺ - α⁻` at
//! jumps.
//!
//! `dα((s, t)) = α⁻(t) - α⁺(s)`. Integrals over `(s, t)` split at the merged
//! breakpoints of the integrand and the base; each cell is integrated with
//! adaptive Gauss–Kronrod and each atom contributes `φ(x) · mass`.

pub mod quad;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::extreal::ExtReal;
use crate::lhospital::{
    common_domain, common_schedule, grid_verdict, increasing_hypothesis, monotone_grid, refining_grid, Case, Certificate, Conclusion,
    Direction, HypStatus, Hypothesis, Oracle, RuleConfig, RuleError, RuleReport, MONOTONE_GRID,
};
use crate::limit::{LimitEstimate, LimitStatus};
use crate::regulated::{merge_points, Endpoint, RegError, Regulated};
use crate::stieltjes::{d_alpha, DerivError};
use crate::tol::Tolerance;

use quad::{neumaier, QuadError, DEFAULT_TOL, MAX_INTERVALS};

/// FTC residual must be at most `FTC_RTOL (1 + |lhs|)`.
pub const FTC_RTOL: f64 = 1e-6;
/// Schedule length toward an infinite endpoint for the integral rule; each
/// step doubles the integration range.
pub const INTEGRAL_STEPS_INFINITE: usize = 12;
/// Tail integrals are extrapolated from at least this many partial sums.
const MIN_TAIL_SAMPLES: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LsError {
    #[error(transparent)]
    Reg(#[from] RegError),
    #[error(transparent)]
    Deriv(#[from] DerivError),
    #[error("on cell ({a}, {b}): {source}")]
    Quad { a: f64, b: f64, source: QuadError },
    #[error("AC violation at x = {x}: `{name}` jumps by {jump} where the base is continuous")]
    AcViolation { name: String, x: f64, jump: f64 },
    #[error("{0}")]
    Input(String),
}

impl From<RuleError> for LsError {
    fn from(e: RuleError) -> Self {
        match e {
            RuleError::Reg(r) => LsError::Reg(r),
            RuleError::Input(s) => LsError::Input(s),
        }
    }
}

/// What is integrated against `dα`.
#[derive(Clone, Copy)]
pub enum Integrand<'a> {
    /// A function, valued at atoms by its own point-value convention.
    Function(&'a dyn Regulated),
    /// `D_{alpha} f`, which at atoms of `alpha` is the jump ratio.
    DAlpha { f: &'a dyn Regulated, alpha: &'a dyn Regulated },
}

impl<'a> Integrand<'a> {
    pub fn name(&self) -> String {
        match self {
            Integrand::Function(f) => f.name().to_string(),
            Integrand::DAlpha { f, alpha } => format!("D_{}{}", alpha.name(), f.name()),
        }
    }

    fn parts(&self) -> Vec<&'a dyn Regulated> {
        match *self {
            Integrand::Function(f) => vec![f],
            Integrand::DAlpha { f, alpha } => vec![f, alpha],
        }
    }

    pub fn at(&self, x: f64) -> Result<ExtReal, LsError> {
        match self {
            Integrand::Function(f) => Ok(ExtReal::new(f.value(x)?).map_err(|e| LsError::Input(e.to_string()))?),
            Integrand::DAlpha { f, alpha } => Ok(d_alpha(*f, *alpha, x)?.value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    /// Contribution of the density part.
    pub density: f64,
    /// Contribution of the atoms.
    pub atomic: f64,
    pub err: f64,
    pub cells: usize,
    pub atoms: usize,
}

#[derive(Clone, Copy)]
pub struct LSMeasure<'a> {
    base: &'a dyn Regulated,
}

impl<'a> LSMeasure<'a> {
    pub fn new(base: &'a dyn Regulated) -> LSMeasure<'a> {
        LSMeasure { base }
    }

    pub fn base(&self) -> &'a dyn Regulated {
        self.base
    }

    /// `α⁻(t) - α⁺(s)`.
    pub fn interval(&self, s: f64, t: f64) -> Result<f64, RegError> {
        Ok(self.base.left_limit(t)? - self.base.right_limit(s)?)
    }

    /// Mass of `{x}`: the jump of the base, or 0 where it is continuous.
    pub fn atom(&self, x: f64) -> Result<f64, RegError> {
        let (l, r) = (self.base.left_limit(x)?, self.base.right_limit(x)?);
        Ok(if Tolerance::LIMIT.close(l, r) { 0.0 } else { r - l })
    }

    pub fn atoms(&self, s: f64, t: f64) -> Result<Vec<Atom>, RegError> {
        let mut out = Vec::new();
        for x in self.base.breakpoints(s, t)? {
            let mass = self.atom(x)?;
            if mass != 0.0 {
                out.push(Atom { x, mass });
            }
        }
        Ok(out)
    }

    /// Density `φ α'` at a point inside a cell; 0 where `α' = 0`.
    fn density(&self, phi: &Integrand, x: f64) -> Result<f64, QuadError> {
        let slope = match self.base.one_sided_derivs(x) {
            Some((l, r)) if l == r => l,
            _ => return Ok(f64::NAN),
        };
        if slope == 0.0 {
            return Ok(0.0);
        }
        match phi.at(x) {
            Ok(v) => Ok(v.to_f64() * slope),
            Err(e) => Err(QuadError::Eval { x, reason: e.to_string() }),
        }
    }

    /// Cell boundaries of `(s, t)` for `φ` against this base, ends included.
    fn cuts(&self, phi: &Integrand, s: f64, t: f64) -> Result<Vec<f64>, RegError> {
        let mut xs = self.base.breakpoints(s, t)?;
        for f in phi.parts() {
            xs = merge_points(xs, f.breakpoints(s, t)?);
        }
        Ok(merge_points(xs, [s, t]))
    }

    /// `∫_{(s,t)} φ dα` over a bounded interval.
    pub fn integrate(&self, phi: &Integrand, s: f64, t: f64) -> Result<Integral, LsError> {
        if !(s < t) {
            return Err(LsError::Input(format!("need s < t, got s = {s}, t = {t}")));
        }
        let cuts = self.cuts(phi, s, t)?;
        let cells: Vec<quad::Quadrature> = cuts
            .par_windows(2)
            .map(|w| {
                quad::integrate(|x| self.density(phi, x), w[0], w[1], DEFAULT_TOL, MAX_INTERVALS)
                    .map_err(|source| LsError::Quad { a: w[0], b: w[1], source })
            })
            .collect::<Result<_, _>>()?;
        let mut atom_terms = Vec::new();
        for &x in &cuts[1..cuts.len() - 1] {
            let mass = self.atom(x)?;
            if mass != 0.0 {
                atom_terms.push(phi.at(x)?.to_f64() * mass);
            }
        }
        let density = neumaier(cells.iter().map(|q| q.value));
        let atomic = neumaier(atom_terms.iter().copied());
        Ok(Integral {
            value: density + atomic,
            density,
            atomic,
            err: cells.iter().map(|q| q.err).sum(),
            cells: cells.len(),
            atoms: atom_terms.len(),
        })
    }

    /// For a monotone list `x_0, x_1, ...`: the integrals over the open
    /// intervals between consecutive points, and the atom terms at
    /// `x_1, x_2, ...`.
    fn pieces(&self, phi: &Integrand, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>), LsError> {
        let cells: Vec<f64> = xs
            .par_windows(2)
            .map(|w| Ok(self.integrate(phi, w[0].min(w[1]), w[0].max(w[1]))?.value))
            .collect::<Result<_, LsError>>()?;
        let atoms = xs[1..]
            .iter()
            .map(|&x| {
                let mass = self.atom(x)?;
                Ok(if mass == 0.0 { 0.0 } else { phi.at(x)?.to_f64() * mass })
            })
            .collect::<Result<_, LsError>>()?;
        Ok((cells, atoms))
    }
}

/// `P_k`, the integral over the open interval between `x_0` and `x_k`.
fn partials(cells: &[f64], atoms: &[f64]) -> Vec<f64> {
    let mut terms = Vec::with_capacity(2 * cells.len());
    let mut out = vec![0.0];
    for k in 0..cells.len() {
        terms.push(cells[k]);
        out.push(neumaier(terms.iter().copied()));
        terms.push(atoms[k]);
    }
    out
}

/// Integral over the open interval from `x_k` to the endpoint, extrapolated
/// from the sums of later pieces.
fn tail(engine: &crate::limit::LimitEngine, cells: &[f64], atoms: &[f64], k: usize) -> f64 {
    let mut terms = Vec::new();
    let mut sums = Vec::new();
    for j in k..cells.len() {
        terms.push(cells[j]);
        sums.push(neumaier(terms.iter().copied()));
        terms.push(atoms[j]);
    }
    engine.from_samples(&sums).value.map_or(f64::NAN, ExtReal::to_f64)
}

pub fn measure_interval(alpha: &dyn Regulated, s: f64, t: f64) -> Result<f64, RegError> {
    LSMeasure::new(alpha).interval(s, t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FtcReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub ok: bool,
    pub integral: Integral,
}

/// `h⁻(t) - h⁺(s) = ∫_{(s,t)} D_αh dα`, provided `h` only jumps where `α`
/// does.
pub fn ftc_check(h: &dyn Regulated, alpha: &dyn Regulated, s: f64, t: f64) -> Result<FtcReport, LsError> {
    let m = LSMeasure::new(alpha);
    for x in h.breakpoints(s, t)? {
        let p = h.one_sided(x)?;
        let jump = p.jump().unwrap_or(f64::INFINITY);
        if !Tolerance::LIMIT.close(p.left.to_f64(), p.right.to_f64()) && m.atom(x)? == 0.0 {
            return Err(LsError::AcViolation { name: h.name().to_string(), x, jump });
        }
    }
    let lhs = h.left_limit(t)? - h.right_limit(s)?;
    let integral = m.integrate(&Integrand::DAlpha { f: h, alpha }, s, t)?;
    let residual = (lhs - integral.value).abs();
    Ok(FtcReport { lhs, rhs: integral.value, residual, ok: residual <= FTC_RTOL * (1.0 + lhs.abs()), integral })
}

fn sign_of(vals: &[ExtReal]) -> Option<i8> {
    let s = vals.first()?.signum();
    (s != 0 && vals.iter().all(|v| v.signum() == s)).then_some(s)
}

fn ratio(a: ExtReal, b: ExtReal) -> f64 {
    a.checked_div(b).map_or(f64::NAN, ExtReal::to_f64)
}

/// `lim ∫u dα / ∫v dα` at `endpoint` from `lim u/v`: over tails `(x, b)`
/// when the integrals converge there, and over `(r, x)` when `∫v dα`
/// diverges.
pub fn lhospital_integral(
    u: &Integrand,
    v: &Integrand,
    alpha: &dyn Regulated,
    endpoint: Endpoint,
    cfg: &RuleConfig,
) -> Result<RuleReport, LsError> {
    let mut fs: Vec<&dyn Regulated> = u.parts();
    fs.extend(v.parts());
    fs.push(alpha);
    let mut engine = cfg.engine;
    engine.max_k_infinite = engine.max_k_infinite.min(INTEGRAL_STEPS_INFINITE);
    let xs = common_schedule(&fs, endpoint, &engine)?;
    let grid = refining_grid(&xs, &fs)?;
    let mut hyps = vec![increasing_hypothesis(alpha, &grid)];

    let vv: Vec<ExtReal> = grid.par_iter().map(|&x| v.at(x)).collect::<Result<_, _>>()?;
    let sign = sign_of(&vv);
    hyps.push(Hypothesis::new(
        &format!("{} has constant sign", v.name()),
        sign.is_some(),
        format!("{} grid points in [{}, {}]", grid.len(), grid[0], grid[grid.len() - 1]),
    ));
    let uu: Vec<ExtReal> = xs.par_iter().map(|&x| u.at(x)).collect::<Result<_, _>>()?;
    let ws: Vec<f64> = xs.iter().zip(&uu).map(|(&x, &a)| Ok(ratio(a, v.at(x)?))).collect::<Result<_, LsError>>()?;
    let a = engine.from_samples(&ws);
    hyps.push(Hypothesis::new(&format!("{}/{} has a limit", u.name(), v.name()), a.has_value(), crate::lhospital::limit_evidence(&a)));

    let m = LSMeasure::new(alpha);
    let (uc, ua) = m.pieces(u, &xs)?;
    let (vc, va) = m.pieces(v, &xs)?;
    let (pu, pv) = (partials(&uc, &ua), partials(&vc, &va));
    let utotal = engine.from_samples(&pu[1..]);
    let vtotal = engine.from_samples(&pv[1..]);

    let (case, ratios) = if utotal.is_converged() && vtotal.is_converged() && xs.len() > MIN_TAIL_SAMPLES + 1 {
        let last = xs.len() - 1 - MIN_TAIL_SAMPLES;
        let ratios = (0..=last).map(|k| tail(&engine, &uc, &ua, k) / tail(&engine, &vc, &va, k)).collect();
        (Some(Case::TailsConverge), ratios)
    } else if matches!(vtotal.status, LimitStatus::DivergedPos | LimitStatus::DivergedNeg) {
        (Some(Case::IntegralDiverges), pu[1..].iter().zip(&pv[1..]).map(|(a, b)| a / b).collect())
    } else {
        (None, Vec::new())
    };
    hyps.push(Hypothesis::new(
        "tails converge or the integral of v diverges",
        case.is_some(),
        format!("∫v: {:?}; ∫u: {:?}", vtotal.status, utotal.status),
    ));
    let verified: LimitEstimate = engine.from_samples(&ratios);

    let ok = hyps.iter().all(|h| h.status != HypStatus::Failed);
    let conclusion = a.value.filter(|_| ok);
    let agree = conclusion.is_some_and(|a| cfg.agrees(a, &verified));
    Ok(RuleReport {
        rule: "lhospital_integral".into(),
        hypotheses: hyps,
        case,
        conclusion: conclusion.map(Conclusion::Limit),
        oracle: Some(Oracle::Limit(verified)),
        agree,
    })
}

/// Certifies `h(x) = ∫_{(a,x)} u dα / ∫_{(a,x)} v dα` monotone from a
/// monotone `w = u/v`, for a finite left end `a` of the domain.
pub fn monotone_integral(u: &Integrand, v: &Integrand, alpha: &dyn Regulated) -> Result<RuleReport, LsError> {
    let mut fs: Vec<&dyn Regulated> = u.parts();
    fs.extend(v.parts());
    fs.push(alpha);
    let (a, _) = common_domain(&fs)?;
    let a = a.finite().ok_or_else(|| LsError::Input("the left end of the domain must be finite".into()))?;
    let grid = monotone_grid(&fs, MONOTONE_GRID)?;
    let mut hyps = vec![increasing_hypothesis(alpha, &grid)];

    let vv: Vec<ExtReal> = grid.par_iter().map(|&x| v.at(x)).collect::<Result<_, _>>()?;
    let uu: Vec<ExtReal> = grid.par_iter().map(|&x| u.at(x)).collect::<Result<_, _>>()?;
    hyps.push(Hypothesis::new(&format!("{} has constant sign", v.name()), sign_of(&vv).is_some(), format!("{} grid points", grid.len())));
    let ws: Vec<f64> = uu.iter().zip(&vv).map(|(&p, &q)| ratio(p, q)).collect();
    let found = [Direction::Increasing, Direction::Decreasing]
        .into_iter()
        .find(|&d| grid_verdict(&ws, d, Tolerance::LIMIT).violations == 0);
    hyps.push(Hypothesis::new(
        &format!("{}/{} monotone", u.name(), v.name()),
        found.is_some(),
        format!("{} grid points", grid.len()),
    ));

    let m = LSMeasure::new(alpha);
    let fine = monotone_grid(&fs, 4 * MONOTONE_GRID)?;
    let head = |phi: &Integrand| m.integrate(phi, a, fine[0]);
    let (hu, hv) = (head(u), head(v));
    hyps.push(Hypothesis::new(
        &format!("{} and {} integrable from {a}", u.name(), v.name()),
        hu.is_ok() && hv.is_ok(),
        match (&hu, &hv) {
            (Err(e), _) | (_, Err(e)) => e.to_string(),
            _ => format!("on ({a}, {})", fine[0]),
        },
    ));
    let ok = hyps.iter().all(|h| h.status != HypStatus::Failed);
    let certificate = found.filter(|_| ok).map(|d| Certificate {
        direction: d,
        strict: ws.windows(2).all(|w| if d == Direction::Increasing { w[0] < w[1] } else { w[0] > w[1] }),
    });

    let verdict = match (hu, hv) {
        (Ok(hu), Ok(hv)) => {
            let (uc, ua) = m.pieces(u, &fine)?;
            let (vc, va) = m.pieces(v, &fine)?;
            let cumulative = |start: f64, cells: &[f64], atoms: &[f64]| {
                let mut acc = vec![start];
                let mut out = vec![start];
                for k in 0..cells.len() {
                    acc.push(cells[k]);
                    out.push(neumaier(acc.iter().copied()));
                    acc.push(atoms[k]);
                }
                out
            };
            let (hu, hv) = (cumulative(hu.value, &uc, &ua), cumulative(hv.value, &vc, &va));
            let hs: Vec<f64> = hu.iter().zip(&hv).map(|(p, q)| p / q).collect();
            Some(grid_verdict(&hs, found.unwrap_or(Direction::Increasing), Tolerance::new(1e-7, 1e-9)))
        }
        _ => None,
    };
    Ok(RuleReport {
        rule: "monotone_integral".into(),
        hypotheses: hyps,
        case: None,
        agree: certificate.is_some() && verdict.is_some_and(|v| v.violations == 0),
        conclusion: certificate.map(Conclusion::Monotone),
        oracle: verdict.map(Oracle::Grid),
    })
}
