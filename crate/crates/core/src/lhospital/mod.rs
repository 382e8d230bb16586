//! L'Hospital-type rules for `D_α`, each checked against a direct oracle.
//!
//! Hypotheses are verified on sample grids only, so a report says
//! `verified-on-grid` rather than "proved". A failed hypothesis does not
//! abort the computation: the report records it, withholds the conclusion
//! and still runs the oracle, so the two can be compared.

pub mod stolz;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::extreal::ExtReal;
use crate::limit::{LimitEngine, LimitEstimate, LimitStatus};
use crate::regulated::{approach_to, interior_grid, merge_points, Affine, Endpoint, RegError, Regulated};
use crate::stieltjes::{d_alpha, DerivError};
use crate::tol::Tolerance;

pub use stolz::stolz_limit;

/// Points inserted between consecutive schedule points when checking signs.
pub const REFINE: usize = 16;
/// Interior grid size for monotonicity checks; the oracle uses 4x as many.
pub const MONOTONE_GRID: usize = 256;
/// Breakpoint lists longer than this are not merged into check grids.
pub const MAX_GRID_BREAKPOINTS: usize = 20_000;
/// `|lim| <= ZERO_TOL` counts as a vanishing end.
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypStatus {
    VerifiedOnGrid,
    Failed,
    Assumed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub status: HypStatus,
    pub evidence: String,
}

impl Hypothesis {
    pub fn new(name: &str, ok: bool, evidence: impl Into<String>) -> Hypothesis {
        let status = if ok { HypStatus::VerifiedOnGrid } else { HypStatus::Failed };
        Hypothesis { name: name.to_string(), status, evidence: evidence.into() }
    }

    pub fn assumed(name: &str, evidence: impl Into<String>) -> Hypothesis {
        Hypothesis { name: name.to_string(), status: HypStatus::Assumed, evidence: evidence.into() }
    }
}

/// Which form of a rule applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// `f⁻, g⁻ -> 0`.
    ZeroOverZero,
    /// `g⁻ -> ±inf`.
    Infinite,
    /// Integrals of `u` and `v` converge near the endpoint.
    TailsConverge,
    /// The integral of `v` diverges toward the endpoint.
    IntegralDiverges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub direction: Direction,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    Limit(ExtReal),
    Monotone(Certificate),
}

/// Monotonicity of sampled values in a given direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridVerdict {
    pub direction: Direction,
    pub points: usize,
    pub violations: usize,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    Limit(LimitEstimate),
    Grid(GridVerdict),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleReport {
    pub rule: String,
    pub hypotheses: Vec<Hypothesis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<Case>,
    pub conclusion: Option<Conclusion>,
    pub oracle: Option<Oracle>,
    pub agree: bool,
}

impl RuleReport {
    pub fn all_verified(&self) -> bool {
        self.hypotheses.iter().all(|h| h.status != HypStatus::Failed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Hypothesis> {
        self.hypotheses.iter().filter(|h| h.status == HypStatus::Failed)
    }

    pub fn limit(&self) -> Option<ExtReal> {
        match self.conclusion {
            Some(Conclusion::Limit(v)) => Some(v),
            _ => None,
        }
    }

    pub fn certificate(&self) -> Option<Certificate> {
        match self.conclusion {
            Some(Conclusion::Monotone(c)) => Some(c),
            _ => None,
        }
    }

    pub fn oracle_limit(&self) -> Option<&LimitEstimate> {
        match &self.oracle {
            Some(Oracle::Limit(e)) => Some(e),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error(transparent)]
    Reg(#[from] RegError),
    #[error("{0}")]
    Input(String),
}

/// Limit-engine settings and the tolerance for conclusion/oracle agreement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConfig {
    pub engine: LimitEngine,
    pub agree: Tolerance,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig { engine: LimitEngine::default(), agree: Tolerance::AGREE }
    }
}

impl RuleConfig {
    /// Whether a conclusion matches an oracle estimate: within tolerance,
    /// or diverged toward the same infinity.
    pub fn agrees(&self, a: ExtReal, oracle: &LimitEstimate) -> bool {
        match (a, oracle.status, oracle.value) {
            (ExtReal::PosInf, LimitStatus::DivergedPos, _) | (ExtReal::NegInf, LimitStatus::DivergedNeg, _) => true,
            (ExtReal::Finite(a), LimitStatus::Converged, Some(ExtReal::Finite(b))) => self.agree.close(a, b),
            _ => false,
        }
    }
}

/// Intersection of the domains.
pub fn common_domain(fs: &[&dyn Regulated]) -> Result<(ExtReal, ExtReal), RuleError> {
    let a = fs.iter().map(|f| f.domain().0).max().expect("at least one function");
    let b = fs.iter().map(|f| f.domain().1).min().expect("at least one function");
    if a >= b {
        return Err(RuleError::Input("the functions have no common domain".into()));
    }
    Ok((a, b))
}

/// The schedule `x_k` toward `endpoint` of the common domain, cut at every
/// function's horizon.
pub fn common_schedule(fs: &[&dyn Regulated], endpoint: Endpoint, engine: &LimitEngine) -> Result<Vec<f64>, RuleError> {
    let approach = approach_to(common_domain(fs)?, endpoint);
    let horizon = fs.iter().filter_map(|f| f.horizon()).fold(f64::INFINITY, f64::min);
    let xs: Vec<f64> = approach.points(engine.max_k(&approach)).into_iter().take_while(|&x| x <= horizon).collect();
    if xs.len() < 3 {
        return Err(RuleError::Input(format!("only {} sample points fit before the representation horizon", xs.len())));
    }
    Ok(xs)
}

/// The schedule with `REFINE` evenly spaced points inserted in each gap,
/// plus the breakpoints in its span when there are not too many.
pub fn refining_grid(xs: &[f64], fs: &[&dyn Regulated]) -> Result<Vec<f64>, RegError> {
    let mut grid: Vec<f64> = Vec::with_capacity(xs.len() * (REFINE + 1));
    for w in xs.windows(2) {
        grid.extend((1..=REFINE).map(|i| w[0] + (w[1] - w[0]) * i as f64 / (REFINE + 1) as f64));
    }
    with_breakpoints(merge_points(grid, xs.iter().copied()), fs)
}

fn with_breakpoints(grid: Vec<f64>, fs: &[&dyn Regulated]) -> Result<Vec<f64>, RegError> {
    let (Some(&lo), Some(&hi)) = (grid.first(), grid.last()) else {
        return Ok(grid);
    };
    let mut extra = Vec::new();
    for f in fs {
        let bs = f.breakpoints(lo, hi)?;
        if bs.len() <= MAX_GRID_BREAKPOINTS {
            extra.extend(bs);
        }
    }
    Ok(merge_points(grid, extra))
}

fn d_alpha_on(f: &dyn Regulated, alpha: &dyn Regulated, xs: &[f64]) -> Result<Vec<ExtReal>, DerivError> {
    xs.par_iter().map(|&x| Ok(d_alpha(f, alpha, x)?.value)).collect()
}

/// `α⁻ <= α⁺` and `α⁺(x_i) < α⁻(x_{i+1})` along `xs`.
pub fn increasing_hypothesis(alpha: &dyn Regulated, xs: &[f64]) -> Hypothesis {
    let name = format!("{} strictly increasing", alpha.name());
    let mut prev: Option<(f64, f64)> = None;
    // Neighbouring samples whose values agree to rounding cannot show an
    // increase; they are counted, not failed.
    let mut unresolved = 0;
    for &x in xs {
        let (l, r) = match (alpha.left_limit(x), alpha.right_limit(x)) {
            (Ok(l), Ok(r)) => (l, r),
            (Err(e), _) | (_, Err(e)) => return Hypothesis::new(&name, false, e.to_string()),
        };
        if r < l {
            return Hypothesis::new(&name, false, format!("jumps down at x = {x}"));
        }
        if let Some((px, pr)) = prev {
            if pr >= l && crate::tol::unresolved(pr, l) {
                unresolved += 1;
            } else if pr >= l {
                return Hypothesis::new(&name, false, format!("{}⁺({px}) = {pr} >= {}⁻({x}) = {l}", alpha.name(), alpha.name()));
            }
        }
        prev = Some((x, r));
    }
    let mut evidence = span_evidence(xs);
    if unresolved > 0 {
        evidence.push_str(&format!(", {unresolved} steps below float resolution"));
    }
    Hypothesis::new(&name, true, evidence)
}

fn span_evidence(xs: &[f64]) -> String {
    match (xs.first(), xs.last()) {
        (Some(a), Some(b)) => format!("{} points in [{a}, {b}]", xs.len()),
        _ => "no points".into(),
    }
}

/// Every `D_αg` sample has the same strict sign.
fn sign_hypothesis(g: &dyn Regulated, xs: &[f64], dg: &[ExtReal]) -> Hypothesis {
    let name = format!("D_α{} is either positive or negative", g.name());
    let sign = dg.first().map_or(0, |d| d.signum());
    match dg.iter().position(|d| d.signum() != sign || sign == 0) {
        None => Hypothesis::new(&name, true, format!("sign {} at {}", if sign > 0 { "+" } else { "-" }, span_evidence(xs))),
        Some(i) => {
            let (x0, x1) = (xs[0], xs[i]);
            Hypothesis::new(&name, false, format!("D_α{}({x0}) = {} but D_α{}({x1}) = {}", g.name(), dg[0], g.name(), dg[i]))
        }
    }
}

pub fn limit_evidence(e: &LimitEstimate) -> String {
    match e.value {
        Some(v) => format!("{:?} to {v} from {} samples (error ~{:.1e})", e.status, e.samples_used, e.err_estimate),
        None => format!("{:?} after {} samples", e.status, e.samples_used),
    }
}

fn ratio_samples(f: &[ExtReal], g: &[ExtReal]) -> Vec<f64> {
    f.iter().zip(g).map(|(a, b)| a.checked_div(*b).map_or(f64::NAN, ExtReal::to_f64)).collect()
}

/// Limit of `f⁻/g⁻` along `xs`.
pub fn quotient_oracle(f: &dyn Regulated, g: &dyn Regulated, xs: &[f64], engine: &LimitEngine) -> LimitEstimate {
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| match (f.left_limit(x), g.left_limit(x)) {
            (Ok(a), Ok(b)) => a / b,
            _ => f64::NAN,
        })
        .collect();
    engine.from_samples(&ys)
}

fn end_limit(f: &dyn Regulated, xs: &[f64], engine: &LimitEngine) -> LimitEstimate {
    let ys: Vec<f64> = xs.iter().map(|&x| f.left_limit(x).unwrap_or(f64::NAN)).collect();
    engine.from_samples(&ys)
}

fn vanishes(e: &LimitEstimate) -> bool {
    e.is_converged() && e.value.is_some_and(|v| v.finite().is_some_and(|v| v.abs() <= ZERO_TOL))
}

/// `lim f⁻/g⁻` at `endpoint` from `lim D_αf/D_αg`.
pub fn lhospital_limit(f: &dyn Regulated, g: &dyn Regulated, alpha: &dyn Regulated, endpoint: Endpoint, cfg: &RuleConfig) -> Result<RuleReport, RuleError> {
    let fs = [f, g, alpha];
    let xs = common_schedule(&fs, endpoint, &cfg.engine)?;
    let grid = refining_grid(&xs, &fs)?;
    let mut hyps = vec![increasing_hypothesis(alpha, &grid)];

    let derivs = d_alpha_on(f, alpha, &grid).and_then(|df| Ok((df, d_alpha_on(g, alpha, &grid)?)));
    let mut conclusion = None;
    match derivs {
        Err(e) => hyps.push(Hypothesis::new("D_αf and D_αg exist on the grid", false, e.to_string())),
        Ok((df, dg)) => {
            hyps.push(Hypothesis::new("D_αf and D_αg exist on the grid", true, span_evidence(&grid)));
            hyps.push(sign_hypothesis(g, &grid, &dg));
            let on_schedule: Vec<usize> = xs.iter().map(|x| grid.binary_search_by(|p| p.total_cmp(x)).expect("schedule is on the grid")).collect();
            let ratios = ratio_samples(&df, &dg);
            let ys: Vec<f64> = on_schedule.iter().map(|&i| ratios[i]).collect();
            let a = cfg.engine.from_samples(&ys);
            hyps.push(Hypothesis::new("D_αf/D_αg has a limit", a.has_value(), limit_evidence(&a)));
            conclusion = a.value;
        }
    }

    let (fe, ge) = (end_limit(f, &xs, &cfg.engine), end_limit(g, &xs, &cfg.engine));
    let case = if vanishes(&fe) && vanishes(&ge) {
        Some(Case::ZeroOverZero)
    } else if matches!(ge.status, LimitStatus::DivergedPos | LimitStatus::DivergedNeg) {
        Some(Case::Infinite)
    } else {
        None
    };
    hyps.push(Hypothesis::new(
        "rule applicable (f, g -> 0 or g -> ±inf)",
        case.is_some(),
        format!("{}: {}; {}: {}", f.name(), limit_evidence(&fe), g.name(), limit_evidence(&ge)),
    ));

    let oracle = quotient_oracle(f, g, &xs, &cfg.engine);
    let ok = hyps.iter().all(|h| h.status != HypStatus::Failed);
    let conclusion = conclusion.filter(|_| ok);
    let agree = conclusion.is_some_and(|a| cfg.agrees(a, &oracle));
    Ok(RuleReport {
        rule: "lhospital".into(),
        hypotheses: hyps,
        case,
        conclusion: conclusion.map(Conclusion::Limit),
        oracle: Some(Oracle::Limit(oracle)),
        agree,
    })
}

/// Grid for monotonicity checks on the common domain, with breakpoints.
pub fn monotone_grid(fs: &[&dyn Regulated], n: usize) -> Result<Vec<f64>, RuleError> {
    let (a, b) = common_domain(fs)?;
    let horizon = fs.iter().filter_map(|f| f.horizon()).fold(f64::INFINITY, f64::min);
    let grid: Vec<f64> = interior_grid(a, b, n).into_iter().filter(|&x| x <= horizon).collect();
    Ok(with_breakpoints(grid, fs)?)
}

/// Checks `ys` for monotonicity in `direction`, allowing `tol` slack.
pub fn grid_verdict(ys: &[f64], direction: Direction, tol: Tolerance) -> GridVerdict {
    let mut violations = 0;
    let mut max_violation = 0.0f64;
    for w in ys.windows(2) {
        let drop = match direction {
            Direction::Increasing => w[0] - w[1],
            Direction::Decreasing => w[1] - w[0],
        };
        if drop.is_nan() || drop > tol.slack(w[0].abs().max(w[1].abs())) {
            violations += 1;
            max_violation = max_violation.max(if drop.is_nan() { f64::INFINITY } else { drop });
        }
    }
    GridVerdict { direction, points: ys.len(), violations, max_violation }
}

fn strictly(ys: &[f64], direction: Direction) -> bool {
    ys.windows(2).all(|w| match direction {
        Direction::Increasing => w[0] < w[1],
        Direction::Decreasing => w[0] > w[1],
    })
}

/// Certifies `f⁻/g⁻` monotone from a monotone `D_αf/D_αg`, given
/// `f⁻, g⁻ -> 0` at `zero_end`.
pub fn monotone_certify(f: &dyn Regulated, g: &dyn Regulated, alpha: &dyn Regulated, zero_end: Endpoint, cfg: &RuleConfig) -> Result<RuleReport, RuleError> {
    let fs = [f, g, alpha];
    let grid = monotone_grid(&fs, MONOTONE_GRID)?;
    let mut hyps = vec![increasing_hypothesis(alpha, &grid)];

    let xs = common_schedule(&fs, zero_end, &cfg.engine)?;
    let (fe, ge) = (end_limit(f, &xs, &cfg.engine), end_limit(g, &xs, &cfg.engine));
    hyps.push(Hypothesis::new(
        &format!("{}⁻ and {}⁻ vanish at {}", f.name(), g.name(), endpoint_label(zero_end)),
        vanishes(&fe) && vanishes(&ge),
        format!("{}: {}; {}: {}", f.name(), limit_evidence(&fe), g.name(), limit_evidence(&ge)),
    ));

    let mut direction = None;
    match d_alpha_on(f, alpha, &grid).and_then(|df| Ok((df, d_alpha_on(g, alpha, &grid)?))) {
        Err(e) => hyps.push(Hypothesis::new("D_αf and D_αg exist on the grid", false, e.to_string())),
        Ok((df, dg)) => {
            hyps.push(Hypothesis::new("D_αf and D_αg exist on the grid", true, span_evidence(&grid)));
            hyps.push(sign_hypothesis(g, &grid, &dg));
            let ratios = ratio_samples(&df, &dg);
            let tol = Tolerance::LIMIT;
            let found = [Direction::Increasing, Direction::Decreasing]
                .into_iter()
                .map(|d| (d, grid_verdict(&ratios, d, tol)))
                .find(|(_, v)| v.violations == 0);
            let evidence = match found {
                Some((d, _)) => format!("{d:?} at {}", span_evidence(&grid)),
                None => {
                    let v = grid_verdict(&ratios, Direction::Increasing, tol);
                    format!("neither direction holds; {} increasing violations (largest {:.3e})", v.violations, v.max_violation)
                }
            };
            hyps.push(Hypothesis::new("D_αf/D_αg monotone", found.is_some(), evidence));
            direction = found.map(|(d, _)| Certificate { direction: d, strict: strictly(&ratios, d) });
        }
    }

    let fine = monotone_grid(&fs, 4 * MONOTONE_GRID)?;
    let quotients: Vec<f64> = fine
        .iter()
        .map(|&x| match (f.left_limit(x), g.left_limit(x)) {
            (Ok(a), Ok(b)) => a / b,
            _ => f64::NAN,
        })
        .collect();
    let ok = hyps.iter().all(|h| h.status != HypStatus::Failed);
    let certificate = direction.filter(|_| ok);
    let verdict = grid_verdict(&quotients, direction.map_or(Direction::Increasing, |c| c.direction), Tolerance::RULE);
    Ok(RuleReport {
        rule: "monotone".into(),
        hypotheses: hyps,
        case: None,
        agree: certificate.is_some() && verdict.violations == 0,
        conclusion: certificate.map(Conclusion::Monotone),
        oracle: Some(Oracle::Grid(verdict)),
    })
}

/// The monotone rule for `(f⁻ - A)/(g⁻ - B)` where `f⁻ -> A` and
/// `g⁻ -> B` at `zero_end`.
pub fn monotone_certify_shifted(
    f: &dyn Regulated,
    g: &dyn Regulated,
    alpha: &dyn Regulated,
    zero_end: Endpoint,
    shift_f: f64,
    shift_g: f64,
    cfg: &RuleConfig,
) -> Result<RuleReport, RuleError> {
    let f0 = Affine::new(f, 1.0, -shift_f);
    let g0 = Affine::new(g, 1.0, -shift_g);
    let mut report = monotone_certify(&f0, &g0, alpha, zero_end, cfg)?;
    report.rule = "monotone_shifted".into();
    Ok(report)
}

pub fn endpoint_label(e: Endpoint) -> &'static str {
    match e {
        Endpoint::A => "a",
        Endpoint::B => "b",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regulated::deffile::parse_definitions;

    #[test]
    fn reciprocal_over_itself() {
        let d = parse_definitions("fn f on (0, inf): piece (0, inf): 1/x\nfn id on (0, inf): piece (0, inf): x").unwrap();
        let f = d.function("f").unwrap();
        let r = lhospital_limit(f, f, d.function("id").unwrap(), Endpoint::B, &RuleConfig::default()).unwrap();
        assert!(r.all_verified(), "{r:?}");
        assert_eq!(r.case, Some(Case::ZeroOverZero));
        assert!(r.agree && (r.limit().unwrap().to_f64() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sine_over_x_at_zero() {
        let d = parse_definitions("fn f on (0, 1): piece (0, 1): sin(x)\nfn g on (0, 1): piece (0, 1): x").unwrap();
        let (f, g) = (d.function("f").unwrap(), d.function("g").unwrap());
        let r = lhospital_limit(f, g, g, Endpoint::A, &RuleConfig::default()).unwrap();
        assert!(r.agree, "{r:?}");
        assert!((r.limit().unwrap().to_f64() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_basic() {
        let d = parse_definitions(
            "fn sq on (0, inf): piece (0, inf): x^2\nfn id on (0, inf): piece (0, inf): x\n\
             fn s on (0, pi/2): piece (0, pi/2): sin(x)\nfn x on (0, pi/2): piece (0, pi/2): x",
        )
        .unwrap();
        let id = d.function("id").unwrap();
        let r = monotone_certify(d.function("sq").unwrap(), id, id, Endpoint::A, &RuleConfig::default()).unwrap();
        assert_eq!(r.certificate(), Some(Certificate { direction: Direction::Increasing, strict: true }), "{r:?}");
        assert!(r.agree);
        let x = d.function("x").unwrap();
        let r = monotone_certify(d.function("s").unwrap(), x, x, Endpoint::A, &RuleConfig::default()).unwrap();
        assert_eq!(r.certificate().map(|c| c.direction), Some(Direction::Decreasing), "{r:?}");
        assert!(r.agree);
    }
}
