use std::sync::{Arc, RwLock};

use serde::Serialize;

use super::{OneSidedPair, RegError, Regulated, Side};
use crate::expr::Expr;
use crate::extreal::ExtReal;
use crate::limit::{Approach, LimitEngine, LimitStatus};

/// Family cells whose construction-time invariants are checked.
pub const DEFAULT_HORIZON: i64 = 10_000;
/// Family cells reachable at all; offsets are cached up to this many.
pub const MAX_FAMILY_CELLS: i64 = 1 << 23;

/// Which value a function takes at its breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    /// The owning (left) cell's body, falling back to the left limit.
    Plain,
    /// `f⁻`
    Left,
    /// `f⁺`
    Right,
}

/// A finite cell `(left, right]`.
#[derive(Debug, Clone)]
pub struct Piece {
    pub left: f64,
    pub right: f64,
    pub body: Expr,
    deriv: Option<Expr>,
}

impl Piece {
    pub fn new(left: f64, right: f64, body: Expr) -> Piece {
        let deriv = body.diff().ok();
        Piece { left, right, body, deriv }
    }
}

/// Additive constants `C_n` on family cells.
#[derive(Debug, Clone, PartialEq)]
pub enum Offset {
    None,
    /// Chosen so that the function is continuous at every `p(n)`; the first
    /// cell is glued to the last finite piece (or gets 0 if there is none).
    Continuous,
    /// `C_start = init`, `C_n = C_{n-1} + step(n)` with the steps cycled by
    /// `n mod steps.len()`.
    Recurrence { init: f64, steps: Vec<Expr> },
}

/// Cells `(p(n), p(n+1)]` for `n >= start` with bodies `e(x, n) + C_n`;
/// bodies are cycled by `n mod bodies.len()`.
#[derive(Debug, Clone)]
pub struct Family {
    pub start: i64,
    pub breakpoint: Expr,
    pub bodies: Vec<Expr>,
    pub offset: Offset,
    derivs: Vec<Option<Expr>>,
    affine: Option<(f64, f64)>,
    cache: Arc<RwLock<OffsetCache>>,
}

#[derive(Debug, Default)]
struct OffsetCache {
    values: Vec<f64>,
    sum: f64,
    comp: f64,
}

impl Family {
    pub fn new(start: i64, breakpoint: Expr, bodies: Vec<Expr>, offset: Offset) -> Family {
        let derivs = bodies.iter().map(|b| b.diff().ok()).collect();
        let p = |k: i64| breakpoint.eval_n(start + k).ok();
        let affine = match (p(0), p(1), p(2)) {
            (Some(p0), Some(p1), Some(p2)) if p1 > p0 && p2 - p1 == p1 - p0 => Some((p0, p1 - p0)),
            _ => None,
        };
        Family {
            start,
            breakpoint,
            bodies,
            offset,
            derivs,
            affine,
            cache: Arc::default(),
        }
    }

    fn slot(&self, n: i64, len: usize) -> usize {
        n.rem_euclid(len as i64) as usize
    }

    fn body(&self, n: i64) -> (&Expr, Option<&Expr>) {
        let i = self.slot(n, self.bodies.len());
        (&self.bodies[i], self.derivs[i].as_ref())
    }
}

/// The cell owning a point.
#[derive(Debug, Clone, Copy)]
pub struct Cell<'a> {
    pub left: f64,
    pub right: f64,
    pub body: &'a Expr,
    pub deriv: Option<&'a Expr>,
    /// Family index, for family cells.
    pub index: Option<i64>,
    pub offset: f64,
    slot: Slot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Piece(usize),
    Family(i64),
}

impl Cell<'_> {
    pub fn eval(&self, x: f64) -> Result<f64, crate::expr::ExprError> {
        Ok(self.body.eval(x, self.index)? + self.offset)
    }

    pub fn eval_deriv(&self, x: f64) -> Option<f64> {
        self.deriv?.eval(x, self.index).ok()
    }
}

/// A regulated function given by closed-form cells on `(a, b)`.
#[derive(Debug, Clone)]
pub struct PiecewiseFn {
    name: String,
    a: ExtReal,
    b: ExtReal,
    pieces: Vec<Piece>,
    family: Option<Family>,
    view: View,
}

pub struct Builder {
    name: String,
    a: ExtReal,
    b: ExtReal,
    pieces: Vec<Piece>,
    family: Option<Family>,
    continuous: bool,
    horizon: i64,
}

impl Builder {
    pub fn piece(mut self, left: f64, right: f64, body: Expr) -> Builder {
        self.pieces.push(Piece::new(left, right, body));
        self
    }

    pub fn family(mut self, family: Family) -> Builder {
        self.family = Some(family);
        self
    }

    /// Reject the function unless every checked junction is continuous.
    pub fn continuous(mut self, yes: bool) -> Builder {
        self.continuous = yes;
        self
    }

    /// Number of family cells verified at construction.
    pub fn horizon(mut self, cells: i64) -> Builder {
        self.horizon = cells.clamp(1, MAX_FAMILY_CELLS - 1);
        self
    }

    pub fn build(self) -> Result<PiecewiseFn, RegError> {
        let f = PiecewiseFn {
            name: self.name,
            a: self.a,
            b: self.b,
            pieces: self.pieces,
            family: self.family,
            view: View::Plain,
        };
        f.check_layout(self.horizon)?;
        f.check_regular(self.horizon, self.continuous)?;
        Ok(f)
    }
}

fn neumaier(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

fn same_point(p: f64, q: f64) -> bool {
    p == q || (p - q).abs() <= 1e-12 * (1.0 + p.abs().max(q.abs()))
}

impl PiecewiseFn {
    pub fn builder(name: impl Into<String>, a: ExtReal, b: ExtReal) -> Builder {
        Builder {
            name: name.into(),
            a,
            b,
            pieces: Vec::new(),
            family: None,
            continuous: false,
            horizon: DEFAULT_HORIZON,
        }
    }

    /// One body on the whole domain.
    pub fn single(name: impl Into<String>, a: ExtReal, b: ExtReal, body: Expr) -> Result<PiecewiseFn, RegError> {
        PiecewiseFn::builder(name, a, b).piece(a.to_f64(), b.to_f64(), body).build()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn family(&self) -> Option<&Family> {
        self.family.as_ref()
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn with_view(&self, view: View) -> PiecewiseFn {
        PiecewiseFn { view, ..self.clone() }
    }

    /// `f⁻` as a function in its own right.
    pub fn left_view(&self) -> PiecewiseFn {
        self.with_view(View::Left)
    }

    /// `f⁺` as a function in its own right.
    pub fn right_view(&self) -> PiecewiseFn {
        self.with_view(View::Right)
    }

    pub fn renamed(&self, name: impl Into<String>) -> PiecewiseFn {
        PiecewiseFn { name: name.into(), ..self.clone() }
    }

    fn invalid(&self, reason: impl Into<String>) -> RegError {
        RegError::Invalid { name: self.name.clone(), reason: reason.into() }
    }

    fn eval_err(&self, source: crate::expr::ExprError) -> RegError {
        RegError::Eval { name: self.name.clone(), source }
    }

    fn p(&self, fam: &Family, n: i64) -> Result<f64, RegError> {
        fam.breakpoint.eval_n(n).map_err(|e| self.eval_err(e))
    }

    fn check_layout(&self, horizon: i64) -> Result<(), RegError> {
        let (a, b) = (self.a.to_f64(), self.b.to_f64());
        if self.a >= self.b {
            return Err(self.invalid(format!("empty domain ({}, {})", self.a, self.b)));
        }
        if self.pieces.is_empty() && self.family.is_none() {
            return Err(self.invalid("no cells"));
        }
        let mut edge = a;
        for (i, p) in self.pieces.iter().enumerate() {
            if p.body.uses_n() {
                return Err(self.invalid(format!("piece {} uses the family index n", i + 1)));
            }
            if !same_point(p.left, edge) {
                return Err(self.invalid(format!("gap or overlap at {} before piece ({}, {}]", edge, p.left, p.right)));
            }
            if !(p.left < p.right) {
                return Err(self.invalid(format!("piece ({}, {}] is empty", p.left, p.right)));
            }
            edge = p.right;
        }
        let Some(fam) = &self.family else {
            if !same_point(edge, b) {
                return Err(self.invalid(format!("cells end at {} but the domain ends at {}", edge, self.b)));
            }
            return Ok(());
        };
        if fam.breakpoint.uses_x() {
            return Err(self.invalid("family breakpoint formula uses x"));
        }
        if fam.bodies.is_empty() {
            return Err(self.invalid("family has no body"));
        }
        if let Offset::Recurrence { init, steps } = &fam.offset {
            if steps.is_empty() || !init.is_finite() || steps.iter().any(|s| s.uses_x()) {
                return Err(self.invalid("family offset recurrence needs a finite start and steps in n"));
            }
        }
        let p0 = self.p(fam, fam.start)?;
        if !same_point(p0, edge) {
            return Err(self.invalid(format!("family starts at p({}) = {} but the previous cell ends at {}", fam.start, p0, edge)));
        }
        let mut prev = p0;
        for n in fam.start + 1..=fam.start + horizon {
            let q = self.p(fam, n)?;
            if !(q > prev) {
                return Err(self.invalid(format!("p(n) is not strictly increasing at n = {n}")));
            }
            if ExtReal::Finite(q) >= self.b {
                return Err(self.invalid(format!("p({n}) = {q} leaves the domain")));
            }
            prev = q;
        }
        Ok(())
    }

    fn check_regular(&self, horizon: i64, continuous: bool) -> Result<(), RegError> {
        let mut cuts: Vec<f64> = self.pieces.iter().map(|p| p.right).collect();
        if let Some(fam) = &self.family {
            for n in fam.start + 1..=fam.start + horizon {
                cuts.push(self.p(fam, n)?);
            }
        } else {
            cuts.pop();
        }
        for &x in &cuts {
            let pair = self.one_sided(x)?;
            for side in [Side::Left, Side::Right] {
                if !pair.side(side).is_finite() {
                    return Err(RegError::InfiniteLimit { name: self.name.clone(), x, side });
                }
            }
            if continuous {
                let (l, r) = (pair.left.to_f64(), pair.right.to_f64());
                if (r - l).abs() > 1e-9 * (1.0 + l.abs().max(r.abs())) {
                    return Err(RegError::Discontinuous { name: self.name.clone(), x, jump: r - l });
                }
            }
        }
        // every cell must evaluate somewhere inside
        let mut edges = vec![self.a.to_f64()];
        edges.extend(cuts.iter().copied());
        if self.family.is_none() {
            edges.push(self.b.to_f64());
        }
        for w in edges.windows(2) {
            let mid = match (w[0].is_finite(), w[1].is_finite()) {
                (true, true) => 0.5 * (w[0] + w[1]),
                (true, false) => w[0] + 1.0,
                (false, true) => w[1] - 1.0,
                (false, false) => 0.0,
            };
            self.value(mid)?;
        }
        Ok(())
    }

    /// The cell `(left, right]` owning `x`.
    pub fn locate(&self, x: f64) -> Result<Cell<'_>, RegError> {
        if !self.contains(x) {
            return Err(RegError::OutOfDomain { name: self.name.clone(), x, a: self.a, b: self.b });
        }
        let i = self.pieces.partition_point(|p| p.right < x);
        if i < self.pieces.len() {
            return Ok(self.piece_cell(i));
        }
        let fam = self.family.as_ref().ok_or_else(|| self.invalid("no cell owns x"))?;
        let n = self.family_index(fam, x)?;
        self.family_cell(fam, n)
    }

    fn piece_cell(&self, i: usize) -> Cell<'_> {
        let p = &self.pieces[i];
        Cell {
            left: p.left,
            right: p.right,
            body: &p.body,
            deriv: p.deriv.as_ref(),
            index: None,
            offset: 0.0,
            slot: Slot::Piece(i),
        }
    }

    fn family_cell<'a>(&'a self, fam: &'a Family, n: i64) -> Result<Cell<'a>, RegError> {
        if n - fam.start >= MAX_FAMILY_CELLS {
            return Err(RegError::HorizonExhausted { name: self.name.clone(), x: self.p(fam, n)? });
        }
        let (body, deriv) = fam.body(n);
        Ok(Cell {
            left: self.p(fam, n)?,
            right: self.p(fam, n + 1)?,
            body,
            deriv,
            index: Some(n),
            offset: self.offset(fam, n)?,
            slot: Slot::Family(n),
        })
    }

    /// `n` with `p(n) < x <= p(n+1)`; `x` is known to exceed `p(start)`.
    fn family_index(&self, fam: &Family, x: f64) -> Result<i64, RegError> {
        let start = fam.start;
        let owns = |n: i64| -> Result<bool, RegError> { Ok(self.p(fam, n)? < x && x <= self.p(fam, n + 1)?) };
        if let Some((p0, d)) = fam.affine {
            let guess = ((x - p0) / d).ceil() - 1.0;
            if guess.is_finite() && guess >= 0.0 && guess < MAX_FAMILY_CELLS as f64 {
                let g = start + guess as i64;
                for n in [g, g - 1, g + 1] {
                    if n >= start && owns(n)? {
                        return Ok(n);
                    }
                }
            }
        }
        let exhausted = || RegError::HorizonExhausted { name: self.name.clone(), x };
        let mut lo = start;
        let mut step = 1i64;
        let mut hi = loop {
            let hi = lo + step;
            if hi - start > MAX_FAMILY_CELLS {
                return Err(exhausted());
            }
            if self.p(fam, hi)? >= x {
                break hi;
            }
            lo = hi;
            step *= 2;
        };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.p(fam, mid)? < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    fn next_cell(&self, c: &Cell<'_>) -> Result<Cell<'_>, RegError> {
        let past_end = || RegError::OutOfDomain { name: self.name.clone(), x: c.right, a: self.a, b: self.b };
        match c.slot {
            Slot::Piece(i) if i + 1 < self.pieces.len() => Ok(self.piece_cell(i + 1)),
            Slot::Piece(_) => {
                let fam = self.family.as_ref().ok_or_else(past_end)?;
                self.family_cell(fam, fam.start)
            }
            Slot::Family(n) => self.family_cell(self.family.as_ref().ok_or_else(past_end)?, n + 1),
        }
    }

    fn offset(&self, fam: &Family, n: i64) -> Result<f64, RegError> {
        if fam.offset == Offset::None {
            return Ok(0.0);
        }
        let idx = (n - fam.start) as usize;
        {
            let cache = fam.cache.read().unwrap_or_else(|e| e.into_inner());
            if let Some(&v) = cache.values.get(idx) {
                return Ok(v);
            }
        }
        let mut cache = fam.cache.write().unwrap_or_else(|e| e.into_inner());
        while cache.values.len() <= idx {
            let m = fam.start + cache.values.len() as i64;
            if m == fam.start {
                cache.sum = self.initial_offset(fam)?;
                cache.comp = 0.0;
            } else {
                let step = self.offset_step(fam, m)?;
                let OffsetCache { sum, comp, .. } = &mut *cache;
                neumaier(sum, comp, step);
            }
            let v = cache.sum + cache.comp;
            cache.values.push(v);
        }
        Ok(cache.values[idx])
    }

    fn initial_offset(&self, fam: &Family) -> Result<f64, RegError> {
        match &fam.offset {
            Offset::None => Ok(0.0),
            Offset::Recurrence { init, .. } => Ok(*init),
            Offset::Continuous => {
                let Some(last) = self.pieces.len().checked_sub(1) else {
                    return Ok(0.0);
                };
                let x = self.p(fam, fam.start)?;
                let before = self
                    .cell_limit(&self.piece_cell(last), x, Side::Left)?
                    .finite()
                    .ok_or(RegError::InfiniteLimit { name: self.name.clone(), x, side: Side::Left })?;
                let after = self.bare_family_limit(fam, fam.start, x, Side::Right)?;
                Ok(before - after)
            }
        }
    }

    fn offset_step(&self, fam: &Family, m: i64) -> Result<f64, RegError> {
        match &fam.offset {
            Offset::None => Ok(0.0),
            Offset::Recurrence { steps, .. } => {
                let step = &steps[fam.slot(m, steps.len())];
                step.eval_n(m).map_err(|e| self.eval_err(e))
            }
            Offset::Continuous => {
                let x = self.p(fam, m)?;
                let before = self.bare_family_limit(fam, m - 1, x, Side::Left)?;
                let after = self.bare_family_limit(fam, m, x, Side::Right)?;
                Ok(before - after)
            }
        }
    }

    /// One-sided limit of family body `n` (without its offset) at an end of
    /// its cell.
    fn bare_family_limit(&self, fam: &Family, n: i64, x: f64, side: Side) -> Result<f64, RegError> {
        let (body, deriv) = fam.body(n);
        let cell = Cell {
            left: self.p(fam, n)?,
            right: self.p(fam, n + 1)?,
            body,
            deriv,
            index: Some(n),
            offset: 0.0,
            slot: Slot::Family(n),
        };
        self.cell_limit(&cell, x, side)?
            .finite()
            .ok_or(RegError::InfiniteLimit { name: self.name.clone(), x, side })
    }

    /// Limit of a cell body at `x` from `side`: the body's value when it is
    /// defined there, otherwise a sampled limit.
    fn cell_limit(&self, c: &Cell<'_>, x: f64, side: Side) -> Result<ExtReal, RegError> {
        if let Ok(v) = c.eval(x) {
            return Ok(ExtReal::Finite(v));
        }
        let room = match side {
            Side::Left => x - c.left,
            Side::Right => c.right - x,
        };
        let h0 = room.min(1.0) / 4.0;
        let approach = match side {
            Side::Left => Approach::FromLeft { x, h0 },
            Side::Right => Approach::FromRight { x, h0 },
        };
        let est = LimitEngine::default().limit(approach, |t| Some(c.eval(t).unwrap_or(f64::NAN)));
        match est.status {
            LimitStatus::Converged | LimitStatus::DivergedPos | LimitStatus::DivergedNeg => {
                Ok(est.value.expect("converged and diverged estimates carry a value"))
            }
            status => Err(RegError::NotRegulated {
                name: self.name.clone(),
                x,
                side,
                status,
                estimate: Box::new(est),
            }),
        }
    }
}

impl Regulated for PiecewiseFn {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> (ExtReal, ExtReal) {
        (self.a, self.b)
    }

    fn horizon(&self) -> Option<f64> {
        let fam = self.family.as_ref()?;
        self.p(fam, fam.start + MAX_FAMILY_CELLS).ok()
    }

    fn value(&self, x: f64) -> Result<f64, RegError> {
        match self.view {
            View::Plain => {
                let c = self.locate(x)?;
                match c.eval(x) {
                    Ok(v) => Ok(v),
                    Err(_) => self.left_limit(x),
                }
            }
            View::Left => self.left_limit(x),
            View::Right => self.right_limit(x),
        }
    }

    fn one_sided(&self, x: f64) -> Result<OneSidedPair, RegError> {
        let c = self.locate(x)?;
        let left = self.cell_limit(&c, x, Side::Left)?;
        let right = if x < c.right {
            self.cell_limit(&c, x, Side::Right)?
        } else {
            self.cell_limit(&self.next_cell(&c)?, x, Side::Right)?
        };
        Ok(OneSidedPair { left, right })
    }

    fn breakpoints(&self, s: f64, t: f64) -> Result<Vec<f64>, RegError> {
        let mut out: Vec<f64> = self.pieces.iter().map(|p| p.right).filter(|&q| q > s && q < t).collect();
        if let Some(fam) = &self.family {
            let p0 = self.p(fam, fam.start)?;
            let mut n = if s < p0 { fam.start } else { self.family_index(fam, s)? + 1 };
            loop {
                let q = self.p(fam, n)?;
                if q >= t {
                    break;
                }
                if n - fam.start > MAX_FAMILY_CELLS {
                    return Err(RegError::HorizonExhausted { name: self.name.clone(), x: q });
                }
                if q > s && out.last() != Some(&q) {
                    out.push(q);
                }
                n += 1;
            }
        }
        Ok(out)
    }

    fn gap(&self, x: f64) -> Result<f64, RegError> {
        let c = self.locate(x)?;
        let right = if x < c.right { c.right } else { self.next_cell(&c)?.right };
        Ok((x - c.left).min(right - x))
    }

    fn one_sided_derivs(&self, x: f64) -> Option<(f64, f64)> {
        let c = self.locate(x).ok()?;
        let l = c.eval_deriv(x)?;
        let r = if x < c.right { l } else { self.next_cell(&c).ok()?.eval_deriv(x)? };
        Some((l, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn fin(v: f64) -> ExtReal {
        ExtReal::Finite(v)
    }

    /// `x + n` on `(n, n+1]`, with jumps of 1 at the positive integers.
    fn stair() -> PiecewiseFn {
        PiecewiseFn::builder("alpha", fin(0.0), ExtReal::PosInf)
            .family(Family::new(0, e("n"), vec![e("x + n")], Offset::None))
            .build()
            .unwrap()
    }

    #[test]
    fn locate_family_cells() {
        let a = stair();
        let c = a.locate(1.5).unwrap();
        assert_eq!((c.left, c.right, c.index), (1.0, 2.0, Some(1)));
        assert_eq!(c.body.to_string(), "x + n");
        let c = a.locate(1.0).unwrap();
        assert_eq!((c.left, c.right, c.index), (0.0, 1.0, Some(0)));
        assert!(matches!(a.locate(0.0), Err(RegError::OutOfDomain { .. })));
        let c = a.locate(123456.5).unwrap();
        assert_eq!(c.index, Some(123456));
    }

    #[test]
    fn locate_by_search_when_not_affine() {
        let f = PiecewiseFn::builder("sq", fin(0.0), ExtReal::PosInf)
            .family(Family::new(0, e("n^2"), vec![e("x")], Offset::None))
            .horizon(100)
            .build()
            .unwrap();
        for x in [0.5, 1.0, 1.01, 17.0, 99.9, 12345.6] {
            let c = f.locate(x).unwrap();
            assert!(c.left < x && x <= c.right, "{x} in ({}, {}]", c.left, c.right);
        }
    }

    #[test]
    fn one_sided_at_jump() {
        let a = stair();
        assert_eq!(a.one_sided(1.0).unwrap(), OneSidedPair { left: fin(1.0), right: fin(2.0) });
        assert_eq!(a.one_sided(2.5).unwrap(), OneSidedPair::both(4.5));
        assert_eq!(a.value(1.0).unwrap(), 1.0);
        assert_eq!(a.right_view().value(1.0).unwrap(), 2.0);
    }

    #[test]
    fn breakpoint_listing() {
        let a = stair();
        assert_eq!(a.breakpoints(0.5, 2.5).unwrap(), vec![1.0, 2.0]);
        let j = super::super::jumps(&a, 0.5, 2.5).unwrap();
        assert!(j.iter().all(|b| b.jump == 1.0));
        let f = PiecewiseFn::single("sq", fin(0.0), fin(10.0), e("x^2")).unwrap();
        assert!(f.breakpoints(1.0, 9.0).unwrap().is_empty());
    }

    #[test]
    fn removable_singularity_uses_the_limit() {
        let g = PiecewiseFn::builder("g", ExtReal::NegInf, ExtReal::PosInf)
            .piece(f64::NEG_INFINITY, 0.0, e("x*sin(1/x) + 2*x"))
            .piece(0.0, f64::INFINITY, e("x*sin(1/x)"))
            .build()
            .unwrap();
        let p = g.one_sided(0.0).unwrap();
        assert!(p.left.to_f64().abs() < 1e-12 && p.right.to_f64().abs() < 1e-12);
        assert!(g.value(0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn recurrence_offsets() {
        // x + C_n with C_n - C_{n-1} = 1 + 1/(n+1)
        let f = PiecewiseFn::builder("f", fin(0.0), ExtReal::PosInf)
            .family(Family::new(
                0,
                e("n"),
                vec![e("x")],
                Offset::Recurrence { init: 0.0, steps: vec![e("1 + 1/(n+1)")] },
            ))
            .build()
            .unwrap();
        let mut c = 0.0;
        for n in 1..50 {
            c += 1.0 + 1.0 / (n as f64 + 1.0);
            let p = f.one_sided(n as f64).unwrap();
            assert!((p.jump().unwrap() - (1.0 + 1.0 / (n as f64 + 1.0))).abs() < 1e-12);
            assert!((p.right.to_f64() - (n as f64 + c)).abs() < 1e-9);
        }
    }

    #[test]
    fn continuous_offsets_glue_cells() {
        let g = PiecewiseFn::builder("g", fin(0.0), ExtReal::PosInf)
            .family(Family::new(0, e("n"), vec![e("(x-n)^2*(x-n-2)^2"), e("x^4")], Offset::Continuous))
            .continuous(true)
            .build()
            .unwrap();
        // A_2 = 16, A_3 = -64
        assert_eq!(g.locate(2.5).unwrap().offset, 16.0);
        assert_eq!(g.locate(3.5).unwrap().offset, -64.0);
    }

    #[test]
    fn construction_rejects_bad_layouts() {
        let gap = PiecewiseFn::builder("f", fin(0.0), fin(2.0))
            .piece(0.0, 1.0, e("x"))
            .piece(1.5, 2.0, e("x"))
            .build();
        assert!(matches!(gap, Err(RegError::Invalid { .. })));
        let pole = PiecewiseFn::builder("f", fin(-1.0), fin(1.0))
            .piece(-1.0, 0.0, e("1/x"))
            .piece(0.0, 1.0, e("x"))
            .build();
        assert!(matches!(pole, Err(RegError::InfiniteLimit { .. })));
        let flat = PiecewiseFn::builder("f", fin(0.0), ExtReal::PosInf)
            .family(Family::new(0, e("n - n^2/1000"), vec![e("x")], Offset::None))
            .build();
        assert!(matches!(flat, Err(RegError::Invalid { .. })));
        let jumpy = PiecewiseFn::builder("f", fin(0.0), fin(2.0))
            .piece(0.0, 1.0, e("x"))
            .piece(1.0, 2.0, e("x + 1"))
            .continuous(true)
            .build();
        assert!(matches!(jumpy, Err(RegError::Discontinuous { .. })));
    }

    #[test]
    fn concurrent_offset_extension() {
        use rayon::prelude::*;
        let f = PiecewiseFn::builder("f", fin(0.0), ExtReal::PosInf)
            .family(Family::new(0, e("n"), vec![e("x")], Offset::Recurrence { init: 0.0, steps: vec![e("1")] }))
            .horizon(10)
            .build()
            .unwrap();
        let vals: Vec<f64> = (0..2000).into_par_iter().map(|i| f.value(i as f64 * 37.0 + 0.5).unwrap()).collect();
        for (i, v) in vals.iter().enumerate() {
            let x = i as f64 * 37.0 + 0.5;
            assert_eq!(*v, x + x.floor());
        }
    }
}
