use super::{merge_points, OneSidedPair, RegError, Regulated};
use crate::extreal::ExtReal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
        }
    }

    fn apply(self, a: f64, b: f64) -> Option<f64> {
        let v = match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div if b == 0.0 => return None,
            Op::Div => a / b,
        };
        v.is_finite().then_some(v)
    }

    fn apply_ext(self, a: ExtReal, b: ExtReal) -> Option<ExtReal> {
        match self {
            Op::Add => a.checked_add(b),
            Op::Sub => a.checked_sub(b),
            Op::Mul => a.checked_mul(b),
            Op::Div => a.checked_div(b),
        }
        .ok()
    }

    /// Derivative of `a op b` from values and derivatives of both operands.
    fn deriv(self, a: f64, da: f64, b: f64, db: f64) -> Option<f64> {
        let v = match self {
            Op::Add => da + db,
            Op::Sub => da - db,
            Op::Mul => da * b + a * db,
            Op::Div if b == 0.0 => return None,
            Op::Div => (da * b - a * db) / (b * b),
        };
        v.is_finite().then_some(v)
    }
}

/// Pointwise `f op g`; one-sided limits combine side by side.
pub struct Combined<'a> {
    pub op: Op,
    pub f: &'a dyn Regulated,
    pub g: &'a dyn Regulated,
    name: String,
}

impl<'a> Combined<'a> {
    pub fn new(op: Op, f: &'a dyn Regulated, g: &'a dyn Regulated) -> Combined<'a> {
        let name = format!("({} {} {})", f.name(), op.symbol(), g.name());
        Combined { op, f, g, name }
    }

    pub fn mul(f: &'a dyn Regulated, g: &'a dyn Regulated) -> Combined<'a> {
        Combined::new(Op::Mul, f, g)
    }

    pub fn div(f: &'a dyn Regulated, g: &'a dyn Regulated) -> Combined<'a> {
        Combined::new(Op::Div, f, g)
    }

    fn undefined(&self, x: f64) -> RegError {
        RegError::Invalid { name: self.name.clone(), reason: format!("undefined at x = {x}") }
    }
}

impl Regulated for Combined<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> (ExtReal, ExtReal) {
        let (fa, fb) = self.f.domain();
        let (ga, gb) = self.g.domain();
        (fa.max(ga), fb.min(gb))
    }

    fn horizon(&self) -> Option<f64> {
        match (self.f.horizon(), self.g.horizon()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn value(&self, x: f64) -> Result<f64, RegError> {
        let (a, b) = (self.f.value(x)?, self.g.value(x)?);
        self.op.apply(a, b).ok_or_else(|| self.undefined(x))
    }

    fn one_sided(&self, x: f64) -> Result<OneSidedPair, RegError> {
        let (p, q) = (self.f.one_sided(x)?, self.g.one_sided(x)?);
        let side = |a, b| self.op.apply_ext(a, b).ok_or_else(|| self.undefined(x));
        Ok(OneSidedPair { left: side(p.left, q.left)?, right: side(p.right, q.right)? })
    }

    fn breakpoints(&self, s: f64, t: f64) -> Result<Vec<f64>, RegError> {
        Ok(merge_points(self.f.breakpoints(s, t)?, self.g.breakpoints(s, t)?))
    }

    fn gap(&self, x: f64) -> Result<f64, RegError> {
        Ok(self.f.gap(x)?.min(self.g.gap(x)?))
    }

    fn one_sided_derivs(&self, x: f64) -> Option<(f64, f64)> {
        let (dfl, dfr) = self.f.one_sided_derivs(x)?;
        let (dgl, dgr) = self.g.one_sided_derivs(x)?;
        let (p, q) = (self.f.one_sided(x).ok()?, self.g.one_sided(x).ok()?);
        let l = self.op.deriv(p.left.finite()?, dfl, q.left.finite()?, dgl)?;
        let r = self.op.deriv(p.right.finite()?, dfr, q.right.finite()?, dgr)?;
        Some((l, r))
    }
}

/// `scale * f + shift`.
pub struct Affine<'a> {
    pub f: &'a dyn Regulated,
    pub scale: f64,
    pub shift: f64,
    name: String,
}

impl<'a> Affine<'a> {
    pub fn new(f: &'a dyn Regulated, scale: f64, shift: f64) -> Affine<'a> {
        let name = format!("({} * {} + {})", scale, f.name(), shift);
        Affine { f, scale, shift, name }
    }

    fn map(&self, v: ExtReal) -> Result<ExtReal, RegError> {
        v.checked_mul(ExtReal::Finite(self.scale))
            .and_then(|w| w.checked_add(ExtReal::Finite(self.shift)))
            .map_err(|e| RegError::Invalid { name: self.name.clone(), reason: e.to_string() })
    }
}

impl Regulated for Affine<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> (ExtReal, ExtReal) {
        self.f.domain()
    }

    fn horizon(&self) -> Option<f64> {
        self.f.horizon()
    }

    fn value(&self, x: f64) -> Result<f64, RegError> {
        Ok(self.scale * self.f.value(x)? + self.shift)
    }

    fn one_sided(&self, x: f64) -> Result<OneSidedPair, RegError> {
        let p = self.f.one_sided(x)?;
        Ok(OneSidedPair { left: self.map(p.left)?, right: self.map(p.right)? })
    }

    fn breakpoints(&self, s: f64, t: f64) -> Result<Vec<f64>, RegError> {
        self.f.breakpoints(s, t)
    }

    fn gap(&self, x: f64) -> Result<f64, RegError> {
        self.f.gap(x)
    }

    fn one_sided_derivs(&self, x: f64) -> Option<(f64, f64)> {
        let (l, r) = self.f.one_sided_derivs(x)?;
        Some((self.scale * l, self.scale * r))
    }
}
