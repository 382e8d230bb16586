use super::{BinOp, Expr, ExprError, Func};

impl Expr {
    /// Symbolic derivative with respect to `x`; `n` is held constant.
    ///
    /// Only constant folding and the 0/1 identities are applied to the
    /// result. `abs` of an `x`-dependent argument is rejected.
    pub fn diff(&self) -> Result<Expr, ExprError> {
        if !self.uses_x() {
            return Ok(Expr::Num(0.0));
        }
        Ok(match self {
            Expr::X => Expr::Num(1.0),
            Expr::Num(_) | Expr::Pi | Expr::E | Expr::N => Expr::Num(0.0),
            Expr::Neg(a) => neg(a.diff()?),
            Expr::Call(f, u) => {
                let du = u.diff()?;
                let u = (**u).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, u),
                    Func::Cos => neg(Expr::call(Func::Sin, u)),
                    Func::Exp => Expr::call(Func::Exp, u),
                    Func::Ln => return Ok(div(du, u)),
                    Func::Sqrt => {
                        return Ok(div(du, mul(Expr::Num(2.0), Expr::call(Func::Sqrt, u))))
                    }
                    Func::Cbrt => {
                        let c = Expr::call(Func::Cbrt, u);
                        return Ok(div(du, mul(Expr::Num(3.0), pow(c, Expr::Num(2.0)))));
                    }
                    Func::Abs => {
                        return Err(ExprError::NotDifferentiable { node: self.to_string() })
                    }
                };
                mul(outer, du)
            }
            Expr::Bin(op, u, v) => {
                let du = u.diff()?;
                let dv = v.diff()?;
                let (u, v) = ((**u).clone(), (**v).clone());
                match op {
                    BinOp::Add => add(du, dv),
                    BinOp::Sub => sub(du, dv),
                    BinOp::Mul => add(mul(du, v.clone()), mul(u, dv)),
                    BinOp::Div => div(
                        sub(mul(du, v.clone()), mul(u, dv)),
                        pow(v, Expr::Num(2.0)),
                    ),
                    BinOp::Pow if !v.uses_x() => {
                        let lowered = sub(v.clone(), Expr::Num(1.0));
                        mul(mul(v, pow(u, lowered)), du)
                    }
                    BinOp::Pow if !u.uses_x() => {
                        mul(mul(self.clone(), Expr::call(Func::Ln, u)), dv)
                    }
                    BinOp::Pow => {
                        let ln_u = Expr::call(Func::Ln, u.clone());
                        let inner = add(mul(dv, ln_u), div(mul(v, du), u));
                        mul(self.clone(), inner)
                    }
                }
            }
        })
    }

    pub(crate) fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => match **a {
                Expr::Num(v) => Some(-v),
                _ => None,
            },
            _ => None,
        }
    }
}

fn fold(v: f64) -> Option<Expr> {
    v.is_finite().then(|| Expr::num(v))
}

fn neg(a: Expr) -> Expr {
    match (&a, a.as_const()) {
        (_, Some(c)) => Expr::num(-c),
        (Expr::Neg(inner), _) => (**inner).clone(),
        _ => Expr::neg(a),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => fold(x + y).unwrap_or_else(|| Expr::add(a, b)),
        (Some(z), _) if z == 0.0 => b,
        (_, Some(z)) if z == 0.0 => a,
        _ => Expr::add(a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => fold(x - y).unwrap_or_else(|| Expr::sub(a, b)),
        (_, Some(z)) if z == 0.0 => a,
        (Some(z), _) if z == 0.0 => neg(b),
        _ => Expr::sub(a, b),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => fold(x * y).unwrap_or_else(|| Expr::mul(a, b)),
        (Some(z), _) | (_, Some(z)) if z == 0.0 => Expr::Num(0.0),
        (Some(o), _) if o == 1.0 => b,
        (_, Some(o)) if o == 1.0 => a,
        _ => Expr::mul(a, b),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => fold(x / y).unwrap_or_else(|| Expr::div(a, b)),
        (Some(z), _) if z == 0.0 => Expr::Num(0.0),
        (_, Some(o)) if o == 1.0 => a,
        _ => Expr::div(a, b),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match b.as_const() {
        Some(z) if z == 0.0 => Expr::Num(1.0),
        Some(o) if o == 1.0 => a,
        _ => Expr::pow(a, b),
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, ExprError};

    fn d_at(s: &str, x: f64, n: Option<i64>) -> f64 {
        parse(s).unwrap().diff().unwrap().eval(x, n).unwrap()
    }

    #[test]
    fn power_rule() {
        let d = parse("x^2").unwrap().diff().unwrap();
        assert_eq!(d.to_string(), "2 * x");
        assert_eq!(d_at("x^4", 3.0, None), 108.0);
    }

    #[test]
    fn chain_rule() {
        // -cos(1/x)/x^2
        for x in [0.3, 1.0, 2.7, -0.8] {
            let expect = -(1.0 / x as f64).cos() / (x * x);
            assert!((d_at("sin(1/x)", x, None) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn family_index_is_constant() {
        // d/dx x^4 at x = n gives 4 n^3
        for n in 1..20 {
            let nf = n as f64;
            assert_eq!(d_at("x^4 + n^5", nf, Some(n)), 4.0 * nf.powi(3));
        }
    }

    #[test]
    fn cube_root_of_negative_argument() {
        // d/dx cbrt(x - 3) = 1 / (3 cbrt(x-3)^2), finite for x < 3
        let v = d_at("cbrt(x-3)", 2.0, None);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn variable_exponents() {
        let x: f64 = 1.7;
        assert!((d_at("2^x", x, None) - 2f64.powf(x) * 2f64.ln()).abs() < 1e-12);
        let expect = x.powf(x) * (x.ln() + 1.0);
        assert!((d_at("x^x", x, None) - expect).abs() < 1e-12);
    }

    #[test]
    fn abs_is_rejected() {
        assert!(matches!(
            parse("1 + abs(x - 1)").unwrap().diff(),
            Err(ExprError::NotDifferentiable { node }) if node == "abs(x - 1)"
        ));
        assert_eq!(parse("abs(n) * x").unwrap().diff().unwrap().eval(0.0, Some(-2)).unwrap(), 2.0);
    }
}
