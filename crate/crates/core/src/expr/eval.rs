use super::{BinOp, Expr, ExprError, Func};

impl Expr {
    /// Evaluates at `x` with the family index bound to `n` (if given).
    pub fn eval(&self, x: f64, n: Option<i64>) -> Result<f64, ExprError> {
        self.eval_with(Some(x), n.map(|n| n as f64))
    }

    /// Evaluates an expression in `n` alone; any use of `x` is an error.
    pub fn eval_n(&self, n: i64) -> Result<f64, ExprError> {
        self.eval_with(None, Some(n as f64))
    }

    /// Evaluates an expression with no free symbols.
    pub fn eval_const(&self) -> Result<f64, ExprError> {
        self.eval_with(None, None)
    }

    fn eval_with(&self, x: Option<f64>, n: Option<f64>) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::E => std::f64::consts::E,
            Expr::X => x.ok_or(ExprError::UnboundVariable)?,
            Expr::N => n.ok_or(ExprError::UnboundIndex)?,
            Expr::Neg(a) => -a.eval_with(x, n)?,
            Expr::Call(f, a) => {
                let v = a.eval_with(x, n)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Abs => v.abs(),
                    Func::Sqrt if v < 0.0 => return Err(self.domain("square root of a negative number")),
                    Func::Sqrt => v.sqrt(),
                    Func::Cbrt => v.cbrt(),
                    Func::Exp => v.exp(),
                    Func::Ln if v <= 0.0 => return Err(self.domain("logarithm of a non-positive number")),
                    Func::Ln => v.ln(),
                }
            }
            Expr::Bin(op, l, r) => {
                let a = l.eval_with(x, n)?;
                let b = r.eval_with(x, n)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div if b == 0.0 => return Err(self.domain("division by zero")),
                    BinOp::Div => a / b,
                    BinOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(self.domain("negative base with non-integer exponent"));
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(self.domain("division by zero"));
                        }
                        a.powf(b)
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain("non-finite result"))
        }
    }

    fn domain(&self, reason: &'static str) -> ExprError {
        ExprError::Domain { node: self.to_string(), reason }
    }
}
