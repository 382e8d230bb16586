//! Closed-form expressions over one real variable `x` and an optional
//! integer family index `n`.
//!
//! Expressions are immutable trees. The grammar is closed: every node is one
//! of the variants of [`Expr`], and function calls are limited to [`Func`].

mod diff;
mod eval;
mod parse;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::parse;

/// Unary primitives callable as `name(expr)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Abs,
    Sqrt,
    Cbrt,
    Exp,
    Ln,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Abs,
        Func::Sqrt,
        Func::Cbrt,
        Func::Exp,
        Func::Ln,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Cbrt => "cbrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Expression tree.
///
/// `Num` always holds a finite, non-negative literal; negative constants are
/// `Neg(Num(..))`. This keeps printing and re-parsing structurally exact.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    E,
    X,
    N,
    Neg(Arc<Expr>),
    Call(Func, Arc<Expr>),
    Bin(BinOp, Arc<Expr>, Arc<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: expected one of {}", .expected.join(", "))]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdent { name: String, offset: usize },
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
    #[error("family index `n` is unbound")]
    UnboundIndex,
    #[error("variable `x` is unbound")]
    UnboundVariable,
    #[error("`{node}` is not differentiable as a formal expression")]
    NotDifferentiable { node: String },
}

impl Expr {
    /// Numeric literal; negative values become `Neg(Num(|v|))`.
    pub fn num(v: f64) -> Expr {
        if v < 0.0 {
            Expr::Neg(Arc::new(Expr::Num(-v)))
        } else {
            // folds -0.0 into 0.0
            Expr::Num(v + 0.0)
        }
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Arc::new(e))
    }

    pub fn call(f: Func, e: Expr) -> Expr {
        Expr::Call(f, Arc::new(e))
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Arc::new(l), Arc::new(r))
    }

    pub fn add(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Add, l, r)
    }

    pub fn sub(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Sub, l, r)
    }

    pub fn mul(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Mul, l, r)
    }

    pub fn div(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Div, l, r)
    }

    pub fn pow(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Pow, l, r)
    }

    pub fn uses_x(&self) -> bool {
        self.any(&|e| matches!(e, Expr::X))
    }

    pub fn uses_n(&self) -> bool {
        self.any(&|e| matches!(e, Expr::N))
    }

    fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Expr::Neg(a) | Expr::Call(_, a) => a.any(pred),
            Expr::Bin(_, l, r) => l.any(pred) || r.any(pred),
            _ => false,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Bin(_, l, r) => 1 + l.node_count() + r.node_count(),
            _ => 1,
        }
    }

    /// Replaces every occurrence of `n` by `with`.
    pub fn subst_n(&self, with: &Expr) -> Expr {
        self.subst(&|e| matches!(e, Expr::N), with)
    }

    /// Replaces every occurrence of `x` by `with`.
    pub fn subst_x(&self, with: &Expr) -> Expr {
        self.subst(&|e| matches!(e, Expr::X), with)
    }

    fn subst(&self, hit: &dyn Fn(&Expr) -> bool, with: &Expr) -> Expr {
        if hit(self) {
            return with.clone();
        }
        match self {
            Expr::Neg(a) => Expr::neg(a.subst(hit, with)),
            Expr::Call(f, a) => Expr::call(*f, a.subst(hit, with)),
            Expr::Bin(op, l, r) => Expr::bin(*op, l.subst(hit, with), r.subst(hit, with)),
            leaf => leaf.clone(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            _ => 5,
        }
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::num(v)
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

// Printing inserts only the parentheses the grammar needs, so the output
// re-parses to the identical tree: same-precedence right operands of the
// left-associative operators keep their parentheses, as do compound bases
// of `^`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => f.write_str("pi"),
            Expr::E => f.write_str("e"),
            Expr::X => f.write_str("x"),
            Expr::N => f.write_str("n"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.precedence() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                if *op == BinOp::Pow {
                    write_child(f, l, l.precedence() <= p)?;
                    f.write_str("^")?;
                    write_child(f, r, r.precedence() < 3)
                } else {
                    write_child(f, l, l.precedence() < p)?;
                    write!(f, " {} ", op.symbol())?;
                    write_child(f, r, r.precedence() <= p && r.precedence() != 3)
                }
            }
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}
