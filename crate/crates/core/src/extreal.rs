//! Extended reals `[-inf, +inf]` with guarded arithmetic.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtRealError {
    #[error("NaN is not an extended real")]
    NaN,
    #[error("indeterminate form {0}")]
    Indeterminate(&'static str),
    #[error("division by zero")]
    DivByZero,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps IEEE infinities onto the extended endpoints; NaN is rejected.
    pub fn new(v: f64) -> Result<ExtReal, ExtRealError> {
        if v.is_nan() {
            Err(ExtRealError::NaN)
        } else if v == f64::INFINITY {
            Ok(ExtReal::PosInf)
        } else if v == f64::NEG_INFINITY {
            Ok(ExtReal::NegInf)
        } else {
            Ok(ExtReal::Finite(v))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// IEEE view: infinities map to `f64::INFINITY` and friends.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// -1, 0 or 1.
    pub fn signum(self) -> i8 {
        match self {
            ExtReal::NegInf => -1,
            ExtReal::PosInf => 1,
            ExtReal::Finite(v) if v > 0.0 => 1,
            ExtReal::Finite(v) if v < 0.0 => -1,
            ExtReal::Finite(_) => 0,
        }
    }

    pub fn checked_add(self, rhs: ExtReal) -> Result<ExtReal, ExtRealError> {
        use ExtReal::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => ExtReal::new(a + b),
            (PosInf, NegInf) | (NegInf, PosInf) => Err(ExtRealError::Indeterminate("inf - inf")),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn checked_sub(self, rhs: ExtReal) -> Result<ExtReal, ExtRealError> {
        self.checked_add(-rhs)
    }

    pub fn checked_mul(self, rhs: ExtReal) -> Result<ExtReal, ExtRealError> {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::new(a * b),
            _ => match self.signum() * rhs.signum() {
                0 => Err(ExtRealError::Indeterminate("0 * inf")),
                1 => Ok(ExtReal::PosInf),
                _ => Ok(ExtReal::NegInf),
            },
        }
    }

    pub fn checked_div(self, rhs: ExtReal) -> Result<ExtReal, ExtRealError> {
        match (self, rhs) {
            (_, ExtReal::Finite(b)) if b == 0.0 => Err(ExtRealError::DivByZero),
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::new(a / b),
            (ExtReal::Finite(_), _) => Ok(ExtReal::ZERO),
            (_, ExtReal::Finite(b)) => {
                if (self.signum() > 0) == (b > 0.0) {
                    Ok(ExtReal::PosInf)
                } else {
                    Ok(ExtReal::NegInf)
                }
            }
            _ => Err(ExtRealError::Indeterminate("inf / inf")),
        }
    }

    /// Closeness under `|a-b| <= max(atol, rtol * max(|a|, |b|))`; infinities
    /// are only close to themselves.
    pub fn close_to(self, other: ExtReal, rtol: f64, atol: f64) -> bool {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => crate::tol::close(a, b, rtol, atol),
            (a, b) => a == b,
        }
    }
}

impl std::ops::Neg for ExtReal {
    type Output = ExtReal;

    fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
            ExtReal::PosInf => ExtReal::NegInf,
        }
    }
}

impl From<f64> for ExtReal {
    /// Panics on NaN; use [`ExtReal::new`] for untrusted input.
    fn from(v: f64) -> Self {
        ExtReal::new(v).expect("NaN is not an extended real")
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_f64().total_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::PosInf => f.write_str("+inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl std::str::FromStr for ExtReal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "+inf" => Ok(ExtReal::PosInf),
            "-inf" => Ok(ExtReal::NegInf),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(ExtReal::Finite)
                .ok_or_else(|| format!("`{t}` is not a number or +inf/-inf")),
        }
    }
}

// JSON has no infinities: finite values are numbers, the endpoints strings.
impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInf => s.serialize_str("+inf"),
            ExtReal::NegInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => ExtReal::new(v).map_err(serde::de::Error::custom),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
