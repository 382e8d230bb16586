//! Tolerances shared across the engine.

use serde::{Deserialize, Serialize};

/// Relative/absolute tolerance pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    /// Agreement of consecutive extrapolants in the limit engine.
    pub const LIMIT: Tolerance = Tolerance { rtol: 1e-9, atol: 1e-12 };
    /// Agreement between the two sides of an algebraic rule (product,
    /// quotient, symmetric quotient), where two limits compound.
    pub const RULE: Tolerance = Tolerance { rtol: 1e-7, atol: 1e-9 };
    /// Agreement between a rule's conclusion and its direct oracle.
    pub const AGREE: Tolerance = Tolerance { rtol: 1e-6, atol: 1e-6 };

    pub fn new(rtol: f64, atol: f64) -> Tolerance {
        Tolerance { rtol, atol }
    }

    pub fn close(&self, a: f64, b: f64) -> bool {
        close(a, b, self.rtol, self.atol)
    }

    /// Absolute slack granted around `scale`.
    pub fn slack(&self, scale: f64) -> f64 {
        self.atol.max(self.rtol * scale.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::LIMIT
    }
}

pub fn close(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= atol.max(rtol * a.abs().max(b.abs()))
}

/// Ulps within which two values are treated as equal by rounding.
pub const RESOLUTION_ULPS: f64 = 8.0;

/// `a` and `b` agree to within a few ulps, so their order carries no
/// information.
pub fn unresolved(a: f64, b: f64) -> bool {
    (a - b).abs() <= RESOLUTION_ULPS * f64::EPSILON * a.abs().max(b.abs())
}
