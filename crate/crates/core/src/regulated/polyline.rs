use super::{OneSidedPair, RegError, Regulated};
use crate::extreal::ExtReal;

/// Continuous piecewise-linear function through finitely many nodes, on
/// `(x_0, b)`; points past the last node are beyond its horizon.
#[derive(Debug, Clone)]
pub struct PolylineFn {
    name: String,
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    b: ExtReal,
}

impl PolylineFn {
    pub fn from_nodes(name: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>, b: ExtReal) -> Result<PolylineFn, RegError> {
        let slopes = xs.windows(2).zip(ys.windows(2)).map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0])).collect();
        PolylineFn::checked(name.into(), xs, ys, slopes, b)
    }

    /// Nodes at `0, 1, 2, ...` starting from `y0`, each cell rising by the
    /// next increment. Slopes are the increments themselves, and node values
    /// are compensated prefix sums.
    pub fn unit_steps(name: impl Into<String>, y0: f64, increments: &[f64], b: ExtReal) -> Result<PolylineFn, RegError> {
        let mut ys = Vec::with_capacity(increments.len() + 1);
        let (mut sum, mut comp) = (y0, 0.0f64);
        ys.push(y0);
        for &d in increments {
            let t = sum + d;
            comp += if sum.abs() >= d.abs() { (sum - t) + d } else { (d - t) + sum };
            sum = t;
            ys.push(sum + comp);
        }
        let xs = (0..ys.len()).map(|i| i as f64).collect();
        PolylineFn::checked(name.into(), xs, ys, increments.to_vec(), b)
    }

    fn checked(name: String, xs: Vec<f64>, ys: Vec<f64>, slopes: Vec<f64>, b: ExtReal) -> Result<PolylineFn, RegError> {
        let bad = |reason: &str| RegError::Invalid { name: name.clone(), reason: reason.to_string() };
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(bad("a polyline needs at least two nodes and one value per node"));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad("polyline nodes must be strictly increasing"));
        }
        if ys.iter().chain(&slopes).any(|v| !v.is_finite()) {
            return Err(bad("polyline values must be finite"));
        }
        if ExtReal::Finite(xs[xs.len() - 1]) > b {
            return Err(bad("polyline nodes leave the domain"));
        }
        Ok(PolylineFn { name, xs, ys, slopes, b })
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    /// Index `j >= 1` with `x_{j-1} < x <= x_j`.
    fn cell(&self, x: f64) -> Result<usize, RegError> {
        if !self.contains(x) {
            return Err(RegError::OutOfDomain { name: self.name.clone(), x, a: ExtReal::Finite(self.xs[0]), b: self.b });
        }
        let j = self.xs.partition_point(|&q| q < x);
        if j >= self.xs.len() {
            return Err(RegError::HorizonExhausted { name: self.name.clone(), x });
        }
        Ok(j)
    }
}

impl Regulated for PolylineFn {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> (ExtReal, ExtReal) {
        (ExtReal::Finite(self.xs[0]), self.b)
    }

    fn horizon(&self) -> Option<f64> {
        self.xs.last().copied()
    }

    fn value(&self, x: f64) -> Result<f64, RegError> {
        let j = self.cell(x)?;
        if x == self.xs[j] {
            return Ok(self.ys[j]);
        }
        Ok(self.ys[j - 1] + self.slopes[j - 1] * (x - self.xs[j - 1]))
    }

    fn one_sided(&self, x: f64) -> Result<OneSidedPair, RegError> {
        Ok(OneSidedPair::both(self.value(x)?))
    }

    fn breakpoints(&self, s: f64, t: f64) -> Result<Vec<f64>, RegError> {
        let lo = self.xs.partition_point(|&q| q <= s);
        let hi = self.xs.partition_point(|&q| q < t);
        Ok(self.xs[lo..hi.max(lo)].to_vec())
    }

    fn gap(&self, x: f64) -> Result<f64, RegError> {
        let j = self.cell(x)?;
        let right = if x < self.xs[j] {
            self.xs[j]
        } else {
            self.xs.get(j + 1).copied().ok_or(RegError::HorizonExhausted { name: self.name.clone(), x })?
        };
        Ok((x - self.xs[j - 1]).min(right - x))
    }

    fn one_sided_derivs(&self, x: f64) -> Option<(f64, f64)> {
        let j = self.cell(x).ok()?;
        let l = self.slopes[j - 1];
        let r = if x < self.xs[j] { l } else { *self.slopes.get(j)? };
        Some((l, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_steps_interpolate() {
        let p = PolylineFn::unit_steps("F", 1.0, &[2.0, 3.0, 4.0], ExtReal::PosInf).unwrap();
        assert_eq!(p.value(1.0).unwrap(), 3.0);
        assert_eq!(p.value(1.5).unwrap(), 4.5);
        assert_eq!(p.one_sided_derivs(1.0), Some((2.0, 3.0)));
        assert_eq!(p.one_sided_derivs(2.5), Some((4.0, 4.0)));
        assert_eq!(p.breakpoints(0.5, 2.5).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(p.value(3.5), Err(RegError::HorizonExhausted { .. })));
        assert_eq!(p.horizon(), Some(3.0));
    }
}
