//! Uniform one-dimensional grids.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !step.is_finite() {
            return Err(invalid(format!("grid step must be positive and finite, got {step}")));
        }
        if len < 2 {
            return Err(invalid("grid needs at least two points"));
        }
        Ok(Self { start, step, len })
    }

    /// `len` points spanning `[lo, hi]` inclusive.
    pub fn spanning(lo: f64, hi: f64, len: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(invalid(format!("empty interval [{lo}, {hi}]")));
        }
        if len < 2 {
            return Err(invalid("grid needs at least two points"));
        }
        Self::new(lo, (hi - lo) / (len - 1) as f64, len)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn end(&self) -> f64 {
        self.point(self.len - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    /// Trapezoid rule for samples taken on this grid.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len);
        let inner: f64 = values[1..values.len() - 1].iter().sum();
        self.step * (inner + 0.5 * (values[0] + values[values.len() - 1]))
    }

    /// Linear interpolation of grid samples, zero outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let t = (x - self.start) / self.step;
        if !(t >= 0.0) || t > (self.len - 1) as f64 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(self.len - 2);
        let frac = t - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spanning_hits_endpoints() {
        let g = UniformGrid::spanning(-2.0, 3.0, 11).unwrap();
        assert_eq!(g.point(0), -2.0);
        assert!((g.end() - 3.0).abs() < 1e-15);
        assert!(UniformGrid::spanning(1.0, 1.0, 5).is_err());
        assert!(UniformGrid::new(0.0, -1.0, 5).is_err());
    }

    #[test]
    fn interpolation_and_trapezoid() {
        let g = UniformGrid::spanning(0.0, 1.0, 3).unwrap();
        let v = [0.0, 1.0, 0.0];
        assert_eq!(g.interpolate(&v, 0.25), 0.5);
        assert_eq!(g.interpolate(&v, 1.0), 0.0);
        assert_eq!(g.interpolate(&v, -0.1), 0.0);
        assert_eq!(g.trapezoid(&v), 0.5);
    }
}
