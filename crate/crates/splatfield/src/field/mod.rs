//! Analytic target fields, grid sampling, smoothing, and error metrics.

mod analytic;
mod grid;
mod metrics;
mod quadrature;

pub use analytic::{
    fourier_with_modes, make_fourier_random, make_fourier_random_channels, make_lamb_oseen,
    make_taylor_green, AnalyticField, FieldKind, FourierMode,
};
pub use grid::{sample_grid, smooth_grid, GridField};
pub use metrics::{l2_norm, rel_l2_error, roughness};
pub use quadrature::QuadratureRule;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Axis-aligned box domain in 2 or 3 dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = lower.len();
        if d != upper.len() {
            return Err(Error::Dimension(format!(
                "corner dimensions differ: {} vs {}",
                d,
                upper.len()
            )));
        }
        if !(2..=3).contains(&d) {
            return Err(Error::Dimension(format!("dimension must be 2 or 3, got {d}")));
        }
        for a in 0..d {
            if !(lower[a] < upper[a]) {
                return Err(Error::Parameter(format!(
                    "lower[{a}] = {} must be strictly below upper[{a}] = {}",
                    lower[a], upper[a]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit box [0,1]^d.
    pub fn unit(d: usize) -> Self {
        Self::new(vec![0.0; d], vec![1.0; d]).expect("unit box is valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.extent(a)).product()
    }

    pub fn centroid(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|a| 0.5 * (self.lower[a] + self.upper[a]))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|a| x[a] >= self.lower[a] && x[a] <= self.upper[a])
    }
}

/// Anything that can be evaluated pointwise on a domain.
///
/// Implementations are immutable and safe to evaluate concurrently.
pub trait Field: Sync {
    fn dim(&self) -> usize;
    fn channels(&self) -> usize;

    /// Evaluate at `x`, writing `channels()` values into `out`.
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.channels()];
        self.eval_into(x, &mut out);
        out
    }
}

/// A constant field, mostly useful as a degenerate test target.
#[derive(Clone, Debug)]
pub struct ConstantField {
    dim: usize,
    values: Vec<f64>,
}

impl ConstantField {
    pub fn new(dim: usize, values: Vec<f64>) -> Self {
        Self { dim, values }
    }
}

impl Field for ConstantField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn channels(&self) -> usize {
        self.values.len()
    }

    fn eval_into(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.values);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_validation() {
        assert!(Domain::new(vec![0.0], vec![1.0]).is_err());
        assert!(Domain::new(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(Domain::new(vec![0.0, 0.0, 0.0, 0.0], vec![1.0; 4]).is_err());
        let d = Domain::unit(3);
        assert_eq!(d.volume(), 1.0);
        assert_eq!(d.centroid(), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn domain_extent_and_containment() {
        let d = Domain::new(vec![-1.0, 0.0], vec![3.0, 2.0]).unwrap();
        assert_eq!(d.extent(0), 4.0);
        assert_eq!(d.volume(), 8.0);
        assert!(d.contains(&[0.0, 1.0]));
        assert!(!d.contains(&[3.5, 1.0]));
    }
}
