//! Midpoint tensor-product quadrature on box domains.

use super::Domain;
use crate::error::{Error, Result};
use crate::points::PointSet;

/// Tensor-grid midpoint rule with uniform weights summing to the box volume.
///
/// Nodes coincide with the cell centers of a [`super::GridField`] at the same
/// resolution, so grid-based and quadrature-based error paths agree exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    domain: Domain,
    res: Vec<usize>,
    weight: f64,
}

impl QuadratureRule {
    /// Same node count on every axis.
    pub fn midpoint(domain: Domain, nodes_per_axis: usize) -> Result<Self> {
        let res = vec![nodes_per_axis; domain.dim()];
        Self::midpoint_anisotropic(domain, res)
    }

    pub fn midpoint_anisotropic(domain: Domain, res: Vec<usize>) -> Result<Self> {
        if res.len() != domain.dim() {
            return Err(Error::Dimension(format!(
                "resolution has {} axes for a {}-dimensional domain",
                res.len(),
                domain.dim()
            )));
        }
        if res.iter().any(|&n| n == 0) {
            return Err(Error::Parameter("node count must be positive on every axis".into()));
        }
        let count: usize = res.iter().product();
        let weight = domain.volume() / count as f64;
        Ok(Self { domain, res, weight })
    }

    /// Default rule: 128 nodes/axis in d = 2, 48 nodes/axis in d = 3.
    pub fn default_for(domain: Domain) -> Self {
        let n = if domain.dim() == 2 { 128 } else { 48 };
        Self::midpoint(domain, n).expect("default rule is valid")
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Uniform node weight |Omega| / len.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Node `i` with axis 0 varying fastest.
    pub fn node_into(&self, i: usize, out: &mut [f64]) {
        let mut rem = i;
        for a in 0..self.res.len() {
            let idx = rem % self.res[a];
            rem /= self.res[a];
            out[a] = self.domain.lower()[a]
                + (idx as f64 + 0.5) * self.domain.extent(a) / self.res[a] as f64;
        }
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.res.len()];
        self.node_into(i, &mut out);
        out
    }

    /// All nodes materialized as a point set.
    pub fn nodes(&self) -> PointSet {
        let d = self.res.len();
        let mut coords = vec![0.0; self.len() * d];
        for i in 0..self.len() {
            self.node_into(i, &mut coords[i * d..(i + 1) * d]);
        }
        PointSet::new(d, coords)
    }
}
