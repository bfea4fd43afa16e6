//! Anisotropic Gaussian primitives and the Shepard-normalized scaffold.

use crate::centers::CenterSet;
use crate::error::{Error, Result};
use crate::field::{Domain, Field, GridField, QuadratureRule};
use crate::points::PointSet;
use crate::NeumaierSum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::sync::OnceLock;

/// Configured bounds for per-axis scales.
#[derive(Clone, Copy, Debug)]
pub struct ScaleBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for ScaleBounds {
    fn default() -> Self {
        Self { min: 1e-6, max: 1e3 }
    }
}

/// Shepard denominator floor, overridable through the
/// `SPLATFIELD_FAULT_DENOM_FLOOR` fault-injection hook used by the self test.
fn denom_floor() -> f64 {
    static FLOOR: OnceLock<f64> = OnceLock::new();
    *FLOOR.get_or_init(|| {
        std::env::var("SPLATFIELD_FAULT_DENOM_FLOOR")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(1e-30)
    })
}

/// Hard underflow threshold below which a query has no usable support.
const UNDERFLOW: f64 = 1e-250;

/// The un-amplituded Gaussian family: centers, per-axis scales, rotations.
///
/// The basis function is phi_k(x) = exp(-(1/2) (x-mu)^T S^-1 (x-mu)) with
/// S^-1 = R_theta^T diag(sigma^-2) R_theta; rotation applies in 2D only and
/// is fixed to the identity in 3D.
#[derive(Clone, Debug)]
pub struct GaussianBasis {
    domain: Domain,
    centers: PointSet,
    scales: Vec<f64>,
    thetas: Vec<f64>,
    // cached per primitive: cos(theta), sin(theta), 1/sigma^2 per axis
    rot: Vec<(f64, f64)>,
    inv_var: Vec<f64>,
}

impl GaussianBasis {
    pub fn new(
        domain: Domain,
        centers: PointSet,
        scales: Vec<f64>,
        thetas: Vec<f64>,
        bounds: ScaleBounds,
    ) -> Result<Self> {
        let d = domain.dim();
        let k = centers.len();
        if centers.dim() != d {
            return Err(Error::Dimension("center dimension does not match domain".into()));
        }
        if k == 0 {
            return Err(Error::Size("basis must contain at least one primitive".into()));
        }
        if scales.len() != k * d || thetas.len() != k {
            return Err(Error::Size("scale or rotation buffer length mismatch".into()));
        }
        for &s in &scales {
            if !(s >= bounds.min && s <= bounds.max) {
                return Err(Error::Parameter(format!(
                    "scale {s} outside configured bounds [{}, {}]",
                    bounds.min, bounds.max
                )));
            }
        }
        if d == 3 && thetas.iter().any(|&t| t != 0.0) {
            return Err(Error::Parameter("rotation must be identity in 3D".into()));
        }
        let rot = thetas.iter().map(|&t| (t.cos(), t.sin())).collect();
        let inv_var = scales.iter().map(|&s| 1.0 / (s * s)).collect();
        Ok(Self { domain, centers, scales, thetas, rot, inv_var })
    }

    pub fn isotropic(domain: Domain, centers: PointSet, sigma: f64) -> Result<Self> {
        let d = domain.dim();
        let k = centers.len();
        Self::new(domain, centers, vec![sigma; k * d], vec![0.0; k], ScaleBounds::default())
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn centers(&self) -> &PointSet {
        &self.centers
    }

    pub fn scales(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.scales[k * d..(k + 1) * d]
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.thetas[k]
    }

    /// phi_k(x) in (0, 1], with phi_k(mu_k) = 1.
    #[inline]
    pub fn phi(&self, k: usize, x: &[f64]) -> f64 {
        let mu = self.centers.point(k);
        let d = mu.len();
        let q = if d == 2 {
            let dx = x[0] - mu[0];
            let dy = x[1] - mu[1];
            let (c, s) = self.rot[k];
            let y0 = c * dx - s * dy;
            let y1 = s * dx + c * dy;
            y0 * y0 * self.inv_var[2 * k] + y1 * y1 * self.inv_var[2 * k + 1]
        } else {
            let mut q = 0.0;
            for a in 0..d {
                let dx = x[a] - mu[a];
                q += dx * dx * self.inv_var[d * k + a];
            }
            q
        };
        (-0.5 * q).exp()
    }

    /// All K basis values at `x`.
    pub fn eval_all(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|k| self.phi(k, x)).collect()
    }
}

/// Scaffold evaluation at one query point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaffoldEval {
    /// Normalized mixture value per channel.
    pub value: Vec<f64>,
    /// Basis mass m(x) = sum_k w_k phi_k(x), before flooring.
    pub mass: f64,
}

/// Metadata carried by oracle scaffolds for serialization round-trips.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveMeta {
    pub c_sigma: Option<f64>,
    pub h: Option<f64>,
}

/// The full Gaussian state: basis, weights in (0,1), vector amplitudes.
#[derive(Clone, Debug)]
pub struct PrimitiveSet {
    basis: GaussianBasis,
    weights: Vec<f64>,
    amplitudes: Vec<f64>,
    channels: usize,
    pub meta: PrimitiveMeta,
}

impl PrimitiveSet {
    pub fn new(
        basis: GaussianBasis,
        weights: Vec<f64>,
        amplitudes: Vec<f64>,
        channels: usize,
    ) -> Result<Self> {
        let k = basis.len();
        if weights.len() != k {
            return Err(Error::Size("weight buffer length mismatch".into()));
        }
        if channels == 0 || amplitudes.len() != k * channels {
            return Err(Error::Size("amplitude buffer length mismatch".into()));
        }
        for &w in &weights {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::Parameter(format!("weight {w} outside (0, 1)")));
            }
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::Parameter("amplitudes must be finite".into()));
        }
        Ok(Self { basis, weights, amplitudes, channels, meta: PrimitiveMeta::default() })
    }

    pub fn basis(&self) -> &GaussianBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn amplitude(&self, k: usize) -> &[f64] {
        &self.amplitudes[k * self.channels..(k + 1) * self.channels]
    }

    /// Raw basis values phi_k(x).
    pub fn basis_eval(&self, x: &[f64]) -> Vec<f64> {
        self.basis.eval_all(x)
    }

    /// Shepard weights psi_k(x) = w_k phi_k(x) / sum_j w_j phi_j(x).
    ///
    /// The denominator is floored at 1e-30; if the raw mass underflows below
    /// 1e-250 the query has no usable support and an error is returned.
    pub fn shepard_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (mass, wphi) = self.mass_and_terms(x);
        if mass < UNDERFLOW {
            return Err(Error::DegenerateSupport { point: x.to_vec() });
        }
        let denom = mass + denom_floor();
        Ok(wphi.iter().map(|&v| v / denom).collect())
    }

    fn mass_and_terms(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut mass = NeumaierSum::new();
        let wphi: Vec<f64> = (0..self.len())
            .map(|k| {
                let v = self.weights[k] * self.basis.phi(k, x);
                mass.add(v);
                v
            })
            .collect();
        (mass.value(), wphi)
    }

    fn eval_one(&self, x: &[f64]) -> Result<ScaffoldEval> {
        let (mass, wphi) = self.mass_and_terms(x);
        if mass < UNDERFLOW {
            return Err(Error::DegenerateSupport { point: x.to_vec() });
        }
        let denom = mass + denom_floor();
        let mut value = vec![NeumaierSum::new(); self.channels];
        for (k, &v) in wphi.iter().enumerate() {
            let psi = v / denom;
            let a = self.amplitude(k);
            for c in 0..self.channels {
                value[c].add(psi * a[c]);
            }
        }
        Ok(ScaffoldEval { value: value.into_iter().map(|s| s.value()).collect(), mass })
    }

    /// Evaluate the scaffold at every query point; order-independent and
    /// parallel over queries.
    pub fn eval_scaffold(&self, queries: &PointSet) -> Result<Vec<ScaffoldEval>> {
        (0..queries.len())
            .into_par_iter()
            .map(|i| self.eval_one(queries.point(i)))
            .collect()
    }

    /// Localization diagnostic sum_k psi_k(x) ||x - mu_k||^m.
    pub fn moment_sum(&self, x: &[f64], m: u32) -> Result<f64> {
        let psi = self.shepard_weights(x)?;
        let mut acc = NeumaierSum::new();
        for (k, &p) in psi.iter().enumerate() {
            let r = crate::points::dist(x, self.basis.centers().point(k));
            acc.add(p * r.powi(m as i32));
        }
        Ok(acc.value())
    }

    /// Smallest raw basis mass over the rule's nodes.
    pub fn min_mass_on(&self, q: &QuadratureRule) -> f64 {
        let d = self.dim();
        (0..q.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; 3];
                q.node_into(i, &mut x[..d]);
                self.mass_and_terms(&x[..d]).0
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        let d = self.dim();
        let k = self.len();
        let repr = PrimitiveSetRepr {
            domain: DomainRepr {
                lower: self.basis.domain().lower().to_vec(),
                upper: self.basis.domain().upper().to_vec(),
            },
            mu: (0..k).map(|i| self.basis.centers().point(i).to_vec()).collect(),
            sigma: (0..k).map(|i| self.basis.scales(i).to_vec()).collect(),
            theta: self.basis.thetas.clone(),
            w: self.weights.clone(),
            a: (0..k).map(|i| self.amplitude(i).to_vec()).collect(),
            metadata: MetaRepr {
                dim: d,
                channels: self.channels,
                c_sigma: self.meta.c_sigma,
                h_k: self.meta.h,
            },
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: PrimitiveSetRepr = serde_json::from_str(text)?;
        let domain = Domain::new(repr.domain.lower, repr.domain.upper)?;
        let d = domain.dim();
        let mut centers = PointSet::empty(d);
        let mut scales = Vec::new();
        for (mu, sig) in repr.mu.iter().zip(&repr.sigma) {
            centers.push(mu);
            scales.extend_from_slice(sig);
        }
        let basis = GaussianBasis::new(domain, centers, scales, repr.theta, ScaleBounds::default())?;
        let amplitudes: Vec<f64> = repr.a.iter().flatten().copied().collect();
        let mut ps = Self::new(basis, repr.w, amplitudes, repr.metadata.channels)?;
        ps.meta = PrimitiveMeta { c_sigma: repr.metadata.c_sigma, h: repr.metadata.h_k };
        Ok(ps)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn read_json<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct DomainRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MetaRepr {
    dim: usize,
    channels: usize,
    c_sigma: Option<f64>,
    h_k: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct PrimitiveSetRepr {
    domain: DomainRepr,
    mu: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    theta: Vec<f64>,
    w: Vec<f64>,
    a: Vec<Vec<f64>>,
    metadata: MetaRepr,
}

/// View of a primitive set as an evaluable field.
///
/// Panics on degenerate support; oracle constructors verify positive basis
/// mass on the default quadrature, which covers the nodes used by the error
/// metrics.
pub struct ScaffoldField<'a>(pub &'a PrimitiveSet);

impl Field for ScaffoldField<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn channels(&self) -> usize {
        self.0.channels()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let ev = self.0.eval_one(x).expect("degenerate scaffold support");
        out.copy_from_slice(&ev.value);
    }
}

/// Oracle scaffold: isotropic scales c_sigma * h, uniform weight, amplitudes
/// read from the field at the centers.
///
/// Verifies that the basis mass is positive at every node of the domain's
/// default quadrature rule.
pub fn oracle_scaffold(
    field: &dyn Field,
    cs: &CenterSet,
    c_sigma: f64,
    weight: f64,
) -> Result<PrimitiveSet> {
    let amplitudes = amplitudes_from(field, cs);
    oracle_from_amplitudes(cs, c_sigma, weight, amplitudes, field.channels())
}

/// Oracle scaffold whose amplitudes are copied verbatim from grid cells.
///
/// `cells[i]` is the flat cell index of center `i` in `grid`; this avoids
/// interpolation when the centers are themselves grid cell centers.
pub fn oracle_scaffold_from_grid(
    grid: &GridField,
    cs: &CenterSet,
    cells: &[usize],
    c_sigma: f64,
    weight: f64,
) -> Result<PrimitiveSet> {
    if cells.len() != cs.len() {
        return Err(Error::Size("one grid cell per center required".into()));
    }
    let channels = grid.channels();
    let mut amplitudes = Vec::with_capacity(cs.len() * channels);
    for &cell in cells {
        amplitudes.extend_from_slice(grid.cell_values(cell));
    }
    oracle_from_amplitudes(cs, c_sigma, weight, amplitudes, channels)
}

fn amplitudes_from(field: &dyn Field, cs: &CenterSet) -> Vec<f64> {
    let channels = field.channels();
    let mut amplitudes = vec![0.0; cs.len() * channels];
    for (i, chunk) in amplitudes.chunks_mut(channels).enumerate() {
        field.eval_into(cs.points().point(i), chunk);
    }
    amplitudes
}

fn oracle_from_amplitudes(
    cs: &CenterSet,
    c_sigma: f64,
    weight: f64,
    amplitudes: Vec<f64>,
    channels: usize,
) -> Result<PrimitiveSet> {
    if !(c_sigma > 0.0) {
        return Err(Error::Parameter(format!("scale factor must be positive, got {c_sigma}")));
    }
    let sigma = c_sigma * cs.fill();
    let basis = GaussianBasis::isotropic(cs.domain().clone(), cs.points().clone(), sigma)?;
    let k = cs.len();
    let mut ps = PrimitiveSet::new(basis, vec![weight; k], amplitudes, channels)?;
    ps.meta = PrimitiveMeta { c_sigma: Some(c_sigma), h: Some(cs.fill()) };
    let check = QuadratureRule::default_for(cs.domain().clone());
    if ps.min_mass_on(&check) < UNDERFLOW {
        return Err(Error::DegenerateSupport { point: vec![] });
    }
    Ok(ps)
}
