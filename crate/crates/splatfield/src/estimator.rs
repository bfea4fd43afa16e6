//! Fixed-dictionary least-squares estimation from sparse noisy observations:
//! design and Gram matrices, L2 projection, spectral-stability diagnostics,
//! and the Monte-Carlo bias-variance decomposition.

use crate::error::{Error, Result};
use crate::field::{Field, QuadratureRule};
use crate::points::PointSet;
use crate::primitives::GaussianBasis;
use crate::rng::{tags, Stream};
use crate::NeumaierSum;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

/// Gaussian dictionary spanning V_K = span{phi_k}: the un-amplituded part of
/// a primitive set.
#[derive(Clone, Debug)]
pub struct Dictionary(GaussianBasis);

impl Dictionary {
    pub fn new(basis: GaussianBasis) -> Self {
        Self(basis)
    }

    /// Isotropic dictionary over the given centers with scale
    /// `c_sigma * h`.
    pub fn from_centers(cs: &crate::centers::CenterSet, c_sigma: f64) -> Result<Self> {
        if !(c_sigma > 0.0) {
            return Err(Error::Parameter(format!("scale factor must be positive, got {c_sigma}")));
        }
        Ok(Self(GaussianBasis::isotropic(
            cs.domain().clone(),
            cs.points().clone(),
            c_sigma * cs.fill(),
        )?))
    }

    pub fn basis(&self) -> &GaussianBasis {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Sparse noisy observations y_i = f(x_i) + eps_i.
#[derive(Clone, Debug)]
pub struct ObservationSet {
    locations: PointSet,
    clean: Vec<f64>,
    channels: usize,
    sigma_noise: f64,
    seed: u64,
    readings: Vec<f64>,
}

impl ObservationSet {
    /// Sample a field at the sensor locations and draw reproducible Gaussian
    /// noise. The stored readings use trial stream 0; per-trial replicas are
    /// available through [`ObservationSet::readings_for_trial`].
    pub fn sample(field: &dyn Field, locations: PointSet, sigma_noise: f64, seed: u64) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::Size("observation set needs at least one sensor".into()));
        }
        if !(sigma_noise >= 0.0) {
            return Err(Error::Parameter(format!("noise level must be non-negative, got {sigma_noise}")));
        }
        let channels = field.channels();
        let n = locations.len();
        let mut clean = vec![0.0; n * channels];
        for (i, chunk) in clean.chunks_mut(channels).enumerate() {
            field.eval_into(locations.point(i), chunk);
        }
        let mut obs = Self { locations, clean, channels, sigma_noise, seed, readings: Vec::new() };
        obs.readings = obs.readings_for_trial(0);
        Ok(obs)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn locations(&self) -> &PointSet {
        &self.locations
    }

    pub fn clean(&self) -> &[f64] {
        &self.clean
    }

    pub fn sigma_noise(&self) -> f64 {
        self.sigma_noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The realized noisy readings (trial 0), row-major N x C.
    pub fn readings(&self) -> &[f64] {
        &self.readings
    }

    /// Readings for a given trial: clean + sigma * Z with Z drawn from the
    /// stream (seed, NOISE, trial). The standard normals depend only on
    /// (seed, trial, sensor, channel), so scaling sigma rescales the same
    /// noise realization (common random numbers).
    pub fn readings_for_trial(&self, trial: u64) -> Vec<f64> {
        let mut stream = Stream::substream(self.seed, &[tags::NOISE, trial]);
        self.clean
            .iter()
            .map(|&c| c + self.sigma_noise * stream.normal())
            .collect()
    }

    /// A copy with a different noise level but the same seed, locations and
    /// clean values.
    pub fn with_sigma(&self, sigma_noise: f64) -> Self {
        let mut out = self.clone();
        out.sigma_noise = sigma_noise;
        out.readings = out.readings_for_trial(0);
        out
    }
}

/// Design matrix A with A_ij = phi_j(x_i), entries in (0, 1].
pub fn design_matrix(dict: &Dictionary, obs: &ObservationSet) -> DMatrix<f64> {
    let n = obs.len();
    let k = dict.len();
    let mut a = DMatrix::zeros(n, k);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| dict.basis().eval_all(obs.locations().point(i)))
        .collect();
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    a
}

const GRAM_BLOCK: usize = 4096;

/// Gram matrix G_jl = integral of phi_j phi_l over the domain, by quadrature.
///
/// Assembled on the lower triangle and mirrored, so G is exactly symmetric.
pub fn gram_matrix(dict: &Dictionary, q: &QuadratureRule) -> DMatrix<f64> {
    let k = dict.len();
    let d = dict.dim();
    // acc[j] holds the partial dot products G_jl / w for l >= j
    let mut acc: Vec<Vec<f64>> = (0..k).map(|j| vec![0.0; k - j]).collect();
    let mut block = Vec::new();
    let mut start = 0usize;
    while start < q.len() {
        let len = GRAM_BLOCK.min(q.len() - start);
        block.clear();
        block.resize(len * k, 0.0);
        block
            .par_chunks_mut(k)
            .enumerate()
            .for_each(|(r, row)| {
                let mut x = [0.0; 3];
                q.node_into(start + r, &mut x[..d]);
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = dict.basis().phi(j, &x[..d]);
                }
            });
        let block_ref: &[f64] = &block;
        acc.par_iter_mut().enumerate().for_each(|(j, row)| {
            for r in 0..len {
                let phi_r = &block_ref[r * k..(r + 1) * k];
                let pj = phi_r[j];
                if pj != 0.0 {
                    for (offset, slot) in row.iter_mut().enumerate() {
                        *slot += pj * phi_r[j + offset];
                    }
                }
            }
        });
        start += len;
    }
    let w = q.weight();
    let mut g = DMatrix::zeros(k, k);
    for j in 0..k {
        for (offset, &v) in acc[j].iter().enumerate() {
            let l = j + offset;
            let value = w * v;
            g[(j, l)] = value;
            g[(l, j)] = value;
        }
    }
    g
}

/// Quadrature load vector b_jc = integral of f_c phi_j.
fn load_vector(field: &dyn Field, dict: &Dictionary, q: &QuadratureRule) -> DMatrix<f64> {
    let k = dict.len();
    let channels = field.channels();
    let d = dict.dim();
    let terms: Vec<Vec<f64>> = (0..q.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; 3];
            q.node_into(i, &mut x[..d]);
            let mut fv = vec![0.0; channels];
            field.eval_into(&x[..d], &mut fv);
            let mut row = vec![0.0; k * channels];
            for j in 0..k {
                let p = dict.basis().phi(j, &x[..d]);
                for c in 0..channels {
                    row[j * channels + c] = p * fv[c];
                }
            }
            row
        })
        .collect();
    let mut acc = vec![NeumaierSum::new(); k * channels];
    for row in &terms {
        for (slot, &v) in acc.iter_mut().zip(row.iter()) {
            slot.add(v);
        }
    }
    let w = q.weight();
    DMatrix::from_fn(k, channels, |j, c| w * acc[j * channels + c].value())
}

/// L2 projection of `field` onto the dictionary span: solves G c = b.
///
/// Returns the coefficient matrix (K x C). A zero ridge on a numerically
/// singular G is a conditioning error carrying the smallest pivot.
pub fn project_l2(
    field: &dyn Field,
    dict: &Dictionary,
    gram: &DMatrix<f64>,
    q: &QuadratureRule,
    ridge: f64,
) -> Result<DMatrix<f64>> {
    let b = load_vector(field, dict, q);
    let solve = symmetric_solve(gram, ridge, &b)?;
    Ok(solve)
}

fn symmetric_solve(m: &DMatrix<f64>, ridge: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = m.nrows();
    let mut sys = m.clone();
    for j in 0..k {
        sys[(j, j)] += ridge;
    }
    match sys.clone().cholesky() {
        Some(chol) => Ok(chol.solve(rhs)),
        None => {
            let eig = sys.symmetric_eigenvalues();
            let smallest = eig.iter().copied().fold(f64::INFINITY, f64::min);
            Err(Error::Conditioning {
                detail: format!("{}x{} symmetric system is not positive definite", k, k),
                smallest_pivot: smallest,
            })
        }
    }
}

/// A dictionary with fitted coefficients, evaluable as a field.
pub struct DictionaryField<'a> {
    pub dict: &'a Dictionary,
    pub coefficients: DMatrix<f64>,
}

impl Field for DictionaryField<'_> {
    fn dim(&self) -> usize {
        self.dict.dim()
    }

    fn channels(&self) -> usize {
        self.coefficients.ncols()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for j in 0..self.dict.len() {
            let p = self.dict.basis().phi(j, x);
            for c in 0..out.len() {
                out[c] += p * self.coefficients[(j, c)];
            }
        }
    }
}

/// Result of a (possibly ridge-regularized) least-squares fit.
#[derive(Clone, Debug, Serialize)]
pub struct LeastSquaresFit {
    #[serde(skip)]
    pub coefficients: DMatrix<f64>,
    pub ridge: f64,
    pub condition_estimate: f64,
    /// Discrete sensor residual norm per channel.
    pub residual_norm: Vec<f64>,
    /// True when N = K and the unregularized system was solvable, so the fit
    /// interpolates the readings.
    pub interpolatory: bool,
}

/// Ridge policy: 1e-10 tr(A^T A)/K when N < K or the condition estimate
/// exceeds 1e12, else zero.
pub fn auto_ridge(ata: &DMatrix<f64>, n: usize) -> f64 {
    let k = ata.nrows();
    if n < k || condition_of(ata) > 1e12 {
        1e-10 * ata.trace() / k as f64
    } else {
        0.0
    }
}

fn condition_of(sym: &DMatrix<f64>) -> f64 {
    let eig = sym.symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solve the normal equations (A^T A + ridge I) c = A^T y per channel.
pub fn fit_least_squares(
    a: &DMatrix<f64>,
    obs: &ObservationSet,
    ridge: f64,
) -> Result<LeastSquaresFit> {
    fit_readings(a, obs, obs.readings(), ridge)
}

fn fit_readings(
    a: &DMatrix<f64>,
    obs: &ObservationSet,
    readings: &[f64],
    ridge: f64,
) -> Result<LeastSquaresFit> {
    if !(ridge >= 0.0) {
        return Err(Error::Parameter(format!("ridge must be non-negative, got {ridge}")));
    }
    let n = a.nrows();
    let k = a.ncols();
    let channels = obs.channels();
    let y = DMatrix::from_fn(n, channels, |i, c| readings[i * channels + c]);
    let ata = a.transpose() * a;
    let aty = a.transpose() * &y;
    let coefficients = symmetric_solve(&ata, ridge, &aty)?;
    let cond = {
        let mut sys = ata.clone();
        for j in 0..k {
            sys[(j, j)] += ridge;
        }
        condition_of(&sys)
    };
    let fitted = a * &coefficients;
    let residual_norm = (0..channels)
        .map(|c| {
            (0..n)
                .map(|i| {
                    let r = y[(i, c)] - fitted[(i, c)];
                    r * r
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(LeastSquaresFit {
        coefficients,
        ridge,
        condition_estimate: cond,
        residual_norm,
        interpolatory: ridge == 0.0 && n == k,
    })
}

/// Extreme generalized eigenvalues of the pencil ((|Omega|/N) A^T A, G).
///
/// G gets a 1e-12 tr(G)/K jitter and is Cholesky-whitened; the pencil
/// eigenvalues are the squared singular values of sqrt(|Omega|/N) A L^-T.
/// With N < K the pencil is rank deficient and c_low is exactly zero.
pub fn spectral_stability(
    a: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    n: usize,
    volume: f64,
) -> Result<(f64, f64)> {
    let k = gram.nrows();
    let jitter = 1e-12 * gram.trace() / k as f64;
    let mut g = gram.clone();
    for j in 0..k {
        g[(j, j)] += jitter;
    }
    let chol = g.clone().cholesky().ok_or_else(|| {
        let eig = g.symmetric_eigenvalues();
        Error::Conditioning {
            detail: "Gram matrix is indefinite after jitter".into(),
            smallest_pivot: eig.iter().copied().fold(f64::INFINITY, f64::min),
        }
    })?;
    // Y = L^-1 A^T, so Y^T Y = A G^-1 A^T shares nonzero eigenvalues with
    // the whitened pencil
    let y = chol.l_dirty().solve_lower_triangular(&a.transpose()).ok_or(Error::Conditioning {
        detail: "triangular solve failed during whitening".into(),
        smallest_pivot: jitter,
    })?;
    let scale = volume / n as f64;
    let svals = y.singular_values();
    let max = svals.iter().copied().fold(0.0f64, f64::max);
    let c_high = scale * max * max;
    let c_low = if n >= k {
        let min = svals.iter().copied().fold(f64::INFINITY, f64::min);
        scale * min * min
    } else {
        0.0
    };
    Ok((c_low, c_high))
}

/// Monte-Carlo bias-variance decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct BiasVarianceReport {
    /// Squared L2 error of the noiseless fit (= projection bias plus the
    /// sensor-sampling gap).
    pub bias2: f64,
    /// Mean squared L2 dispersion of noisy fits around the noiseless fit;
    /// this is the estimator's statistical variance since the fit is linear
    /// in the readings.
    pub variance: f64,
    /// Mean squared L2 error of the noisy fits.
    pub total: f64,
    /// Monte-Carlo standard error of `total`.
    pub total_se: f64,
    /// Squared L2 distance from the field to its L2 projection onto V_K.
    pub proj_bias2: f64,
    /// Squared L2 distance between the projection and the noiseless fit.
    pub fit_gap2: f64,
    /// Mean squared L2 distance between projection and noisy fits; satisfies
    /// total = proj_bias2 + proj_variance exactly (Pythagoras in L2).
    pub proj_variance: f64,
    pub trials: usize,
    pub sigma_noise: f64,
    pub k: usize,
    pub n: usize,
    pub ridge: f64,
    pub condition_estimate: f64,
    pub c_low: f64,
    pub c_high: f64,
}

/// Run `trials` independent noise draws and decompose the estimation error.
///
/// All L2 norms use the supplied quadrature rule, channels summed. Noise for
/// trial t comes from the stream (seed, NOISE, t), so runs differing only in
/// sigma share noise realizations.
pub fn bias_variance_mc(
    field: &dyn Field,
    dict: &Dictionary,
    sensors: &PointSet,
    sigma_noise: f64,
    trials: usize,
    q: &QuadratureRule,
    seed: u64,
) -> Result<BiasVarianceReport> {
    if trials < 2 {
        return Err(Error::Size("at least 2 Monte-Carlo trials required".into()));
    }
    let obs = ObservationSet::sample(field, sensors.clone(), sigma_noise, seed)?;
    let n = obs.len();
    let k = dict.len();
    let channels = field.channels();
    let d = dict.dim();

    let a = design_matrix(dict, &obs);
    let gram = gram_matrix(dict, q);
    let (c_low, c_high) = spectral_stability(&a, &gram, n, q.domain().volume())?;

    let ata = a.transpose() * &a;
    let ridge = auto_ridge(&ata, n);
    let mut sys = ata.clone();
    for j in 0..k {
        sys[(j, j)] += ridge;
    }
    let cond = condition_of(&sys);
    let chol = sys.cholesky().ok_or_else(|| Error::Conditioning {
        detail: "normal equations are singular; pass a ridge".into(),
        smallest_pivot: 0.0,
    })?;

    // field and basis values at the quadrature nodes
    let qn = q.len();
    let mut f_nodes = vec![0.0; qn * channels];
    f_nodes.par_chunks_mut(channels).enumerate().for_each(|(i, out)| {
        let mut x = [0.0; 3];
        q.node_into(i, &mut x[..d]);
        field.eval_into(&x[..d], out);
    });
    let mut phi_nodes = vec![0.0; qn * k];
    phi_nodes.par_chunks_mut(k).enumerate().for_each(|(i, row)| {
        let mut x = [0.0; 3];
        q.node_into(i, &mut x[..d]);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = dict.basis().phi(j, &x[..d]);
        }
    });

    let sq_norm_against = |coeff: &DMatrix<f64>, reference: &[f64]| -> f64 {
        let terms: Vec<f64> = (0..qn)
            .into_par_iter()
            .map(|i| {
                let phi_row = &phi_nodes[i * k..(i + 1) * k];
                let mut acc = 0.0;
                for c in 0..channels {
                    let mut v = 0.0;
                    for j in 0..k {
                        v += phi_row[j] * coeff[(j, c)];
                    }
                    let e = reference[i * channels + c] - v;
                    acc += e * e;
                }
                acc
            })
            .collect();
        let mut sum = NeumaierSum::new();
        for t in terms {
            sum.add(t);
        }
        sum.value() * q.weight()
    };
    let nodes_of = |coeff: &DMatrix<f64>| -> Vec<f64> {
        let mut out = vec![0.0; qn * channels];
        out.par_chunks_mut(channels).enumerate().for_each(|(i, slot)| {
            let phi_row = &phi_nodes[i * k..(i + 1) * k];
            for c in 0..channels {
                let mut v = 0.0;
                for j in 0..k {
                    v += phi_row[j] * coeff[(j, c)];
                }
                slot[c] = v;
            }
        });
        out
    };

    // projection (for the exact Pythagorean diagnostics) and noiseless fit
    let proj_jitter = 1e-14 * gram.trace() / k as f64;
    let c_star = project_l2(field, dict, &gram, q, proj_jitter)?;
    let c_clean = {
        let aty = a.transpose() * DMatrix::from_fn(n, channels, |i, c| obs.clean()[i * channels + c]);
        chol.solve(&aty)
    };
    let clean_nodes = nodes_of(&c_clean);
    let star_nodes = nodes_of(&c_star);
    let bias2 = sq_norm_against(&c_clean, &f_nodes);
    let proj_bias2 = sq_norm_against(&c_star, &f_nodes);
    let fit_gap2 = sq_norm_against(&c_clean, &star_nodes);

    let per_trial: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let readings = obs.readings_for_trial(t as u64);
            let y = DMatrix::from_fn(n, channels, |i, c| readings[i * channels + c]);
            let c_t = chol.solve(&(a.transpose() * y));
            let total_t = sq_norm_against(&c_t, &f_nodes);
            let var_t = sq_norm_against(&c_t, &clean_nodes);
            let proj_var_t = sq_norm_against(&c_t, &star_nodes);
            (total_t, var_t, proj_var_t)
        })
        .collect();

    let mut total_sum = NeumaierSum::new();
    let mut var_sum = NeumaierSum::new();
    let mut proj_var_sum = NeumaierSum::new();
    for &(t, v, pv) in &per_trial {
        total_sum.add(t);
        var_sum.add(v);
        proj_var_sum.add(pv);
    }
    let tf = trials as f64;
    let total = total_sum.value() / tf;
    let variance = var_sum.value() / tf;
    let proj_variance = proj_var_sum.value() / tf;
    let mut dev = NeumaierSum::new();
    for &(t, _, _) in &per_trial {
        dev.add((t - total) * (t - total));
    }
    let total_se = (dev.value() / (tf - 1.0)).sqrt() / tf.sqrt();

    Ok(BiasVarianceReport {
        bias2,
        variance,
        total,
        total_se,
        proj_bias2,
        fit_gap2,
        proj_variance,
        trials,
        sigma_noise,
        k,
        n,
        ridge,
        condition_estimate: cond,
        c_low,
        c_high,
    })
}

/// Capacity scale K* = (N/sigma^2)^(d/(2s+d)) * norm^(2d/(2s+d)) with all
/// problem constants set to one; returns the real value and the half-up
/// rounded integer floored at 1.
pub fn optimal_k(n: usize, sigma_noise: f64, d: usize, s: f64, field_norm: f64) -> Result<(f64, u64)> {
    if n == 0 || !(sigma_noise > 0.0) || !(s > 0.0) || !(field_norm > 0.0) || !(1..=3).contains(&d)
    {
        return Err(Error::Parameter(
            "optimal_k requires positive N, sigma, s, norm and d in {1,2,3}".into(),
        ));
    }
    let expo = d as f64 / (2.0 * s + d as f64);
    let kstar = (n as f64 / (sigma_noise * sigma_noise)).powf(expo) * field_norm.powf(2.0 * expo);
    let rounded = (kstar.round() as u64).max(1);
    Ok((kstar, rounded))
}
