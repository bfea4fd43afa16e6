//! Closed-form target fields with declared smoothness.

use super::{Domain, Field};
use crate::error::{Error, Result};
use crate::rng::{tags, Stream};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// One cosine mode `c * cos(2π k·x + phase)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierMode {
    pub wave: Vec<i64>,
    pub coeff: f64,
    pub phase: f64,
}

/// Evaluation rule of an [`AnalyticField`].
#[derive(Clone, Debug)]
pub enum FieldKind {
    /// u = sin(2πx)cos(2πy), v = -cos(2πx)sin(2πy), p = (cos(4πx)+cos(4πy))/4.
    TaylorGreen,
    /// Vorticity of a Lamb-Oseen vortex: (1/(π a²)) exp(-r²/a²).
    LambOseen { core_radius: f64, center: Vec<f64> },
    /// Random cosine series with coefficients decaying as |k|^-(s + d/2 + 1/2),
    /// one mode list per channel.
    FourierRandom { modes_per_channel: Vec<Vec<FourierMode>> },
}

/// A deterministic closed-form field on a box domain.
#[derive(Clone, Debug)]
pub struct AnalyticField {
    domain: Domain,
    kind: FieldKind,
    channels: usize,
    smoothness: f64,
}

/// Standing smooth test flow; declared smoothness 4.
pub fn make_taylor_green(domain: Domain) -> Result<AnalyticField> {
    if domain.dim() != 2 {
        return Err(Error::Dimension(format!(
            "taylor-green requires d = 2, got d = {}",
            domain.dim()
        )));
    }
    Ok(AnalyticField {
        domain,
        kind: FieldKind::TaylorGreen,
        channels: 3,
        smoothness: 4.0,
    })
}

/// Localized vortex with core radius `a`; declared smoothness 4.
pub fn make_lamb_oseen(domain: Domain, core_radius: f64, center: Vec<f64>) -> Result<AnalyticField> {
    if domain.dim() != 2 {
        return Err(Error::Dimension(format!(
            "lamb-oseen requires d = 2, got d = {}",
            domain.dim()
        )));
    }
    if !(core_radius > 0.0) {
        return Err(Error::Parameter(format!(
            "core radius must be positive, got {core_radius}"
        )));
    }
    if center.len() != 2 {
        return Err(Error::Dimension("vortex center must be 2-dimensional".into()));
    }
    Ok(AnalyticField {
        domain,
        kind: FieldKind::LambOseen { core_radius, center },
        channels: 1,
        smoothness: 4.0,
    })
}

/// Random cosine field of prescribed Sobolev smoothness `s`, single channel.
///
/// Coefficient standard deviations decay as |k|^-(s + d/2 + 1/2), which places
/// the field in H^(s+1/2) with summable margin. Wave vectors run over the
/// half lattice |k|_inf <= modes with positive leading nonzero component, so
/// distinct modes are L2-orthogonal and coefficient-space norms are exact.
pub fn make_fourier_random(domain: Domain, s: f64, modes: usize, seed: u64) -> Result<AnalyticField> {
    make_fourier_random_channels(domain, s, modes, seed, 1)
}

/// As [`make_fourier_random`] with `channels` independent replicas drawn from
/// per-channel substreams.
pub fn make_fourier_random_channels(
    domain: Domain,
    s: f64,
    modes: usize,
    seed: u64,
    channels: usize,
) -> Result<AnalyticField> {
    if !(s > 0.0) {
        return Err(Error::Parameter(format!("smoothness s must be positive, got {s}")));
    }
    if modes == 0 {
        return Err(Error::Parameter("mode count must be at least 1".into()));
    }
    if channels == 0 {
        return Err(Error::Parameter("channel count must be at least 1".into()));
    }
    let d = domain.dim();
    let decay = s + d as f64 / 2.0 + 0.5;
    let mut per_channel = Vec::with_capacity(channels);
    for c in 0..channels {
        let mut stream = Stream::substream(seed, &[tags::FOURIER, c as u64]);
        let mut list = Vec::new();
        for wave in half_lattice(d, modes as i64) {
            let knorm = wave.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt();
            let sd = knorm.powf(-decay);
            // fixed draw order per mode: coefficient (two raw outputs), then phase
            let coeff = sd * stream.normal();
            let phase = TWO_PI * stream.uniform();
            list.push(FourierMode { wave, coeff, phase });
        }
        per_channel.push(list);
    }
    Ok(AnalyticField {
        domain,
        kind: FieldKind::FourierRandom { modes_per_channel: per_channel },
        channels,
        smoothness: s,
    })
}

/// Cosine field with explicitly supplied modes (one channel per list).
pub fn fourier_with_modes(
    domain: Domain,
    s: f64,
    modes_per_channel: Vec<Vec<FourierMode>>,
) -> Result<AnalyticField> {
    if modes_per_channel.is_empty() {
        return Err(Error::Parameter("at least one channel required".into()));
    }
    let d = domain.dim();
    for list in &modes_per_channel {
        for m in list {
            if m.wave.len() != d {
                return Err(Error::Dimension(format!(
                    "wave vector {:?} does not match domain dimension {d}",
                    m.wave
                )));
            }
        }
    }
    let channels = modes_per_channel.len();
    Ok(AnalyticField {
        domain,
        kind: FieldKind::FourierRandom { modes_per_channel },
        channels,
        smoothness: s,
    })
}

/// Wave vectors with |k|_inf <= m, k != 0, leading nonzero component positive,
/// in lexicographic order.
fn half_lattice(d: usize, m: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut k = vec![-m; d];
    'outer: loop {
        if k.iter().any(|&v| v != 0) {
            let lead = k.iter().copied().find(|&v| v != 0).unwrap();
            if lead > 0 {
                out.push(k.clone());
            }
        }
        // odometer increment, last axis fastest
        for a in (0..d).rev() {
            if k[a] < m {
                k[a] += 1;
                continue 'outer;
            }
            k[a] = -m;
        }
        break;
    }
    out
}

impl AnalyticField {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            FieldKind::TaylorGreen => "taylor-green",
            FieldKind::LambOseen { .. } => "lamb-oseen",
            FieldKind::FourierRandom { .. } => "fourier-random",
        }
    }

    /// Declared Sobolev smoothness used by theory predictions.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Modes backing a fourier-random channel, if this field is one.
    pub fn fourier_modes(&self, channel: usize) -> Option<&[FourierMode]> {
        match &self.kind {
            FieldKind::FourierRandom { modes_per_channel } => {
                modes_per_channel.get(channel).map(|v| v.as_slice())
            }
            _ => None,
        }
    }
}

impl Field for AnalyticField {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::TaylorGreen => {
                let (sx, cx) = (TWO_PI * x[0]).sin_cos();
                let (sy, cy) = (TWO_PI * x[1]).sin_cos();
                out[0] = sx * cy;
                out[1] = -cx * sy;
                out[2] = 0.25 * ((2.0 * TWO_PI * x[0]).cos() + (2.0 * TWO_PI * x[1]).cos());
            }
            FieldKind::LambOseen { core_radius, center } => {
                let a2 = core_radius * core_radius;
                let r2 = crate::points::dist2(x, center);
                out[0] = (-r2 / a2).exp() / (PI * a2);
            }
            FieldKind::FourierRandom { modes_per_channel } => {
                for (c, list) in modes_per_channel.iter().enumerate() {
                    let mut acc = 0.0;
                    for mode in list {
                        let mut dot = 0.0;
                        for (a, &k) in mode.wave.iter().enumerate() {
                            dot += k as f64 * x[a];
                        }
                        acc += mode.coeff * (TWO_PI * dot + mode.phase).cos();
                    }
                    out[c] = acc;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit2() -> Domain {
        Domain::unit(2)
    }

    #[test]
    fn taylor_green_exact_points() {
        let f = make_taylor_green(unit2()).unwrap();
        // sin(pi/2)cos(pi/2) = 0
        assert!(f.eval(&[0.25, 0.25])[0].abs() < 1e-15);
        // sin(pi/2)cos(0) = 1
        assert_eq!(f.eval(&[0.25, 0.0])[0], 1.0);
        // frozen against an independent high-precision evaluation of
        // sin(0.2 pi) cos(0.4 pi)
        let v = f.eval(&[0.1, 0.2])[0];
        assert!((v - 0.18163563200134022).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn taylor_green_rejects_3d() {
        assert!(matches!(
            make_taylor_green(Domain::unit(3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn lamb_oseen_profile() {
        let a = 0.05;
        let f = make_lamb_oseen(unit2(), a, vec![0.5, 0.5]).unwrap();
        let peak = 1.0 / (PI * a * a);
        assert!((f.eval(&[0.5, 0.5])[0] - peak).abs() < 1e-9 * peak);
        let at_core = f.eval(&[0.5 + a, 0.5])[0];
        assert!((at_core - peak * (-1.0f64).exp()).abs() < 1e-9 * peak);
    }

    #[test]
    fn fourier_deterministic_from_seed() {
        let f1 = make_fourier_random(unit2(), 2.0, 8, 7).unwrap();
        let f2 = make_fourier_random(unit2(), 2.0, 8, 7).unwrap();
        let (m1, m2) = (f1.fourier_modes(0).unwrap(), f2.fourier_modes(0).unwrap());
        assert_eq!(m1, m2);
        let f3 = make_fourier_random(unit2(), 2.0, 8, 8).unwrap();
        assert_ne!(m1, f3.fourier_modes(0).unwrap());
    }

    #[test]
    fn fourier_single_mode_reduces_to_cosine() {
        let f = fourier_with_modes(
            unit2(),
            1.0,
            vec![vec![FourierMode { wave: vec![1, 0], coeff: 1.0, phase: 0.0 }]],
        )
        .unwrap();
        for &x in &[0.0, 0.13, 0.5, 0.77] {
            let got = f.eval(&[x, 0.42])[0];
            assert!((got - (TWO_PI * x).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn half_lattice_is_pair_free() {
        let waves = half_lattice(2, 3);
        assert_eq!(waves.len(), ((2 * 3 + 1) * (2 * 3 + 1) - 1) / 2);
        for w in &waves {
            let neg: Vec<i64> = w.iter().map(|v| -v).collect();
            assert!(!waves.contains(&neg), "pair {w:?} / {neg:?} both present");
        }
    }

    #[test]
    fn fourier_channels_draw_distinct_substreams() {
        let f = make_fourier_random_channels(unit2(), 1.0, 4, 7, 2).unwrap();
        assert_ne!(f.fourier_modes(0).unwrap(), f.fourier_modes(1).unwrap());
        assert_eq!(f.channels(), 2);
    }
}
