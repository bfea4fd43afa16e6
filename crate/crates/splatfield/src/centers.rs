//! Quasi-uniform center sets: farthest-point sampling, lattice centers, and
//! the fill-distance / separation-radius geometry.

use crate::error::{Error, Result};
use crate::field::{Domain, QuadratureRule};
use crate::points::{dist, dist2, PointSet};
use rayon::prelude::*;
use std::io::Write;

/// Primitive centers with their coverage geometry.
///
/// `fill` is the fill distance h (largest distance from any domain point to
/// its nearest center, measured on a probe grid), `separation` the radius q
/// (half the minimum pairwise distance, exact). For a single center q is
/// infinite and the ratio h/q is zero.
#[derive(Clone, Debug)]
pub struct CenterSet {
    domain: Domain,
    centers: PointSet,
    fill: f64,
    separation: f64,
}

impl CenterSet {
    /// Build from explicit points, computing h on the probe and q exactly.
    pub fn from_points(domain: Domain, centers: PointSet, probe: &QuadratureRule) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Size("center set must not be empty".into()));
        }
        let fill = fill_distance(&centers, probe)?;
        let separation = if centers.len() >= 2 {
            separation_radius(&centers)?
        } else {
            f64::INFINITY
        };
        Ok(Self { domain, centers, fill, separation })
    }

    fn with_geometry(domain: Domain, centers: PointSet, fill: f64, separation: f64) -> Self {
        Self { domain, centers, fill, separation }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn points(&self) -> &PointSet {
        &self.centers
    }

    /// Fill distance h.
    pub fn fill(&self) -> f64 {
        self.fill
    }

    /// Separation radius q.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Quasi-uniformity ratio h/q.
    pub fn ratio(&self) -> f64 {
        if self.separation.is_infinite() {
            0.0
        } else {
            self.fill / self.separation
        }
    }

    /// CSV export: geometry as comment lines, then one row per center.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# h={} q={} rho={}",
            crate::fmt_f64(self.fill),
            crate::fmt_f64(self.separation),
            crate::fmt_f64(self.ratio())
        )?;
        let d = self.centers.dim();
        let header: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in self.centers.iter() {
            let cols: Vec<String> = p.iter().map(|&v| crate::fmt_f64(v)).collect();
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    }
}

/// Greedy farthest-point selection order over `candidates`.
///
/// The first pick is the candidate nearest the domain centroid; every later
/// pick maximizes the minimum distance to the chosen set. Ties break to the
/// lowest candidate index, so prefixes of a long run equal shorter runs.
pub fn fps_selection(domain: &Domain, candidates: &PointSet, k: usize) -> Result<Vec<usize>> {
    let n = candidates.len();
    if k == 0 {
        return Err(Error::Size("K must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Size(format!("K = {k} exceeds candidate count {n}")));
    }
    let centroid = domain.centroid();
    let mut first = 0usize;
    let mut best = f64::INFINITY;
    for (i, p) in candidates.iter().enumerate() {
        let d2 = dist2(p, &centroid);
        if d2 < best {
            best = d2;
            first = i;
        }
    }
    let mut order = Vec::with_capacity(k);
    order.push(first);
    let mut min_d2: Vec<f64> = candidates
        .iter()
        .map(|p| dist2(p, candidates.point(first)))
        .collect();
    while order.len() < k {
        let mut next = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (i, &d2) in min_d2.iter().enumerate() {
            if d2 > best {
                best = d2;
                next = i;
            }
        }
        order.push(next);
        let np = candidates.point(next).to_vec();
        min_d2
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, d2)| *d2 = d2.min(dist2(candidates.point(i), &np)));
    }
    Ok(order)
}

/// Nested farthest-point sample of size `k`.
pub fn farthest_point_sample(
    domain: &Domain,
    candidates: &PointSet,
    k: usize,
    probe: &QuadratureRule,
) -> Result<CenterSet> {
    let order = fps_selection(domain, candidates, k)?;
    let mut pts = PointSet::empty(candidates.dim());
    for &i in &order {
        pts.push(candidates.point(i));
    }
    CenterSet::from_points(domain.clone(), pts, probe)
}

/// Smallest n with n^d >= k, found by integer search.
fn lattice_side(k: usize, d: usize) -> usize {
    let mut n = 1usize;
    while n.pow(d as u32) < k {
        n += 1;
    }
    n
}

/// Centers on the most-square lattice with at least K cells, truncated to
/// exactly K by dropping highest-index cells (axis 0 fastest). For K = n^d
/// the lattice is exact and h is stored in closed form (half the cell
/// diagonal); truncated sets fall back to the probe measurement.
pub fn grid_centers(domain: &Domain, k: usize) -> Result<CenterSet> {
    if k == 0 {
        return Err(Error::Size("K must be at least 1".into()));
    }
    let d = domain.dim();
    let n = lattice_side(k, d);
    let mut pts = PointSet::empty(d);
    let mut x = vec![0.0; d];
    for cell in 0..k {
        let mut rem = cell;
        for (a, xa) in x.iter_mut().enumerate() {
            let idx = rem % n;
            rem /= n;
            *xa = domain.lower()[a] + (idx as f64 + 0.5) * domain.extent(a) / n as f64;
        }
        pts.push(&x);
    }
    let exact = n.pow(d as u32) == k;
    if exact {
        let fill = 0.5
            * (0..d)
                .map(|a| {
                    let c = domain.extent(a) / n as f64;
                    c * c
                })
                .sum::<f64>()
                .sqrt();
        let separation = if k >= 2 {
            separation_radius(&pts)?
        } else {
            f64::INFINITY
        };
        Ok(CenterSet::with_geometry(domain.clone(), pts, fill, separation))
    } else {
        let probe = QuadratureRule::default_for(domain.clone());
        CenterSet::from_points(domain.clone(), pts, &probe)
    }
}

/// Fill distance: max over probe nodes of the distance to the nearest center.
pub fn fill_distance(centers: &PointSet, probe: &QuadratureRule) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::Size("fill distance of an empty center set".into()));
    }
    if probe.res().iter().any(|&n| n < 32) {
        return Err(Error::Size("fill-distance probe needs at least 32 nodes per axis".into()));
    }
    let d = probe.domain().dim();
    let worst = (0..probe.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; 3];
            probe.node_into(i, &mut x[..d]);
            centers
                .iter()
                .map(|c| dist2(c, &x[..d]))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(worst.sqrt())
}

/// Separation radius: half the minimum pairwise center distance, exact.
pub fn separation_radius(centers: &PointSet) -> Result<f64> {
    let k = centers.len();
    if k < 2 {
        return Err(Error::Size("separation radius needs at least 2 centers".into()));
    }
    let mut min = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = dist(centers.point(i), centers.point(j));
            if d == 0.0 {
                return Err(Error::Degeneracy(format!("duplicate centers at indices {i} and {j}")));
            }
            min = min.min(d);
        }
    }
    Ok(0.5 * min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe64() -> QuadratureRule {
        QuadratureRule::midpoint(Domain::unit(2), 64).unwrap()
    }

    #[test]
    fn fps_start_and_tie_rules() {
        let dom = Domain::unit(2);
        let cands = PointSet::new(2, vec![0.1, 0.1, 0.5, 0.5, 0.9, 0.9]);
        let cs = farthest_point_sample(&dom, &cands, 1, &probe64()).unwrap();
        assert_eq!(cs.points().point(0), &[0.5, 0.5]);
        let cs = farthest_point_sample(&dom, &cands, 2, &probe64()).unwrap();
        // symmetric tie broken by lowest index
        assert_eq!(cs.points().point(1), &[0.1, 0.1]);
    }

    #[test]
    fn fps_prefixes_are_nested() {
        let dom = Domain::unit(2);
        let q = QuadratureRule::midpoint(dom.clone(), 32).unwrap();
        let cands = q.nodes();
        let long = fps_selection(&dom, &cands, 40).unwrap();
        let short = fps_selection(&dom, &cands, 13).unwrap();
        assert_eq!(&long[..13], &short[..]);
    }

    #[test]
    fn fps_errors_when_k_exceeds_candidates() {
        let dom = Domain::unit(2);
        let cands = PointSet::new(2, vec![0.1, 0.1, 0.9, 0.9]);
        assert!(matches!(
            farthest_point_sample(&dom, &cands, 3, &probe64()),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn fps_on_dense_grid_is_quasi_uniform() {
        let dom = Domain::unit(2);
        let grid = QuadratureRule::midpoint(dom.clone(), 128).unwrap();
        let cs = farthest_point_sample(&dom, &grid.nodes(), 64, &grid).unwrap();
        assert!(cs.ratio() <= 4.0, "rho = {}", cs.ratio());
        assert!(cs.separation() > 0.0);
    }

    #[test]
    fn grid_centers_2x2() {
        let dom = Domain::unit(2);
        let cs = grid_centers(&dom, 4).unwrap();
        let expect = [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(cs.points().point(i), e);
        }
    }

    #[test]
    fn grid_centers_exact_lattice_geometry() {
        let dom = Domain::unit(2);
        for n in [2usize, 4, 8, 16] {
            let k = n * n;
            let cs = grid_centers(&dom, k).unwrap();
            let h_expect = (2.0f64).sqrt() / (2.0 * n as f64);
            let q_expect = 1.0 / (2.0 * n as f64);
            assert!((cs.fill() - h_expect).abs() < 1e-15);
            assert!((cs.separation() - q_expect).abs() < 1e-15);
            assert!((cs.ratio() - (2.0f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_centers_scaling_law_is_exact() {
        // h_K * K^{1/2} constant across exact lattices
        let dom = Domain::unit(2);
        let reference = grid_centers(&dom, 4).unwrap().fill() * 2.0;
        for k in [16usize, 64, 256, 1024] {
            let cs = grid_centers(&dom, k).unwrap();
            let v = cs.fill() * (k as f64).sqrt();
            assert!((v - reference).abs() <= 1e-12, "K={k}: {v} vs {reference}");
        }
    }

    #[test]
    fn grid_centers_truncated() {
        let dom = Domain::unit(2);
        let cs = grid_centers(&dom, 7).unwrap();
        assert_eq!(cs.len(), 7);
        // 3x3 lattice with the two highest cells dropped
        assert_eq!(cs.points().point(0), &[1.0 / 6.0, 1.0 / 6.0]);
        assert!(cs.fill() > 0.0 && cs.separation() > 0.0);
    }

    #[test]
    fn fill_distance_single_center() {
        let dom = Domain::unit(2);
        let probe = QuadratureRule::midpoint(dom.clone(), 128).unwrap();
        let centers = PointSet::new(2, vec![0.5, 0.5]);
        let h = fill_distance(&centers, &probe).unwrap();
        let exact = (0.5f64 * 0.5 + 0.25).sqrt(); // sqrt(2)/2
        let cell_diag = (2.0f64).sqrt() / 128.0;
        assert!((h - exact).abs() <= cell_diag, "h = {h}");
    }

    #[test]
    fn fill_distance_monotone_under_addition() {
        let dom = Domain::unit(2);
        let probe = QuadratureRule::midpoint(dom.clone(), 64).unwrap();
        let mut stream = crate::rng::Stream::new(17);
        let mut pts = PointSet::new(2, vec![0.3, 0.4]);
        let mut last = fill_distance(&pts, &probe).unwrap();
        for _ in 0..12 {
            pts.push(&[stream.uniform(), stream.uniform()]);
            let h = fill_distance(&pts, &probe).unwrap();
            assert!(h <= last + 1e-15);
            last = h;
        }
    }

    #[test]
    fn separation_cases() {
        let two = PointSet::new(2, vec![0.0, 0.0, 0.5, 0.0]);
        assert_eq!(separation_radius(&two).unwrap(), 0.25);
        let one = PointSet::new(2, vec![0.1, 0.1]);
        assert!(matches!(separation_radius(&one), Err(Error::Size(_))));
        let dup = PointSet::new(2, vec![0.1, 0.1, 0.1, 0.1]);
        assert!(matches!(separation_radius(&dup), Err(Error::Degeneracy(_))));
    }

    #[test]
    fn csv_export_shape() {
        let dom = Domain::unit(2);
        let cs = grid_centers(&dom, 4).unwrap();
        let mut buf = Vec::new();
        cs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# h="));
        assert_eq!(lines[1], "x1,x2");
        assert_eq!(lines.len(), 6);
    }
}
