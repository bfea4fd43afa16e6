//! Flat storage for point sets in 2 or 3 dimensions.

/// A list of points stored as a flat coordinate buffer with stride `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0, "coordinate buffer length must be a multiple of dim");
        Self { dim, coords }
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, coords: Vec::new() }
    }

    pub fn from_points(dim: usize, pts: &[&[f64]]) -> Self {
        let mut coords = Vec::with_capacity(pts.len() * dim);
        for p in pts {
            assert_eq!(p.len(), dim);
            coords.extend_from_slice(p);
        }
        Self { dim, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// The subset of the first `n` points.
    pub fn prefix(&self, n: usize) -> PointSet {
        PointSet::new(self.dim, self.coords[..n * self.dim].to_vec())
    }
}

/// Squared Euclidean distance.
#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// Euclidean distance.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_access() {
        let ps = PointSet::new(2, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(ps.len(), 2);
        assert_eq!(ps.point(1), &[2.0, 3.0]);
        assert_eq!(ps.prefix(1).point(0), &[0.0, 1.0]);
    }

    #[test]
    fn distances() {
        assert_eq!(dist(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        assert_eq!(dist2(&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]), 3.0);
    }
}
