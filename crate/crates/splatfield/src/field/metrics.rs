//! Error and roughness metrics.

use super::{Field, GridField, QuadratureRule};
use crate::error::{Error, Result};
use crate::NeumaierSum;
use rayon::prelude::*;

/// Relative L2 error of `g` against reference `f` under the given rule,
/// channels summed inside the norms.
pub fn rel_l2_error(f: &dyn Field, g: &dyn Field, q: &QuadratureRule) -> Result<f64> {
    if f.channels() != g.channels() {
        return Err(Error::Dimension(format!(
            "channel mismatch: {} vs {}",
            f.channels(),
            g.channels()
        )));
    }
    let channels = f.channels();
    let d = q.domain().dim();
    let terms: Vec<(f64, f64)> = (0..q.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; 3];
            q.node_into(i, &mut x[..d]);
            let mut fv = [0.0; 8];
            let mut gv = [0.0; 8];
            f.eval_into(&x[..d], &mut fv[..channels]);
            g.eval_into(&x[..d], &mut gv[..channels]);
            let mut err2 = 0.0;
            let mut ref2 = 0.0;
            for c in 0..channels {
                let e = fv[c] - gv[c];
                err2 += e * e;
                ref2 += fv[c] * fv[c];
            }
            (err2, ref2)
        })
        .collect();
    let mut err = NeumaierSum::new();
    let mut reference = NeumaierSum::new();
    for (e, r) in terms {
        err.add(e);
        reference.add(r);
    }
    let ref2 = reference.value();
    if ref2 <= 0.0 {
        return Err(Error::UndefinedRatio("reference field has zero L2 norm".into()));
    }
    Ok((err.value() * q.weight()).sqrt() / (ref2 * q.weight()).sqrt())
}

/// L2 norm of a field under the rule, channels summed.
pub fn l2_norm(f: &dyn Field, q: &QuadratureRule) -> f64 {
    let channels = f.channels();
    let d = q.domain().dim();
    let terms: Vec<f64> = (0..q.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; 3];
            q.node_into(i, &mut x[..d]);
            let mut fv = [0.0; 8];
            f.eval_into(&x[..d], &mut fv[..channels]);
            fv[..channels].iter().map(|v| v * v).sum()
        })
        .collect();
    let mut acc = NeumaierSum::new();
    for t in terms {
        acc.add(t);
    }
    (acc.value() * q.weight()).sqrt()
}

/// Normalized gradient magnitude rms(|grad f|) / rms(f) over interior cells,
/// gradients by central differences in physical coordinates.
pub fn roughness(g: &GridField) -> Result<f64> {
    let d = g.dim();
    let res = g.res();
    if res.iter().any(|&n| n < 3) {
        return Err(Error::Size("roughness needs at least 3 cells per axis".into()));
    }
    let channels = g.channels();
    let strides: Vec<usize> = (0..d).map(|a| res[..a].iter().product()).collect();
    let spacing: Vec<f64> = (0..d)
        .map(|a| g.domain().extent(a) / res[a] as f64)
        .collect();

    let mut grad2 = NeumaierSum::new();
    let mut val2 = NeumaierSum::new();
    let mut count = 0usize;
    let cells: usize = res.iter().product();
    'cell: for cell in 0..cells {
        let mut rem = cell;
        let mut idx = [0usize; 3];
        for a in 0..d {
            idx[a] = rem % res[a];
            rem /= res[a];
            if idx[a] == 0 || idx[a] == res[a] - 1 {
                continue 'cell;
            }
        }
        count += 1;
        let vals = g.cell_values(cell);
        for c in 0..channels {
            val2.add(vals[c] * vals[c]);
            for a in 0..d {
                let fwd = g.cell_values(cell + strides[a])[c];
                let bwd = g.cell_values(cell - strides[a])[c];
                let df = (fwd - bwd) / (2.0 * spacing[a]);
                grad2.add(df * df);
            }
        }
    }
    if count == 0 {
        return Err(Error::Size("no interior cells".into()));
    }
    let denom = val2.value();
    if denom <= 0.0 {
        return Err(Error::UndefinedRatio("roughness of an identically-zero field".into()));
    }
    Ok((grad2.value() / denom).sqrt())
}
