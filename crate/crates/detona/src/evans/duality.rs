//! Constancy of W~^T S W for forward and dual decaying solutions.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use super::kato::CM;
use super::{subspaces_at, EvansOptions};
use crate::error::Result;
use crate::numerics::eig::eig;
use crate::numerics::ode::dopri5;
use crate::numerics::{as_complex, as_complex_mut};
use crate::spectral::{duality_matrix, CoefficientField, Side, M7};

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub lambda: C64,
    /// Largest |P(x)/P(x_ref) - 1| over well-conditioned cross pairings.
    pub max_cross_variation: f64,
    /// Largest |w~^T S w| over unit same-side pairings (which vanish identically).
    pub max_same_side: f64,
    pub checked: usize,
    pub skipped: usize,
}

struct Track {
    /// Unit columns at each grid point.
    cols: Vec<CM>,
    /// Accumulated log scale per column.
    logs: Vec<Vec<f64>>,
}

fn integrate<M: Fn(f64) -> M7>(m: M, init: &CM, grid: &[f64], opts: &EvansOptions) -> Result<Track> {
    let k = init.ncols();
    let mut cur = init.clone();
    let mut logs = vec![0.0; k];
    let mut out = Track { cols: Vec::new(), logs: Vec::new() };
    let normalize = |c: &mut CM, logs: &mut Vec<f64>| {
        for j in 0..k {
            let n = c.column(j).norm();
            c.column_mut(j).scale_mut(1.0 / n);
            logs[j] += n.ln();
        }
    };
    normalize(&mut cur, &mut logs);
    out.cols.push(cur.clone());
    out.logs.push(logs.clone());
    for w in grid.windows(2) {
        let mut y = vec![0.0; 14 * k];
        as_complex_mut(&mut y).copy_from_slice(cur.as_slice());
        dopri5(
            |x, yr, dr| {
                let a = m(x);
                let yc = as_complex(yr);
                let d = as_complex_mut(dr);
                for c in 0..k {
                    for i in 0..7 {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..7 {
                            acc += a[(i, j)] * yc[j + 7 * c];
                        }
                        d[i + 7 * c] = acc;
                    }
                }
            },
            w[0],
            w[1],
            &mut y,
            &opts.ode(),
        )?;
        cur = CM::from_column_slice(7, k, as_complex(&y));
        normalize(&mut cur, &mut logs);
        out.cols.push(cur.clone());
        out.logs.push(logs.clone());
    }
    Ok(out)
}

fn dual_basis(m: &M7, decaying_at_minus: bool) -> CM {
    let e = eig(&DMatrix::from_fn(7, 7, |i, j| m[(i, j)]));
    let idx: Vec<usize> = (0..7)
        .filter(|&j| if decaying_at_minus { e.values[j].re > 0.0 } else { e.values[j].re < 0.0 })
        .collect();
    CM::from_fn(7, idx.len(), |i, c| e.right[(i, idx[c])])
}

/// Integrate forward and dual decaying bases across [-L, L] and test the duality relation.
pub fn duality_check<F: CoefficientField>(field: &F, lambda: C64, n_grid: usize, opts: &EvansOptions) -> Result<DualityReport> {
    let l = opts.half_length.unwrap_or_else(|| field.half_length());
    let grid: Vec<f64> = (0..=n_grid).map(|i| -l + 2.0 * l * i as f64 / n_grid as f64).collect();
    let rev: Vec<f64> = grid.iter().rev().cloned().collect();
    let (sm, sp) = subspaces_at(field, lambda, opts)?;
    let fwd = |x: f64| field.coeffs(x).matrix(lambda);
    let dual = |x: f64| field.coeffs(x).dual_matrix(lambda);
    let wm = integrate(fwd, &sm.basis, &grid, opts)?;
    let mut wp = integrate(fwd, &sp.basis, &rev, opts)?;
    let dm0 = dual_basis(&field.end_coeffs(Side::Minus).dual_matrix(lambda), true);
    let dp0 = dual_basis(&field.end_coeffs(Side::Plus).dual_matrix(lambda), false);
    let dm = integrate(dual, &dm0, &grid, opts)?;
    let mut dp = integrate(dual, &dp0, &rev, opts)?;
    wp.cols.reverse();
    wp.logs.reverse();
    dp.cols.reverse();
    dp.logs.reverse();
    let s = duality_matrix(field.s());
    let s = CM::from_fn(7, 7, |i, j| s[(i, j)]);
    let mut max_same: f64 = 0.0;
    for i in 0..grid.len() {
        let a = dm.cols[i].transpose() * &s * &wm.cols[i];
        let b = dp.cols[i].transpose() * &s * &wp.cols[i];
        max_same = max_same.max(a.amax_norm()).max(b.amax_norm());
    }
    // cross pairings: (dual +, forward -) and (dual -, forward +)
    let mut max_var: f64 = 0.0;
    let (mut checked, mut skipped) = (0, 0);
    let pairs: [(&Track, &Track); 2] = [(&dp, &wm), (&dm, &wp)];
    for (dt, ft) in pairs {
        let kd = dt.cols[0].ncols();
        let kf = ft.cols[0].ncols();
        for a in 0..kd {
            for b in 0..kf {
                let vals: Vec<(f64, C64, f64)> = (0..grid.len())
                    .map(|i| {
                        let p = (dt.cols[i].column(a).transpose() * &s * ft.cols[i].column(b))[(0, 0)];
                        (p.norm(), p, dt.logs[i][a] + ft.logs[i][b])
                    })
                    .collect();
                let iref = (0..vals.len()).max_by(|&x, &y| vals[x].0.partial_cmp(&vals[y].0).unwrap()).unwrap();
                let (cref, pref, lref) = vals[iref];
                if cref < 1e-3 {
                    skipped += vals.len();
                    continue;
                }
                for &(c, p, lg) in &vals {
                    if c < 1e-3 {
                        skipped += 1;
                        continue;
                    }
                    let ratio = p / pref * (lg - lref).exp();
                    max_var = max_var.max((ratio - 1.0).norm());
                    checked += 1;
                }
            }
        }
    }
    Ok(DualityReport { lambda, max_cross_variation: max_var, max_same_side: max_same, checked, skipped })
}

trait AmaxNorm {
    fn amax_norm(&self) -> f64;
}

impl AmaxNorm for CM {
    fn amax_norm(&self) -> f64 {
        self.iter().fold(0.0, |a, z| a.max(z.norm()))
    }
}
