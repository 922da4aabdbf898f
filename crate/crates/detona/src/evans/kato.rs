//! Analytic bases for the decaying subspaces of the limiting matrices, transported
//! in lambda by Kato's ODE R' = (P'P - PP')R.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{DetonaError, Result};
use crate::numerics::eig::eigenvalues;
use crate::spectral::{lambda_derivative, LinCoeffs, Side};

pub type CM = DMatrix<C64>;

/// Decaying subspace at one endstate: unstable at -infinity, stable at +infinity.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub side: Side,
    pub lambda: C64,
    /// 7 x k analytic basis.
    pub basis: CM,
    /// Eigenvalues spanning the subspace, tracked continuously from the base point.
    pub selected: Vec<C64>,
    pub trace: C64,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

pub fn expected_dim(side: Side) -> usize {
    match side {
        Side::Minus => 4,
        Side::Plus => 3,
    }
}

struct Spectral {
    p: CM,
    dp: CM,
    selected: Vec<C64>,
}

fn to_dm(co: &LinCoeffs, lambda: C64) -> CM {
    let m = co.matrix(lambda);
    DMatrix::from_fn(7, 7, |i, j| m[(i, j)])
}

/// Unit null vector of (m - mu) by two steps of shifted inverse iteration.
fn null_vector(m: &CM, mu: C64) -> nalgebra::DVector<C64> {
    let n = m.nrows();
    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1.0);
    let mut sh = m.clone();
    let shift = mu + C64::new(1e-13 * scale, 0.0);
    for i in 0..n {
        sh[(i, i)] -= shift;
    }
    let lu = sh.lu();
    let mut x = nalgebra::DVector::from_fn(n, |i, _| C64::new(1.0 / (1.0 + i as f64), 0.0));
    for _ in 0..3 {
        if let Some(y) = lu.solve(&x) {
            let nv = y.norm();
            if nv.is_finite() && nv > 0.0 {
                x = y / C64::new(nv, 0.0);
            }
        }
    }
    x
}

/// Greedy nearest-neighbour match of `reference` into `ev`; returns indices into ev.
fn track(reference: &[C64], ev: &[C64]) -> Result<Vec<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, r) in reference.iter().enumerate() {
        for (j, e) in ev.iter().enumerate() {
            pairs.push(((r - e).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut taken_r = vec![false; reference.len()];
    let mut taken_e = vec![false; ev.len()];
    let mut out = vec![usize::MAX; reference.len()];
    for (_, i, j) in pairs {
        if !taken_r[i] && !taken_e[j] {
            taken_r[i] = true;
            taken_e[j] = true;
            out[i] = j;
        }
    }
    // the match must be unambiguous against the unselected eigenvalues
    for (i, r) in reference.iter().enumerate() {
        let d_in = (r - ev[out[i]]).norm();
        let d_out = ev
            .iter()
            .enumerate()
            .filter(|(j, _)| !out.contains(j))
            .map(|(_, e)| (r - e).norm())
            .fold(f64::INFINITY, f64::min);
        if d_in > 0.3 * d_out {
            return Err(DetonaError::TrackingLost(d_in));
        }
    }
    Ok(out)
}

fn initial_selection(ev: &[C64], side: Side) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..ev.len()).collect();
    for e in ev {
        if e.re.abs() < 1e-12 {
            return Err(DetonaError::NeutralMode(e.re.abs()));
        }
    }
    idx.retain(|&j| match side {
        Side::Minus => ev[j].re > 0.0,
        Side::Plus => ev[j].re < 0.0,
    });
    if idx.len() != expected_dim(side) {
        return Err(DetonaError::IllConditioned(format!(
            "splitting at base point has dimension {} on the {:?} side",
            idx.len(),
            side
        )));
    }
    Ok(idx)
}

/// Projector onto the tracked group and its lambda-derivative.
fn spectral(co: &LinCoeffs, lambda: C64, reference: Option<&[C64]>, side: Side) -> Result<Spectral> {
    let a = to_dm(co, lambda);
    let ev = eigenvalues(&a);
    let idx = match reference {
        Some(r) => track(r, &ev)?,
        None => initial_selection(&ev, side)?,
    };
    let at = a.transpose();
    let n = 7;
    let mut p = CM::zeros(n, n);
    let mut pj = Vec::with_capacity(idx.len());
    for &j in &idx {
        let v = null_vector(&a, ev[j]);
        let w = null_vector(&at, ev[j]);
        let den = (w.transpose() * &v)[(0, 0)];
        if den.norm() < 1e-12 {
            return Err(DetonaError::DegenerateEigenvector);
        }
        let pk = &v * w.transpose() / den;
        p += &pk;
        pj.push(pk);
    }
    let e = {
        let m = lambda_derivative(co.s);
        CM::from_fn(n, n, |i, j| m[(i, j)])
    };
    let q = CM::identity(n, n) - &p;
    let mut dp = CM::zeros(n, n);
    for (k, &j) in idx.iter().enumerate() {
        // reduced resolvent of the complementary group at mu_j
        let mut m = (CM::identity(n, n) * ev[j] - &a) * &q + &p;
        m = m.try_inverse().ok_or(DetonaError::DegenerateEigenvector)?;
        let rq = m * &q;
        dp += &pj[k] * &e * &rq + &rq * &e * &pj[k];
    }
    Ok(Spectral { p, dp, selected: idx.iter().map(|&j| ev[j]).collect() })
}

/// Subspace at a real base point with an orthonormal real basis.
pub fn initial_subspace(co: &LinCoeffs, side: Side, lambda: f64) -> Result<Subspace> {
    let lam = C64::new(lambda, 0.0);
    let sp = spectral(co, lam, None, side)?;
    let k = expected_dim(side);
    let pr = sp.p.map(|z| z.re);
    let svd = pr.svd(true, false);
    let u = svd.u.ok_or_else(|| DetonaError::IllConditioned("svd of projector".into()))?;
    // left singular vectors of the k largest singular values span the range
    let mut order: Vec<usize> = (0..7).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let basis = CM::from_fn(7, k, |i, j| C64::new(u[(i, order[j])], 0.0));
    let trace = sp.selected.iter().sum();
    Ok(Subspace { side, lambda: lam, basis, selected: sp.selected, trace })
}

fn kato_rhs(co: &LinCoeffs, side: Side, lambda: C64, dl: C64, reference: &[C64], r: &CM) -> Result<CM> {
    let sp = spectral(co, lambda, Some(reference), side)?;
    let g = (&sp.dp * &sp.p - &sp.p * &sp.dp) * dl;
    Ok(g * r)
}

fn rk4(co: &LinCoeffs, side: Side, l0: C64, dl: C64, t: f64, h: f64, reference: &[C64], r: &CM) -> Result<CM> {
    let lam = |tt: f64| l0 + dl * tt;
    let hc = C64::new(h, 0.0);
    let k1 = kato_rhs(co, side, lam(t), dl, reference, r)?;
    let k2 = kato_rhs(co, side, lam(t + 0.5 * h), dl, reference, &(r + &k1 * (hc * 0.5)))?;
    let k3 = kato_rhs(co, side, lam(t + 0.5 * h), dl, reference, &(r + &k2 * (hc * 0.5)))?;
    let k4 = kato_rhs(co, side, lam(t + h), dl, reference, &(r + &k3 * hc))?;
    let two = C64::new(2.0, 0.0);
    Ok(r + (k1 + k2 * two + k3 * two + k4) * (hc / 6.0))
}

/// Transport a subspace along the chord from `from.lambda` to `to`.
pub fn transport(co: &LinCoeffs, from: &Subspace, to: C64, tol: f64) -> Result<Subspace> {
    let side = from.side;
    let l0 = from.lambda;
    let dl = to - l0;
    let mut r = from.basis.clone();
    let mut reference = from.selected.clone();
    if dl.norm() == 0.0 {
        return Ok(from.clone());
    }
    let mut t = 0.0;
    // initial step relative to the eigenvalue scale near l0
    let mut h: f64 = (0.1 * (l0.norm().max(1e-3) / dl.norm())).min(1.0);
    let mut steps = 0;
    while t < 1.0 {
        steps += 1;
        if steps > 100_000 || h < 1e-12 {
            return Err(DetonaError::RefinementLimit(format!("Kato transport stalled at lambda = {}", l0 + dl * t)));
        }
        let hh = h.min(1.0 - t);
        let attempt = (|| -> Result<(CM, f64)> {
            let big = rk4(co, side, l0, dl, t, hh, &reference, &r)?;
            let half = rk4(co, side, l0, dl, t, 0.5 * hh, &reference, &r)?;
            let half = rk4(co, side, l0, dl, t + 0.5 * hh, 0.5 * hh, &reference, &half)?;
            let err = (&half - &big).norm() / r.norm().max(1e-300);
            Ok((&half + (&half - &big) / C64::new(15.0, 0.0), err))
        })();
        match attempt {
            Ok((rn, err)) if err <= tol => {
                t += hh;
                let lam = l0 + dl * t;
                let sp = spectral(co, lam, Some(&reference), side)?;
                r = &sp.p * rn;
                reference = sp.selected;
                h = hh * (0.9 * (tol / err.max(1e-300)).powf(0.2)).clamp(0.2, 4.0);
            }
            Ok((_, err)) => h = hh * (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.5),
            Err(DetonaError::TrackingLost(_)) => h = 0.25 * hh,
            Err(e) => return Err(e),
        }
    }
    let trace = reference.iter().sum();
    Ok(Subspace { side, lambda: to, basis: r, selected: reference, trace })
}

/// Transport along a polyline of lambda values.
pub fn transport_path(co: &LinCoeffs, from: &Subspace, path: &[C64], tol: f64) -> Result<Subspace> {
    let mut cur = from.clone();
    for &l in path {
        cur = transport(co, &cur, l, tol)?;
    }
    Ok(cur)
}

/// Canonical path from a real base point: along the real axis to |lambda|, then along the circle.
pub fn canonical_path(base: f64, lambda: C64) -> Vec<C64> {
    let rho = lambda.norm();
    let mut path = Vec::new();
    if rho == 0.0 {
        return path;
    }
    // geometric steps along the real axis
    let n_real = (((rho / base).ln().abs() / 0.5).ceil() as usize).max(1);
    for k in 1..=n_real {
        path.push(C64::new(base * (rho / base).powf(k as f64 / n_real as f64), 0.0));
    }
    let theta = lambda.arg();
    let n_arc = ((theta.abs() / (std::f64::consts::PI / 16.0)).ceil() as usize).max(1);
    for k in 1..=n_arc {
        path.push(C64::from_polar(rho, theta * k as f64 / n_arc as f64));
    }
    if let Some(last) = path.last_mut() {
        *last = lambda;
    }
    path
}

/// Subspace at `lambda` reached from the real base point along the canonical path.
pub fn subspace_at(co: &LinCoeffs, side: Side, base: f64, lambda: C64, tol: f64) -> Result<Subspace> {
    let init = initial_subspace(co, side, base)?;
    transport_path(co, &init, &canonical_path(base, lambda), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::tests::small_amplitude;

    fn coeffs(side: Side) -> LinCoeffs {
        let (pair, pr) = small_amplitude(0.05);
        let st = if side == Side::Minus { pair.left } else { pair.right };
        LinCoeffs::at_state(&st, &pr).unwrap()
    }

    #[test]
    fn transported_basis_stays_invariant() {
        for side in [Side::Minus, Side::Plus] {
            let co = coeffs(side);
            let lam = C64::new(0.3, 1.7);
            let s = subspace_at(&co, side, 1.0, lam, 1e-11).unwrap();
            assert_eq!(s.dim(), expected_dim(side));
            let a = to_dm(&co, lam);
            // A R = R M for some M: residual of projecting A R onto span R
            let q = s.basis.clone().qr().q();
            let ar = &a * &s.basis;
            let res = &ar - &q * (q.adjoint() * &ar);
            assert!(res.norm() < 1e-9 * ar.norm(), "{}", res.norm());
        }
    }

    #[test]
    fn conjugate_points_give_conjugate_bases() {
        let co = coeffs(Side::Minus);
        let lam = C64::new(0.2, 0.9);
        let a = subspace_at(&co, Side::Minus, 1.0, lam, 1e-11).unwrap();
        let b = subspace_at(&co, Side::Minus, 1.0, lam.conj(), 1e-11).unwrap();
        assert!((a.basis.map(|z| z.conj()) - b.basis).norm() < 1e-11);
    }

    #[test]
    fn transport_is_path_independent() {
        let co = coeffs(Side::Plus);
        let init = initial_subspace(&co, Side::Plus, 1.0).unwrap();
        let target = C64::new(0.5, 0.5);
        let a = transport_path(&co, &init, &[C64::new(1.0, 0.5), target], 1e-12).unwrap();
        let b = transport_path(&co, &init, &[C64::new(0.5, 0.0), target], 1e-12).unwrap();
        assert!((a.basis - b.basis).norm() < 1e-8);
    }
}
