//! Evans function D(lambda) = det(W_1^-, W_2^-, W_4^-, W_7^-, W_5^+, W_6^+, W_7^+)|_{x=0},
//! analytic in lambda through Kato-transported initial bases.

pub mod compound;
pub mod contour;
pub mod duality;
pub mod kato;
pub mod stability;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{DetonaError, Result};
use crate::numerics::ode::{dopri5, dopri5_hooked, OdeOptions};
use crate::numerics::{as_complex, as_complex_mut, as_reals};
use crate::spectral::{CoefficientField, Side};
use kato::{Subspace, CM};

pub use contour::{winding_number, Contour};
pub use stability::{derivative_at_zero, lopatinski_delta, stability_check, StabilityReport, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Continuous orthogonalization with a scalar determinant factor.
    #[default]
    Polar,
    /// Exterior powers of dimension 35.
    Compound,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvansOptions {
    pub backend: Backend,
    pub rtol: f64,
    pub atol: f64,
    pub kato_tol: f64,
    /// Real base point of the Kato continuation.
    pub base: f64,
    /// Integration half-length; defaults to the profile truncation.
    pub half_length: Option<f64>,
    pub max_steps: usize,
}

impl Default for EvansOptions {
    fn default() -> Self {
        EvansOptions {
            backend: Backend::Polar,
            rtol: 1e-10,
            atol: 1e-12,
            kato_tol: 1e-11,
            base: 1.0,
            half_length: None,
            max_steps: 2_000_000,
        }
    }
}

impl EvansOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, max_steps: self.max_steps, ..Default::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvansSample {
    pub lambda: C64,
    pub d: C64,
    /// Sine of the smallest principal angle between the two subspaces at x = 0.
    pub conditioning: f64,
    pub half_length: f64,
    pub flagged: bool,
}

/// Decaying subspace carried to x = 0: W = Omega * alpha with det alpha = exp(log_gamma).
#[derive(Debug, Clone)]
pub struct Decaying {
    pub side: Side,
    pub lambda: C64,
    pub omega: CM,
    pub log_gamma: C64,
    pub steps: usize,
}

fn integration_interval<F: CoefficientField>(field: &F, side: Side, opts: &EvansOptions) -> (f64, f64) {
    let l = opts.half_length.unwrap_or_else(|| field.half_length());
    match side {
        Side::Minus => (-l, 0.0),
        Side::Plus => (l, 0.0),
    }
}

fn log_det(m: &CM) -> C64 {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..u.nrows() {
        acc += u[(i, i)].ln();
    }
    // permutation sign
    let mut p = DMatrix::<C64>::identity(m.nrows(), m.nrows());
    lu.p().permute_rows(&mut p);
    if p.determinant().re < 0.0 {
        acc += C64::new(0.0, std::f64::consts::PI);
    }
    acc
}

/// Integrate the span of `sub.basis` from the far end to x = 0 by continuous orthogonalization.
pub fn decaying_basis<F: CoefficientField>(field: &F, sub: &Subspace, opts: &EvansOptions) -> Result<Decaying> {
    let k = sub.dim();
    let lam = sub.lambda;
    let (x0, x1) = integration_interval(field, sub.side, opts);
    let q = sub.basis.clone().qr().q();
    let omega0 = q.columns(0, k).into_owned();
    let lg0 = log_det(&(omega0.adjoint() * &sub.basis));
    let mut y = vec![0.0; 2 * (7 * k + 1)];
    {
        let yc = as_complex_mut(&mut y);
        for c in 0..k {
            for i in 0..7 {
                yc[i + 7 * c] = omega0[(i, c)];
            }
        }
        yc[7 * k] = lg0;
    }
    let trace = sub.trace;
    let rhs = |x: f64, yr: &[f64], dr: &mut [f64]| {
        let a = field.coeffs(x).matrix(lam);
        let om = as_complex(yr);
        let d = as_complex_mut(dr);
        let mut aom = [C64::new(0.0, 0.0); 28];
        for c in 0..k {
            for i in 0..7 {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..7 {
                    acc += a[(i, j)] * om[j + 7 * c];
                }
                aom[i + 7 * c] = acc;
            }
        }
        let mut h = [C64::new(0.0, 0.0); 16];
        for c in 0..k {
            for r in 0..k {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..7 {
                    acc += om[i + 7 * r].conj() * aom[i + 7 * c];
                }
                h[r + k * c] = acc;
            }
        }
        for c in 0..k {
            for i in 0..7 {
                let mut acc = aom[i + 7 * c];
                for r in 0..k {
                    acc -= om[i + 7 * r] * h[r + k * c];
                }
                d[i + 7 * c] = acc;
            }
        }
        let mut tr = -trace;
        for r in 0..k {
            tr += h[r + k * r];
        }
        d[7 * k] = tr;
    };
    // polar re-orthonormalization keeps Omega continuous; its determinant goes into log_gamma
    let hook = |_x: f64, yr: &mut [f64]| {
        let yc = as_complex_mut(yr);
        let om = CM::from_fn(7, k, |i, c| yc[i + 7 * c]);
        let e = om.adjoint() * &om - CM::identity(k, k);
        let defect = e.norm();
        if defect > 1e-12 {
            let e2 = &e * &e;
            let corr = CM::identity(k, k) - &e * C64::new(0.5, 0.0) + &e2 * C64::new(0.375, 0.0);
            let on = om * corr;
            for c in 0..k {
                for i in 0..7 {
                    yc[i + 7 * c] = on[(i, c)];
                }
            }
            yc[7 * k] += (e.trace() - e2.trace() * 0.5) * 0.5;
        }
    };
    let stats = dopri5_hooked(rhs, hook, x0, x1, &mut y, &opts.ode())?;
    let yc = as_complex(&y);
    let omega = CM::from_fn(7, k, |i, c| yc[i + 7 * c]);
    if !omega.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(DetonaError::StiffnessFailure(x1));
    }
    Ok(Decaying { side: sub.side, lambda: lam, omega, log_gamma: yc[7 * k], steps: stats.accepted })
}

/// Exterior-power coordinates of the decaying subspace at x = 0.
pub fn decaying_compound<F: CoefficientField>(field: &F, sub: &Subspace, opts: &EvansOptions) -> Result<Vec<C64>> {
    let t = compound::table(sub.dim());
    let lam = sub.lambda;
    let (x0, x1) = integration_interval(field, sub.side, opts);
    let z0 = t.wedge(&sub.basis);
    let mut y = as_reals(&z0).to_vec();
    let trace = sub.trace;
    dopri5(
        |x, yr, dr| {
            let a = field.coeffs(x).matrix(lam);
            t.apply(&a, trace, as_complex(yr), as_complex_mut(dr));
        },
        x0,
        x1,
        &mut y,
        &opts.ode(),
    )?;
    let out = as_complex(&y).to_vec();
    if !out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(DetonaError::StiffnessFailure(x1));
    }
    Ok(out)
}

fn min_angle_sine(a: &CM, b: &CM) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let m = qa.adjoint() * qb;
    let smax = m.singular_values().iter().cloned().fold(0.0, f64::max).min(1.0);
    (1.0 - smax * smax).max(0.0).sqrt()
}

/// Evans function from given initial subspaces at both ends.
pub fn evans_from<F: CoefficientField>(field: &F, minus: &Subspace, plus: &Subspace, opts: &EvansOptions) -> Result<EvansSample> {
    let lam = minus.lambda;
    let half_length = opts.half_length.unwrap_or_else(|| field.half_length());
    let (dm, dp) = (decaying_basis(field, minus, opts)?, decaying_basis(field, plus, opts)?);
    let conditioning = min_angle_sine(&dm.omega, &dp.omega);
    let d = match opts.backend {
        Backend::Polar => {
            let mut m = CM::zeros(7, 7);
            m.columns_mut(0, 4).copy_from(&dm.omega);
            m.columns_mut(4, 3).copy_from(&dp.omega);
            (dm.log_gamma + dp.log_gamma).exp() * m.determinant()
        }
        Backend::Compound => {
            let zm = decaying_compound(field, minus, opts)?;
            let zp = decaying_compound(field, plus, opts)?;
            compound::pairing(&zm, &zp)
        }
    };
    Ok(EvansSample { lambda: lam, d, conditioning, half_length, flagged: conditioning <= 1e-8 || !d.re.is_finite() })
}

/// Subspaces at `lambda` reached along the canonical path from the real base point.
pub fn subspaces_at<F: CoefficientField>(field: &F, lambda: C64, opts: &EvansOptions) -> Result<(Subspace, Subspace)> {
    let m = kato::subspace_at(&field.end_coeffs(Side::Minus), Side::Minus, opts.base, lambda, opts.kato_tol)?;
    let p = kato::subspace_at(&field.end_coeffs(Side::Plus), Side::Plus, opts.base, lambda, opts.kato_tol)?;
    Ok((m, p))
}

/// Evans function at a single point.
pub fn evans<F: CoefficientField>(field: &F, lambda: C64, opts: &EvansOptions) -> Result<EvansSample> {
    let (m, p) = subspaces_at(field, lambda, opts)?;
    evans_from(field, &m, &p, opts)
}

/// Kato-continued subspaces at each point of a polyline (first point reached canonically).
pub fn subspace_chain<F: CoefficientField>(field: &F, points: &[C64], opts: &EvansOptions) -> Result<Vec<(Subspace, Subspace)>> {
    let mut out: Vec<(Subspace, Subspace)> = Vec::with_capacity(points.len());
    for (i, &l) in points.iter().enumerate() {
        if i == 0 {
            out.push(subspaces_at(field, l, opts)?);
        } else {
            let (pm, pp) = &out[i - 1];
            let m = kato::transport(&field.end_coeffs(Side::Minus), pm, l, opts.kato_tol)?;
            let p = kato::transport(&field.end_coeffs(Side::Plus), pp, l, opts.kato_tol)?;
            out.push((m, p));
        }
    }
    Ok(out)
}

/// Evaluate D on a chain of points: Kato chain sequentially, integrations in parallel.
pub fn evans_on_points<F: CoefficientField>(field: &F, points: &[C64], opts: &EvansOptions) -> Result<Vec<EvansSample>> {
    use rayon::prelude::*;
    let chain = subspace_chain(field, points, opts)?;
    chain.par_iter().map(|(m, p)| evans_from(field, m, p, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::tests::small_amplitude;
    use crate::spectral::{FrozenField, LinCoeffs};

    #[test]
    fn frozen_field_reproduces_exact_subspace() {
        let (pair, pr) = small_amplitude(0.05);
        let co = LinCoeffs::at_state(&pair.right, &pr).unwrap();
        let field = FrozenField { coeffs: co, half_length: 10.0 };
        let lam = C64::new(0.4, 0.8);
        let opts = EvansOptions::default();
        let (_, sp) = subspaces_at(&field, lam, &opts).unwrap();
        let d = decaying_basis(&field, &sp, &opts).unwrap();
        // W(x) = e^{A x} R exactly, so at x = 0 the normalized basis is R itself
        let g = (d.omega.adjoint() * &sp.basis).determinant();
        assert!((d.log_gamma.exp() - g).norm() < 1e-8 * g.norm());
        let res = &sp.basis - &d.omega * (d.omega.adjoint() * &sp.basis);
        assert!(res.norm() < 1e-8);
    }

    #[test]
    fn backends_agree_and_conjugate_symmetry() {
        let (pair, pr) = small_amplitude(0.05);
        let prof = crate::profile::solve_profile(&pair, &pr, &Default::default(), None).unwrap();
        let sys = crate::spectral::build_system(&prof).unwrap();
        let lam = C64::new(0.3, 0.7);
        let opts = EvansOptions::default();
        let a = evans(&sys, lam, &opts).unwrap();
        let b = evans(&sys, lam.conj(), &opts).unwrap();
        assert!((a.d.conj() - b.d).norm() < 1e-10 * a.d.norm(), "{} {}", a.d, b.d);
        let c = evans(&sys, lam, &EvansOptions { backend: Backend::Compound, ..opts }).unwrap();
        assert!((a.d - c.d).norm() < 1e-6 * a.d.norm(), "{} {}", a.d, c.d);
    }
}
