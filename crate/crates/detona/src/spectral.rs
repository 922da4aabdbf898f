//! First-order eigenvalue systems W' = A(x, lambda) W in R^7, their limits at
//! the endstates, normal-mode dispersion relations and the essential spectrum.
//!
//! Integration uses flux coordinates W = (tau, w, w_hat), w = (u, E, z),
//! w_hat = b w' - A21 tau - A22 w, in which the system is affine in lambda and
//! needs no second derivatives of the profile. The map to (tau, w, b w') has
//! unit determinant.

use nalgebra::{Matrix3, Matrix4, SMatrix, Vector3, Vector4};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::endstates::EndstatePair;
use crate::error::{DetonaError, Result};
use crate::model::{diffusion_derivs, flux_jet, ignition, thermo, ModelParams, State};
use crate::numerics::eig::{eig, eigenvalues};
use crate::numerics::poly_roots;
use crate::profile::Profile;

pub type M7 = SMatrix<C64, 7, 7>;
pub type R7 = SMatrix<f64, 7, 7>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Minus,
    Plus,
}

/// x-dependent blocks of the linearized operator L U = -(A U)' + (B U')' + C U.
#[derive(Debug, Clone, Copy)]
pub struct LinCoeffs {
    pub s: f64,
    pub a: Matrix4<f64>,
    pub b: Matrix3<f64>,
    pub binv: Matrix3<f64>,
    pub gw: Matrix3<f64>,
}

/// A = dF - (dB .) U', B, C = dG at a profile point.
pub fn lin_coeffs(state: &State, du: &Vector4<f64>, params: &ModelParams) -> Result<LinCoeffs> {
    let jet = flux_jet(state, params)?;
    let (bt, bu) = diffusion_derivs(state, params);
    let mut a = jet.dF;
    let c0 = bt * du;
    let c1 = bu * du;
    for i in 0..4 {
        a[(i, 0)] -= c0[i];
        a[(i, 1)] -= c1[i];
    }
    let b: Matrix3<f64> = jet.B.fixed_view::<3, 3>(1, 1).into_owned();
    let binv = b.try_inverse().ok_or_else(|| DetonaError::NonPhysical("diffusion block b is singular".into()))?;
    Ok(LinCoeffs { s: params.s, a, b, binv, gw: jet.dG.fixed_view::<3, 3>(1, 1).into_owned() })
}

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

impl LinCoeffs {
    pub fn at_state(state: &State, params: &ModelParams) -> Result<Self> {
        lin_coeffs(state, &Vector4::zeros(), params)
    }

    fn a21(&self) -> Vector3<f64> {
        self.a.fixed_view::<3, 1>(1, 0).into_owned()
    }

    fn a22(&self) -> Matrix3<f64> {
        self.a.fixed_view::<3, 3>(1, 1).into_owned()
    }

    /// Real part of the system matrix (the lambda-independent piece).
    pub fn matrix0(&self) -> R7 {
        let s = self.s;
        let bi = self.binv;
        let ba21 = bi * self.a21();
        let ba22 = bi * self.a22();
        let mut m = R7::zeros();
        m[(0, 0)] = -ba21[0] / s;
        for j in 0..3 {
            m[(0, 1 + j)] = -ba22[(0, j)] / s;
            m[(0, 4 + j)] = -bi[(0, j)] / s;
        }
        for i in 0..3 {
            m[(1 + i, 0)] = ba21[i];
            for j in 0..3 {
                m[(1 + i, 1 + j)] = ba22[(i, j)];
                m[(1 + i, 4 + j)] = bi[(i, j)];
                m[(4 + i, 1 + j)] = -self.gw[(i, j)];
            }
        }
        m
    }

    /// Forward system matrix in flux coordinates.
    pub fn matrix(&self, lambda: C64) -> M7 {
        let mut m = self.matrix0().map(c);
        add_lambda_part(&mut m, lambda, self.s);
        m
    }

    /// Dual system matrix: W~^T S W is x-independent for solutions of the two systems.
    pub fn dual_matrix(&self, lambda: C64) -> M7 {
        let s = self.s;
        let bit = self.binv.transpose();
        let ba21t = (self.binv * self.a21()).transpose();
        let a22t_bit = self.a22().transpose() * bit;
        let mut m = M7::zeros();
        m[(0, 0)] = -lambda / s;
        for j in 0..3 {
            m[(0, 4 + j)] = c(ba21t[j] / s);
        }
        for i in 0..3 {
            for j in 0..3 {
                m[(1 + i, 4 + j)] = c(bit[(i, j)]);
                m[(4 + i, 1 + j)] = c(-self.gw[(j, i)]) + if i == j { lambda } else { C64::new(0.0, 0.0) };
                m[(4 + i, 4 + j)] = c(-a22t_bit[(i, j)]);
            }
        }
        // J^T tau~' enters the first w~2 row
        m[(4, 0)] += -lambda / s;
        for j in 0..3 {
            m[(4, 4 + j)] += c(ba21t[j] / s);
        }
        m
    }

    /// Change of variables P: (tau, w, w_hat) -> (tau, w, b w').
    pub fn flux_to_paper(&self) -> R7 {
        let mut p = R7::identity();
        let a21 = self.a21();
        let a22 = self.a22();
        for i in 0..3 {
            p[(4 + i, 0)] = a21[i];
            for j in 0..3 {
                p[(4 + i, 1 + j)] = a22[(i, j)];
            }
        }
        p
    }

    /// Constant-coefficient matrix in (tau, w, b w') coordinates, valid where the profile is flat.
    pub fn matrix_paper(&self, lambda: C64) -> M7 {
        let p = self.flux_to_paper().map(c);
        let pinv = self.flux_to_paper().try_inverse().unwrap().map(c);
        p * self.matrix(lambda) * pinv
    }

    /// Symbol -mu A + mu^2 B + C - lambda of the normal-mode problem.
    pub fn symbol(&self, mu: C64, lambda: C64) -> SMatrix<C64, 4, 4> {
        let mut b4 = Matrix4::<f64>::zeros();
        b4.fixed_view_mut::<3, 3>(1, 1).copy_from(&self.b);
        let mut g4 = Matrix4::<f64>::zeros();
        g4.fixed_view_mut::<3, 3>(1, 1).copy_from(&self.gw);
        let mut m = self.a.map(c) * (-mu) + b4.map(c) * (mu * mu) + g4.map(c);
        for i in 0..4 {
            m[(i, i)] -= lambda;
        }
        m
    }
}

fn add_lambda_part(m: &mut M7, lambda: C64, s: f64) {
    m[(0, 0)] += lambda / s;
    for i in 0..3 {
        m[(4 + i, 1 + i)] += lambda;
    }
}

/// d A / d lambda (constant).
pub fn lambda_derivative(s: f64) -> M7 {
    let mut m = M7::zeros();
    add_lambda_part(&mut m, C64::new(1.0, 0.0), s);
    m
}

/// Duality matrix S in flux coordinates.
pub fn duality_matrix(s: f64) -> M7 {
    let mut m = M7::zeros();
    m[(0, 0)] = c(s);
    m[(0, 1)] = c(1.0);
    for i in 0..3 {
        m[(1 + i, 4 + i)] = c(1.0);
        m[(4 + i, 1 + i)] = c(-1.0);
    }
    m
}

/// Source of interior coefficients for the eigenvalue ODE.
pub trait CoefficientField: Sync {
    fn coeffs(&self, x: f64) -> LinCoeffs;
    fn end_coeffs(&self, side: Side) -> LinCoeffs;
    fn s(&self) -> f64;
    /// Half-length beyond which the coefficients are treated as constant.
    fn half_length(&self) -> f64;
}

/// First-order system built on a converged profile, optionally translated by `shift`.
#[derive(Debug, Clone)]
pub struct FirstOrderSystem<'a> {
    pub profile: &'a Profile,
    pub shift: f64,
    minus: LinCoeffs,
    plus: LinCoeffs,
}

pub fn build_system(profile: &Profile) -> Result<FirstOrderSystem<'_>> {
    build_shifted_system(profile, 0.0)
}

pub fn build_shifted_system(profile: &Profile, shift: f64) -> Result<FirstOrderSystem<'_>> {
    let pr = profile.params();
    Ok(FirstOrderSystem {
        profile,
        shift,
        minus: LinCoeffs::at_state(&profile.pair().left, pr)?,
        plus: LinCoeffs::at_state(&profile.pair().right, pr)?,
    })
}

impl<'a> CoefficientField for FirstOrderSystem<'a> {
    fn coeffs(&self, x: f64) -> LinCoeffs {
        let xs = x + self.shift;
        let l = self.profile.half_length;
        if xs < -l {
            return self.minus;
        }
        if xs > l {
            return self.plus;
        }
        let (st, du) = self.profile.state_at(xs);
        lin_coeffs(&st, &du, self.profile.params()).unwrap_or(if xs < 0.0 { self.minus } else { self.plus })
    }

    fn end_coeffs(&self, side: Side) -> LinCoeffs {
        match side {
            Side::Minus => self.minus,
            Side::Plus => self.plus,
        }
    }

    fn s(&self) -> f64 {
        self.profile.params().s
    }

    fn half_length(&self) -> f64 {
        self.profile.half_length + self.shift.abs()
    }
}

impl<'a> FirstOrderSystem<'a> {
    pub fn matrix(&self, x: f64, lambda: C64) -> M7 {
        self.coeffs(x).matrix(lambda)
    }

    pub fn asymptotic(&self, side: Side, lambda: C64) -> M7 {
        self.end_coeffs(side).matrix(lambda)
    }

    pub fn asymptotic_dual(&self, side: Side, lambda: C64) -> M7 {
        self.end_coeffs(side).dual_matrix(lambda)
    }
}

/// Constant-coefficient field (profile frozen at one state), used in tests.
#[derive(Debug, Clone, Copy)]
pub struct FrozenField {
    pub coeffs: LinCoeffs,
    pub half_length: f64,
}

impl CoefficientField for FrozenField {
    fn coeffs(&self, _x: f64) -> LinCoeffs {
        self.coeffs
    }
    fn end_coeffs(&self, _side: Side) -> LinCoeffs {
        self.coeffs
    }
    fn s(&self) -> f64 {
        self.coeffs.s
    }
    fn half_length(&self) -> f64 {
        self.half_length
    }
}

/// Seven spatial roots mu(lambda) at one endstate, indexed by tag 1..7 (stored 0..6):
/// 1-3 slow fluid, 4-5 reactive, 6-7 fast fluid.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSet {
    pub side: Side,
    pub lambda: C64,
    pub mu: [C64; 7],
    /// Mode decays toward its own endstate (Re mu < 0 at +, Re mu > 0 at -).
    pub decaying: [bool; 7],
    pub slow: [bool; 7],
}

struct Poly(Vec<C64>);

impl Poly {
    fn mul(&self, o: &Poly) -> Poly {
        let mut r = vec![C64::new(0.0, 0.0); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                r[i + j] += a * b;
            }
        }
        Poly(r)
    }
    fn add(&self, o: &Poly, sign: f64) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly((0..n)
            .map(|k| self.0.get(k).copied().unwrap_or_default() + o.0.get(k).copied().unwrap_or_default() * sign)
            .collect())
    }
}

/// Coefficients (ascending) of det(-mu A_f + mu^2 B_f - lambda) over the fluid block (tau, u, E).
pub fn fluid_polynomial(coeffs: &LinCoeffs, lambda: C64) -> Vec<C64> {
    let mut b4 = Matrix4::<f64>::zeros();
    b4.fixed_view_mut::<3, 3>(1, 1).copy_from(&coeffs.b);
    let entry = |i: usize, j: usize| -> Poly {
        let l = if i == j { -lambda } else { C64::new(0.0, 0.0) };
        Poly(vec![l, c(-coeffs.a[(i, j)]), c(b4[(i, j)])])
    };
    let m = |i, j| entry(i, j);
    let minor = |r1: usize, r2: usize, c1: usize, c2: usize| m(r1, c1).mul(&m(r2, c2)).add(&m(r1, c2).mul(&m(r2, c1)), -1.0);
    let d = m(0, 0).mul(&minor(1, 2, 1, 2)).add(&m(0, 1).mul(&minor(1, 2, 0, 2)), -1.0).add(&m(0, 2).mul(&minor(1, 2, 0, 1)), 1.0);
    let mut v = d.0;
    while v.len() > 1 && v.last().map_or(false, |x| x.norm() == 0.0) {
        v.pop();
    }
    v
}

/// Normal modes from the factorized dispersion relation (reactive quadratic times fluid quintic).
pub fn dispersion_roots(side: Side, lambda: C64, params: &ModelParams, pair: &EndstatePair) -> Result<ModeSet> {
    let st = match side {
        Side::Minus => pair.left,
        Side::Plus => pair.right,
    };
    let co = LinCoeffs::at_state(&st, params)?;
    let th = thermo(&st, params)?;
    let s = params.s;
    let d_eff = params.dcoef / (st.tau * st.tau);
    let kphi = params.krate * ignition(th.T, params).0;
    // reactive: d_eff mu^2 + s mu - k phi - lambda = 0
    let disc = (c(s * s) + (c(kphi) + lambda) * 4.0 * d_eff).sqrt();
    let r1 = (-c(s) + disc) / (2.0 * d_eff);
    let r2 = (-c(s) - disc) / (2.0 * d_eff);
    let (mu4, mu5) = if r1.re >= r2.re { (r1, r2) } else { (r2, r1) };
    // fluid quintic
    // three roots are O(|lambda|) for small lambda; solve in mu = rho nu to keep them resolved
    let rho = lambda.norm().clamp(f64::MIN_POSITIVE, 1.0);
    let scaled: Vec<C64> = fluid_polynomial(&co, lambda).iter().enumerate().map(|(k, a)| a * rho.powi(k as i32)).collect();
    let mut fl: Vec<C64> = poly_roots(&scaled).into_iter().map(|v| v * rho).collect();
    if fl.len() != 5 {
        return Err(DetonaError::IllConditioned(format!("fluid polynomial has {} roots", fl.len())));
    }
    fl.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    let mut slow: Vec<C64> = fl[..3].to_vec();
    let mut fast: Vec<C64> = fl[3..].to_vec();
    fast.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    // order slow roots by proximity to -lambda / a_j, a = (-s - sigma, -s, -s + sigma)
    let guess = [lambda / (s + th.sigma), lambda / s, lambda / (s - th.sigma)];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let best = perms
        .iter()
        .min_by(|p, q| {
            let cost = |p: &[usize; 3]| (0..3).map(|k| (slow[p[k]] - guess[k]).norm()).sum::<f64>();
            cost(p).partial_cmp(&cost(q)).unwrap()
        })
        .unwrap();
    slow = best.iter().map(|&k| slow[k]).collect();
    let mu = [slow[0], slow[1], slow[2], mu4, mu5, fast[0], fast[1]];
    let decaying = std::array::from_fn(|k| match side {
        Side::Plus => mu[k].re < 0.0,
        Side::Minus => mu[k].re > 0.0,
    });
    let slow_flags = [true, true, true, true, false, false, false];
    Ok(ModeSet { side, lambda, mu, decaying, slow: slow_flags })
}

/// Eigenvalues of the asymptotic first-order matrix.
pub fn asymptotic_eigenvalues(side: Side, lambda: C64, params: &ModelParams, pair: &EndstatePair) -> Result<Vec<C64>> {
    let st = match side {
        Side::Minus => pair.left,
        Side::Plus => pair.right,
    };
    let co = LinCoeffs::at_state(&st, params)?;
    let m = co.matrix(lambda);
    Ok(eigenvalues(&nalgebra::DMatrix::from_fn(7, 7, |i, j| m[(i, j)])))
}

/// (number of eigenvalues with Re < 0, number with Re > 0) of the asymptotic matrix.
pub fn consistent_splitting(side: Side, lambda: C64, params: &ModelParams, pair: &EndstatePair) -> Result<(usize, usize)> {
    let ev = asymptotic_eigenvalues(side, lambda, params, pair)?;
    let mut ns = 0;
    let mut nu = 0;
    for m in ev {
        if m.re.abs() < 1e-12 {
            return Err(DetonaError::NeutralMode(m.re.abs()));
        }
        if m.re < 0.0 {
            ns += 1;
        } else {
            nu += 1;
        }
    }
    Ok((ns, nu))
}

/// Endstate symbol matrices (A, B, G) = (dF, B, dG) at U_-/U_+.
pub fn endstate_symbols(side: Side, params: &ModelParams, pair: &EndstatePair) -> Result<(Matrix4<f64>, Matrix4<f64>, Matrix4<f64>)> {
    let st = match side {
        Side::Minus => pair.left,
        Side::Plus => pair.right,
    };
    let jet = flux_jet(&st, params)?;
    Ok((jet.dF, jet.B, jet.dG))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumPoint {
    pub xi: f64,
    pub lambda: [C64; 4],
    /// Branch index (0-2 fluid, 3 reactive).
    pub branch: [usize; 4],
}

/// Eigenvalues of -i xi A - xi^2 B + G along the xi grid; the reactive branch is
/// i xi s - xi^2 d_eff - k phi.
pub fn essential_spectrum_matrices(a: &Matrix4<f64>, b: &Matrix4<f64>, g: &Matrix4<f64>, xi: &[f64]) -> Vec<SpectrumPoint> {
    xi.iter()
        .map(|&x| {
            let m = a.map(c) * C64::new(0.0, -x) + b.map(c) * c(-x * x) + g.map(c);
            // block-triangular: fluid 3x3 plus reactive corner
            let fl: SMatrix<C64, 3, 3> = m.fixed_view::<3, 3>(0, 0).into_owned();
            let ev = eigenvalues(&nalgebra::DMatrix::from_fn(3, 3, |i, j| fl[(i, j)]));
            let mut lam = [ev[0], ev[1], ev[2], m[(3, 3)]];
            let mut order = [0usize, 1, 2];
            order.sort_by(|&p, &q| lam[p].im.partial_cmp(&lam[q].im).unwrap());
            let sorted = [lam[order[0]], lam[order[1]], lam[order[2]]];
            lam[..3].copy_from_slice(&sorted);
            SpectrumPoint { xi: x, lambda: lam, branch: [0, 1, 2, 3] }
        })
        .collect()
}

pub fn essential_spectrum(side: Side, params: &ModelParams, pair: &EndstatePair, xi: &[f64]) -> Result<Vec<SpectrumPoint>> {
    let (a, b, g) = endstate_symbols(side, params, pair)?;
    Ok(essential_spectrum_matrices(&a, &b, &g, xi))
}

/// Geometric spacing near 0 and linear spacing out to xi_max; strictly positive.
pub fn xi_grid(xi_max: f64, n_geo: usize, n_lin: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n_geo + n_lin);
    let x0 = 1e-4f64;
    for k in 0..n_geo {
        v.push(x0 * (1.0f64 / x0).powf(k as f64 / n_geo as f64));
    }
    for k in 0..=n_lin {
        v.push(1.0 + (xi_max - 1.0) * k as f64 / n_lin as f64);
    }
    v
}

/// Largest theta with Re sigma(i xi A - xi^2 B + G) <= -theta xi^2/(1 + xi^2) on the grid (clamped at 0).
pub fn kawashima_margin_matrices(a: &Matrix4<f64>, b: &Matrix4<f64>, g: &Matrix4<f64>, xi: &[f64]) -> f64 {
    let mut theta = f64::INFINITY;
    for &x in xi {
        if x == 0.0 {
            continue;
        }
        let m = a.map(c) * C64::new(0.0, x) - b.map(c) * c(x * x) + g.map(c);
        let ev = eigenvalues(&nalgebra::DMatrix::from_fn(4, 4, |i, j| m[(i, j)]));
        let re = ev.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        theta = theta.min(-re * (1.0 + x * x) / (x * x));
    }
    theta.max(0.0)
}

pub fn kawashima_margin(side: Side, params: &ModelParams, pair: &EndstatePair, xi: &[f64]) -> Result<f64> {
    let (a, b, g) = endstate_symbols(side, params, pair)?;
    Ok(kawashima_margin_matrices(&a, &b, &g, xi))
}

/// Default Kawashima grid: Xi = 10 max(1, s, sigma_+-) with geometric refinement near 0.
pub fn kawashima_grid(params: &ModelParams, pair: &EndstatePair) -> Result<Vec<f64>> {
    let sm = thermo(&pair.left, params)?.sigma;
    let sp = thermo(&pair.right, params)?.sigma;
    let xi_max = 10.0 * 1f64.max(params.s).max(sm).max(sp);
    Ok(xi_grid(xi_max, 200, 2000))
}

/// Spectral projector data at an endstate: eigen-decomposition of the asymptotic matrix.
pub fn asymptotic_eig(m: &M7) -> crate::numerics::eig::Eig {
    eig(&nalgebra::DMatrix::from_fn(7, 7, |i, j| m[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::tests::small_amplitude;

    #[test]
    fn paper_form_top_left_entry() {
        let (pair, pr) = small_amplitude(0.05);
        let co = LinCoeffs::at_state(&pair.right, &pr).unwrap();
        let lam = C64::new(0.7, -0.3);
        let m = co.matrix_paper(lam);
        assert!((m[(0, 0)] - lam / pr.s).norm() < 1e-13);
        // same spectrum in both coordinates
        let mut a: Vec<f64> = asymptotic_eig(&co.matrix(lam)).values.iter().map(|v| v.re).collect();
        let mut b: Vec<f64> = asymptotic_eig(&m).values.iter().map(|v| v.re).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn normal_mode_identity() {
        let (pair, pr) = small_amplitude(0.05);
        let co = LinCoeffs::at_state(&pair.right, &pr).unwrap();
        let lam = C64::new(0.4, 1.1);
        let m = co.matrix(lam);
        let e = asymptotic_eig(&m);
        for k in 0..7 {
            let r = &nalgebra::DMatrix::from_fn(7, 7, |i, j| m[(i, j)]) * e.right.column(k) - e.right.column(k) * e.values[k];
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn dual_matrix_is_minus_s_conjugate_transpose() {
        let (pair, pr) = small_amplitude(0.05);
        let du = Vector4::new(0.01, -0.02, 0.03, 0.05);
        let co = lin_coeffs(&pair.left, &du, &pr).unwrap();
        let lam = C64::new(-0.2, 0.9);
        let s = duality_matrix(pr.s);
        let sinv = s.try_inverse().unwrap();
        let want = -(s * co.matrix(lam) * sinv).transpose();
        assert!((want - co.dual_matrix(lam)).norm() < 1e-12);
    }

    #[test]
    fn triangular_factorization_of_symbol() {
        let (pair, pr) = small_amplitude(0.05);
        for side in [Side::Minus, Side::Plus] {
            let st = if side == Side::Minus { pair.left } else { pair.right };
            let co = LinCoeffs::at_state(&st, &pr).unwrap();
            let lam = C64::new(0.3, 0.2);
            let mu = C64::new(-0.4, 0.7);
            let full = co.symbol(mu, lam).determinant();
            let fp = fluid_polynomial(&co, lam);
            let fl: C64 = fp.iter().rev().fold(C64::new(0.0, 0.0), |acc, a| acc * mu + a);
            let th = thermo(&st, &pr).unwrap();
            let d_eff = pr.dcoef / (st.tau * st.tau);
            let kphi = pr.krate * ignition(th.T, &pr).0;
            let react = mu * mu * d_eff + mu * pr.s - kphi - lam;
            assert!((full - fl * react).norm() < 1e-12 * (1.0 + full.norm()));
        }
    }

    #[test]
    fn dispersion_union_matches_eigenvalues() {
        let (pair, pr) = small_amplitude(0.05);
        for side in [Side::Minus, Side::Plus] {
            let lam = C64::new(0.25, 0.6);
            let ms = dispersion_roots(side, lam, &pr, &pair).unwrap();
            let ev = asymptotic_eigenvalues(side, lam, &pr, &pair).unwrap();
            for m in ms.mu {
                assert!(ev.iter().any(|e| (e - m).norm() < 1e-9), "{m}");
            }
        }
    }

    #[test]
    fn splitting_counts() {
        let (pair, pr) = small_amplitude(0.05);
        for side in [Side::Minus, Side::Plus] {
            assert_eq!(consistent_splitting(side, c(10.0), &pr, &pair).unwrap(), (3, 4));
            assert_eq!(consistent_splitting(side, c(1e-3), &pr, &pair).unwrap(), (3, 4));
        }
    }

    #[test]
    fn essential_spectrum_examples() {
        let (pair, pr) = small_amplitude(0.05);
        let pts = essential_spectrum(Side::Plus, &pr, &pair, &[0.0]).unwrap();
        for l in pts[0].lambda {
            assert!(l.norm() < 1e-12);
        }
        let pts = essential_spectrum(Side::Minus, &pr, &pair, &[1.0]).unwrap();
        let th = thermo(&pair.left, &pr).unwrap();
        let want = C64::new(-pr.dcoef - pr.krate * ignition(th.T, &pr).0, pr.s);
        assert!((pts[0].lambda[3] - want).norm() < 1e-14);
    }

    #[test]
    fn kawashima_positive_and_degenerate_case() {
        let (pair, pr) = small_amplitude(0.05);
        let grid = kawashima_grid(&pr, &pair).unwrap();
        for side in [Side::Minus, Side::Plus] {
            assert!(kawashima_margin(side, &pr, &pair, &grid).unwrap() > 0.0);
        }
        let (a, _, _) = endstate_symbols(Side::Plus, &pr, &pair).unwrap();
        assert_eq!(kawashima_margin_matrices(&a, &Matrix4::zeros(), &Matrix4::zeros(), &grid), 0.0);
    }
}
