//! Traveling-wave profiles: connecting orbits of the stationary equations from
//! the burned state U_- to the unburned state U_+.

use nalgebra::{Matrix4, SMatrix, Vector4};
use serde::{Deserialize, Serialize};

use crate::endstates::EndstatePair;
use crate::error::{DetonaError, Result};
use crate::model::{diffusion, diffusion_derivs, flux_jet, ignition, thermo, ModelParams, State};
use crate::numerics::banded::Banded;
use crate::numerics::ode::{dopri5, OdeOptions};

pub type W4 = Vector4<f64>;

/// The first-order traveling-wave system in w = (u, E, z, y), tau eliminated.
#[derive(Debug, Clone)]
pub struct ProfileSystem {
    pub params: ModelParams,
    pub pair: EndstatePair,
    k2: f64,
    k3: f64,
}

impl ProfileSystem {
    pub fn new(pair: &EndstatePair, params: &ModelParams) -> Result<Self> {
        let th = thermo(&pair.left, params)?;
        let l = pair.left;
        Ok(ProfileSystem {
            params: params.clone(),
            pair: *pair,
            k2: th.p - params.s * l.u,
            k3: th.p * l.u - params.s * l.E,
        })
    }

    pub fn tau_of(&self, u: f64) -> f64 {
        self.pair.left.tau - (u - self.pair.left.u) / self.params.s
    }

    pub fn state_of(&self, w: &W4) -> State {
        State::new(self.tau_of(w[0]), w[0], w[1], w[2])
    }

    pub fn w_minus(&self) -> W4 {
        let l = self.pair.left;
        W4::new(l.u, l.E, l.z, 0.0)
    }

    pub fn w_plus(&self) -> W4 {
        let r = self.pair.right;
        W4::new(r.u, r.E, r.z, 0.0)
    }

    pub fn rhs(&self, w: &W4) -> Result<W4> {
        let pr = &self.params;
        let (s, nu, kc, d, q) = (pr.s, pr.nu, pr.kappa / pr.cheat, pr.dcoef, pr.qheat);
        let (u, e_tot, z, y) = (w[0], w[1], w[2], w[3]);
        let tau = self.tau_of(u);
        if !(tau > 0.0) {
            return Err(DetonaError::NonPhysical(format!("tau = {tau}")));
        }
        let e = e_tot - 0.5 * u * u - q * z;
        if !(e > 0.0) {
            return Err(DetonaError::NonPhysical(format!("e = {e}")));
        }
        let p = pr.Gamma * e / tau;
        let du = tau / nu * (p - s * u - self.k2);
        let de = tau / kc * (p * u - s * e_tot - self.k3 + (kc / tau - d / (tau * tau)) * q * y - (nu - kc) * u * du / tau);
        let phi = ignition(e / pr.cheat, pr).0;
        let dy = tau * tau / d * (-s * y + pr.krate * phi * z) - 2.0 * du / (s * tau) * y;
        Ok(W4::new(du, de, y, dy))
    }

    /// Jacobian of `rhs` by central differences.
    pub fn jac(&self, w: &W4) -> Result<Matrix4<f64>> {
        let mut j = Matrix4::zeros();
        for k in 0..4 {
            let h = 1e-6 * (1.0 + w[k].abs());
            let mut wp = *w;
            let mut wm = *w;
            wp[k] += h;
            wm[k] -= h;
            let col = (self.rhs(&wp)? - self.rhs(&wm)?) / (2.0 * h);
            j.set_column(k, &col);
        }
        Ok(j)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOptions {
    /// Half-length of the truncated domain; None picks 30/eta0 from the endstate eigenvalues.
    pub half_length: Option<f64>,
    /// Target sup-norm defect of the interpolant.
    pub tol: f64,
    pub initial_nodes: usize,
    pub max_nodes: usize,
    pub max_newton: usize,
    /// Phase condition u(x_phase) = u_phase; None means the midpoint of u_- and u_+.
    pub u_phase: Option<f64>,
    /// Endpoint mismatch |w(+-L) - w_+-| allowed relative to the jump.
    pub end_tol: f64,
    pub max_doublings: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            half_length: None,
            tol: 5e-10,
            initial_nodes: 401,
            max_nodes: 40_000,
            max_newton: 40,
            u_phase: None,
            end_tol: 1e-8,
            max_doublings: 3,
        }
    }
}

/// Converged profile with a C^2 quintic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct Profile {
    pub sys: ProfileSystem,
    pub x: Vec<f64>,
    pub w: Vec<W4>,
    pub dw: Vec<W4>,
    pub d2w: Vec<W4>,
    pub eta0: f64,
    pub eta0_predicted: f64,
    pub decay_fit_residual: f64,
    pub residual: f64,
    pub half_length: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileSample {
    pub x: f64,
    pub tau: f64,
    pub u: f64,
    #[serde(rename = "E")]
    pub e_tot: f64,
    pub z: f64,
    pub y: f64,
    #[serde(rename = "T")]
    pub temp: f64,
    pub p: f64,
}

fn hermite5(t: f64) -> ([f64; 6], [f64; 6], [f64; 6]) {
    let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
    let v = [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        0.5 * t3 - t4 + 0.5 * t5,
    ];
    let d = [
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4,
        30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        1.5 * t2 - 4.0 * t3 + 2.5 * t4,
    ];
    let dd = [
        -60.0 * t + 180.0 * t2 - 120.0 * t3,
        -36.0 * t + 96.0 * t2 - 60.0 * t3,
        1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3,
        60.0 * t - 180.0 * t2 + 120.0 * t3,
        -24.0 * t + 84.0 * t2 - 60.0 * t3,
        3.0 * t - 12.0 * t2 + 10.0 * t3,
    ];
    (v, d, dd)
}

impl Profile {
    fn locate(&self, x: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Interpolated (w, w', w'') at x; constant endstates outside [-L, L].
    pub fn eval(&self, x: f64) -> (W4, W4, W4) {
        let n = self.x.len();
        if x <= self.x[0] {
            return if x < self.x[0] { (self.sys.w_minus(), W4::zeros(), W4::zeros()) } else { (self.w[0], self.dw[0], self.d2w[0]) };
        }
        if x >= self.x[n - 1] {
            return if x > self.x[n - 1] {
                (self.sys.w_plus(), W4::zeros(), W4::zeros())
            } else {
                (self.w[n - 1], self.dw[n - 1], self.d2w[n - 1])
            };
        }
        let i = self.locate(x);
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (v, d, dd) = hermite5(t);
        let c = [self.w[i], self.dw[i] * h, self.d2w[i] * h * h, self.w[i + 1], self.dw[i + 1] * h, self.d2w[i + 1] * h * h];
        let mut w = W4::zeros();
        let mut dw = W4::zeros();
        let mut d2w = W4::zeros();
        for k in 0..6 {
            w += c[k] * v[k];
            dw += c[k] * d[k];
            d2w += c[k] * dd[k];
        }
        (w, dw / h, d2w / (h * h))
    }

    /// Profile state U(x) and U'(x) in (tau, u, E, z) coordinates.
    pub fn state_at(&self, x: f64) -> (State, Vector4<f64>) {
        let (w, dw, _) = self.eval(x);
        let s = self.sys.params.s;
        (self.sys.state_of(&w), Vector4::new(-dw[0] / s, dw[0], dw[1], w[3]))
    }

    pub fn params(&self) -> &ModelParams {
        &self.sys.params
    }

    pub fn pair(&self) -> &EndstatePair {
        &self.sys.pair
    }

    pub fn samples(&self) -> Vec<ProfileSample> {
        self.x
            .iter()
            .zip(&self.w)
            .map(|(&x, w)| {
                let st = self.sys.state_of(w);
                let th = thermo(&st, &self.sys.params).ok();
                ProfileSample {
                    x,
                    tau: st.tau,
                    u: w[0],
                    e_tot: w[1],
                    z: w[2],
                    y: w[3],
                    temp: th.map_or(f64::NAN, |t| t.T),
                    p: th.map_or(f64::NAN, |t| t.p),
                }
            })
            .collect()
    }

    /// Sup-norm residual of the second-order stationary system -F(U)' + (B(U)U')' + G(U) = 0.
    pub fn stationary_residual(&self, per_interval: usize) -> f64 {
        let pr = &self.sys.params;
        let s = pr.s;
        let mut worst: f64 = 0.0;
        for i in 0..self.x.len() - 1 {
            for k in 0..per_interval {
                let x = self.x[i] + (self.x[i + 1] - self.x[i]) * (k as f64 + 0.5) / per_interval as f64;
                let (w, dw, d2w) = self.eval(x);
                let st = self.sys.state_of(&w);
                let du = Vector4::new(-dw[0] / s, dw[0], dw[1], dw[2]);
                let d2u = Vector4::new(-d2w[0] / s, d2w[0], d2w[1], d2w[2]);
                let Ok(jet) = flux_jet(&st, pr) else { return f64::INFINITY };
                let (bt, bu) = diffusion_derivs(&st, pr);
                let bx = bt * du[0] + bu * du[1];
                let r = -jet.dF * du + bx * du + diffusion(&st, pr) * d2u + jet.G;
                worst = worst.max(r.amax());
            }
        }
        worst
    }
}

/// Unit eigenvectors of the real 4x4 Jacobian split by real part; complex pairs enter via (Re, Im).
fn real_invariant_basis(j: &Matrix4<f64>, pick: impl Fn(f64) -> bool) -> Vec<(f64, W4)> {
    use crate::numerics::eig::eig;
    use num_complex::Complex64;
    let jc = nalgebra::DMatrix::<Complex64>::from_fn(4, 4, |a, b| Complex64::new(j[(a, b)], 0.0));
    let e = eig(&jc);
    let mut out = Vec::new();
    let mut used = [false; 4];
    for k in 0..4 {
        if used[k] || !pick(e.values[k].re) {
            continue;
        }
        used[k] = true;
        let v = e.right.column(k);
        if e.values[k].im.abs() > 1e-9 * (1.0 + e.values[k].norm()) {
            // partner
            if let Some(m) = (0..4).find(|&m| !used[m] && (e.values[m] - e.values[k].conj()).norm() < 1e-7 * (1.0 + e.values[k].norm())) {
                used[m] = true;
            }
            let re = W4::from_fn(|a, _| v[a].re);
            let im = W4::from_fn(|a, _| v[a].im);
            out.push((e.values[k].re, re.normalize()));
            out.push((e.values[k].re, im.normalize()));
        } else {
            // rotate to a real vector
            let piv = (0..4).max_by(|&a, &b| v[a].norm().partial_cmp(&v[b].norm()).unwrap()).unwrap();
            let ph = v[piv].conj() / v[piv].norm();
            let r = W4::from_fn(|a, _| (v[a] * ph).re);
            out.push((e.values[k].re, r.normalize()));
        }
    }
    out
}

/// Rows annihilating the subspace spanned by eigenvectors not selected by `pick`.
fn projection_rows(j: &Matrix4<f64>, pick: impl Fn(f64) -> bool) -> Vec<W4> {
    // left eigenvectors of J are right eigenvectors of J^T
    real_invariant_basis(&j.transpose(), pick).into_iter().map(|(_, v)| v).collect()
}

/// Endstate decay-rate prediction: slowest nonzero rate on each side, minimized.
pub fn predicted_decay(sys: &ProfileSystem) -> Result<(f64, f64)> {
    let jm = sys.jac(&sys.w_minus())?;
    let jp = sys.jac(&sys.w_plus())?;
    let scale = 1e-7 * (1.0 + jp.amax());
    let left = real_invariant_basis(&jm, |r| r > 0.0).iter().map(|(r, _)| *r).fold(f64::INFINITY, f64::min);
    let right = real_invariant_basis(&jp, |r| r < -scale).iter().map(|(r, _)| -*r).fold(f64::INFINITY, f64::min);
    Ok((left, right))
}

struct Collocation<'a> {
    sys: &'a ProfileSystem,
    x: Vec<f64>,
    phase_node: usize,
    u_phase: f64,
    left_rows: Vec<W4>,
    right_row: W4,
}

type M48 = SMatrix<f64, 4, 8>;

impl<'a> Collocation<'a> {
    fn n(&self) -> usize {
        self.x.len()
    }

    fn row_of_interval(&self, i: usize) -> usize {
        2 + 4 * i + if i >= self.phase_node { 1 } else { 0 }
    }

    fn phase_row(&self) -> usize {
        2 + 4 * self.phase_node
    }

    /// Residual and, optionally, the banded Jacobian.
    fn assemble(&self, w: &[W4], with_jac: bool) -> Result<(Vec<f64>, Option<Banded>)> {
        let n = self.n();
        let dim = 4 * n;
        let mut r = vec![0.0; dim];
        let mut jac = if with_jac { Some(Banded::zeros(dim, 6, 5)) } else { None };
        let f: Vec<W4> = w.iter().map(|wi| self.sys.rhs(wi)).collect::<Result<_>>()?;
        let jf: Vec<Matrix4<f64>> = if with_jac { w.iter().map(|wi| self.sys.jac(wi)).collect::<Result<_>>()? } else { vec![] };
        let wm = self.sys.w_minus();
        for (k, l) in self.left_rows.iter().enumerate() {
            r[k] = l.dot(&(w[0] - wm));
            if let Some(b) = jac.as_mut() {
                for c in 0..4 {
                    b.add(k, c, l[c]);
                }
            }
        }
        for i in 0..n - 1 {
            let h = self.x[i + 1] - self.x[i];
            let wmid = (w[i] + w[i + 1]) * 0.5 + (f[i] - f[i + 1]) * (h / 8.0);
            let fmid = self.sys.rhs(&wmid)?;
            let res = w[i + 1] - w[i] - (f[i] + fmid * 4.0 + f[i + 1]) * (h / 6.0);
            let row = self.row_of_interval(i);
            for a in 0..4 {
                r[row + a] = res[a];
            }
            if let Some(b) = jac.as_mut() {
                let jm = self.sys.jac(&wmid)?;
                let id = Matrix4::<f64>::identity();
                let dl = -id - (jf[i] + jm * 4.0 * (id * 0.5 + jf[i] * (h / 8.0))) * (h / 6.0);
                let dr = id - (jf[i + 1] + jm * 4.0 * (id * 0.5 - jf[i + 1] * (h / 8.0))) * (h / 6.0);
                let mut blk = M48::zeros();
                blk.fixed_view_mut::<4, 4>(0, 0).copy_from(&dl);
                blk.fixed_view_mut::<4, 4>(0, 4).copy_from(&dr);
                for a in 0..4 {
                    for c in 0..8 {
                        b.add(row + a, 4 * i + c, blk[(a, c)]);
                    }
                }
            }
        }
        let pr = self.phase_row();
        r[pr] = w[self.phase_node][0] - self.u_phase;
        let wp = self.sys.w_plus();
        r[dim - 1] = self.right_row.dot(&(w[n - 1] - wp));
        if let Some(b) = jac.as_mut() {
            b.add(pr, 4 * self.phase_node, 1.0);
            for c in 0..4 {
                b.add(dim - 1, 4 * (n - 1) + c, self.right_row[c]);
            }
        }
        Ok((r, jac))
    }

    fn newton(&self, w: &mut Vec<W4>, max_iter: usize) -> Result<usize> {
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let (mut r, _) = self.assemble(w, false)?;
        let mut rn = norm(&r);
        for it in 0..max_iter {
            if rn < 1e-13 {
                return Ok(it);
            }
            let (_, jac) = self.assemble(w, true)?;
            let mut jac = jac.unwrap();
            if !jac.factor() {
                return Err(DetonaError::NoConvergence("singular collocation Jacobian".into()));
            }
            let mut dx = r.clone();
            jac.solve(&mut dx);
            let step_norm = norm(&dx);
            let mut lam = 1.0;
            let mut accepted = false;
            while lam > 1e-4 {
                let trial: Vec<W4> = w
                    .iter()
                    .enumerate()
                    .map(|(i, wi)| wi - W4::new(dx[4 * i], dx[4 * i + 1], dx[4 * i + 2], dx[4 * i + 3]) * lam)
                    .collect();
                if let Ok((rt, _)) = self.assemble(&trial, false) {
                    let tn = norm(&rt);
                    if tn < (1.0 - 0.25 * lam) * rn || (lam == 1.0 && tn < 1e-11) {
                        *w = trial;
                        r = rt;
                        rn = tn;
                        accepted = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !accepted {
                return Err(DetonaError::NoConvergence(format!("line search failed at iteration {it}, residual {rn:e}")));
            }
            let scale = w.iter().fold(1.0f64, |a, v| a.max(v.amax()));
            if lam == 1.0 && step_norm < 1e-12 * scale {
                return Ok(it + 1);
            }
        }
        if rn < 1e-9 {
            Ok(max_iter)
        } else {
            Err(DetonaError::NoConvergence(format!("Newton stalled, residual {rn:e}")))
        }
    }
}

fn build_profile(sys: &ProfileSystem, x: Vec<f64>, w: Vec<W4>, iters: usize) -> Result<Profile> {
    let dw: Vec<W4> = w.iter().map(|wi| sys.rhs(wi)).collect::<Result<_>>()?;
    let d2w: Vec<W4> = w.iter().zip(&dw).map(|(wi, fi)| Ok(sys.jac(wi)? * fi)).collect::<Result<_>>()?;
    let half = x[x.len() - 1];
    Ok(Profile {
        sys: sys.clone(),
        x,
        w,
        dw,
        d2w,
        eta0: f64::NAN,
        eta0_predicted: f64::NAN,
        decay_fit_residual: f64::NAN,
        residual: f64::NAN,
        half_length: half,
        newton_iterations: iters,
    })
}

/// Per-interval sup defect |s' - f(s)| of the interpolant at interior points.
fn interval_defects(p: &Profile) -> Vec<f64> {
    const TS: [f64; 4] = [0.1127016653792583, 0.3, 0.7, 0.8872983346207417];
    (0..p.x.len() - 1)
        .map(|i| {
            let h = p.x[i + 1] - p.x[i];
            TS.iter()
                .map(|t| {
                    let (w, dw, _) = p.eval(p.x[i] + t * h);
                    match p.sys.rhs(&w) {
                        Ok(f) => (dw - f).amax(),
                        Err(_) => f64::INFINITY,
                    }
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

fn defect_scale(p: &Profile) -> f64 {
    p.dw.iter().fold(1.0f64, |a, v| a.max(v.amax()))
}

fn initial_guess(sys: &ProfileSystem, x: &[f64], width: f64) -> Vec<W4> {
    let (wm, wp) = (sys.w_minus(), sys.w_plus());
    x.iter()
        .map(|&xi| {
            let th = 0.5 * (1.0 + (xi / width).tanh());
            let dth = 0.5 / width / (xi / width).cosh().powi(2);
            let mut w = wm + (wp - wm) * th;
            w[3] = (wp[2] - wm[2]) * dth;
            w
        })
        .collect()
}

fn decay_fit(p: &Profile) -> (f64, f64, f64) {
    // least-squares slope of log|w - w_end| on the outer thirds
    let (wm, wp) = (p.sys.w_minus(), p.sys.w_plus());
    let l = p.half_length;
    let fit = |sel: &dyn Fn(f64) -> bool, end: &W4| -> (f64, f64) {
        let pts: Vec<(f64, f64)> = p
            .x
            .iter()
            .zip(&p.w)
            .filter(|(x, _)| sel(**x))
            .map(|(x, w)| (x.abs(), (w - end).amax()))
            .filter(|(_, d)| *d > 1e-13)
            .map(|(x, d)| (x, d.ln()))
            .collect();
        if pts.len() < 3 {
            return (f64::NAN, f64::NAN);
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        // relative misfit of the exponential model
        let ms = pts.iter().map(|p| ((my + slope * (p.0 - mx)) - p.1).powi(2)).sum::<f64>() / n;
        (-slope, ms.sqrt().exp() - 1.0)
    };
    let (rl, ml) = fit(&|x| x <= -l / 3.0, &wm);
    let (rr, mr) = fit(&|x| x >= l / 3.0, &wp);
    let (eta, mis) = if rl.is_nan() || (rr.is_finite() && rr < rl) { (rr, mr) } else { (rl, ml) };
    (eta, mis, rl.min(rr))
}

fn solve_on(sys: &ProfileSystem, half: f64, opts: &ProfileOptions, guess: Option<&Profile>) -> Result<Profile> {
    let jm = sys.jac(&sys.w_minus())?;
    let jp = sys.jac(&sys.w_plus())?;
    let left_rows = projection_rows(&jm, |r| r < 0.0);
    let zero_tol = 1e-6 * (1.0 + jp.amax());
    let right_rows = projection_rows(&jp, |r| r.abs() <= zero_tol);
    if left_rows.len() != 2 || right_rows.len() != 1 {
        return Err(DetonaError::NoConvergence(format!(
            "endpoint splitting: {} stable directions at U_-, {} center directions at U_+",
            left_rows.len(),
            right_rows.len()
        )));
    }
    let (wm, wp) = (sys.w_minus(), sys.w_plus());
    let u_phase = opts.u_phase.unwrap_or(0.5 * (wm[0] + wp[0]));

    let n0 = opts.initial_nodes.max(11) | 1;
    let mut x: Vec<f64> = (0..n0).map(|i| -half + 2.0 * half * i as f64 / (n0 - 1) as f64).collect();
    let mut w: Vec<W4> = match guess {
        Some(g) => x.iter().map(|&xi| g.eval(xi).0).collect(),
        None => {
            let (rl, rr) = predicted_decay(sys)?;
            initial_guess(sys, &x, 1.0 / rl.min(rr).max(1e-3))
        }
    };
    let mut total_iters = 0;
    for _round in 0..20 {
        let phase_node = x.iter().position(|v| v.abs() < 1e-14).expect("x = 0 is a node");
        let col = Collocation { sys, x: x.clone(), phase_node, u_phase, left_rows: left_rows.clone(), right_row: right_rows[0] };
        total_iters += col.newton(&mut w, opts.max_newton)?;
        let prof = build_profile(sys, x.clone(), w.clone(), total_iters)?;
        let defects = interval_defects(&prof);
        let target = opts.tol * defect_scale(&prof);
        let worst = defects.iter().cloned().fold(0.0, f64::max);
        if worst <= target {
            return Ok(prof);
        }
        // split intervals with large defect
        let mut nx = vec![x[0]];
        for i in 0..x.len() - 1 {
            let ratio = defects[i] / target;
            let m = if ratio > 1.0 { (ratio.powf(0.25) * 1.3).ceil().clamp(2.0, 8.0) as usize } else { 1 };
            let h = (x[i + 1] - x[i]) / m as f64;
            for k in 1..m {
                nx.push(x[i] + h * k as f64);
            }
            nx.push(x[i + 1]);
        }
        if nx.len() > opts.max_nodes {
            return Err(DetonaError::NoConvergence(format!("mesh exceeds {} nodes (defect {worst:e})", opts.max_nodes)));
        }
        w = nx.iter().map(|&xi| prof.eval(xi).0).collect();
        x = nx;
    }
    Err(DetonaError::NoConvergence("mesh refinement did not converge".into()))
}

/// Solve the profile BVP with projection boundary conditions and a phase condition.
pub fn solve_profile(pair: &EndstatePair, params: &ModelParams, opts: &ProfileOptions, guess: Option<&Profile>) -> Result<Profile> {
    let sys = ProfileSystem::new(pair, params)?;
    let (rl, rr) = predicted_decay(&sys)?;
    let eta_pred = rl.min(rr);
    let mut half = opts.half_length.unwrap_or(30.0 / eta_pred);
    let jump = (sys.w_plus() - sys.w_minus()).amax();
    for _ in 0..=opts.max_doublings {
        let mut prof = solve_on(&sys, half, opts, guess)?;
        let n = prof.x.len();
        let mismatch = (prof.w[0] - sys.w_minus()).amax().max((prof.w[n - 1] - sys.w_plus()).amax());
        if mismatch <= opts.end_tol * jump {
            let defects = interval_defects(&prof);
            prof.residual = defects.iter().cloned().fold(0.0, f64::max) / defect_scale(&prof);
            let (eta, mis, _) = decay_fit(&prof);
            prof.eta0 = eta;
            prof.decay_fit_residual = mis;
            prof.eta0_predicted = eta_pred;
            return Ok(prof);
        }
        if opts.half_length.is_some() && opts.max_doublings == 0 {
            return Err(DetonaError::TruncationTooShort(mismatch));
        }
        half *= 2.0;
    }
    Err(DetonaError::TruncationTooShort(f64::NAN))
}

/// Natural-parameter continuation: re-solve RH and the profile along `values` of `name`.
pub fn continue_profile(
    start: &Profile,
    name: &str,
    values: &[f64],
    right_for: &dyn Fn(&ModelParams) -> Result<EndstatePair>,
    opts: &ProfileOptions,
) -> Result<Vec<Profile>> {
    let mut out = Vec::new();
    let mut prev = start.clone();
    for &v in values {
        let mut pr = prev.sys.params.clone();
        pr.set(name, v)?;
        let pair = right_for(&pr)?;
        let next = solve_profile(&pair, &pr, opts, Some(&prev))?;
        out.push(next.clone());
        prev = next;
    }
    Ok(out)
}

/// Independent fluid-only profile for q = 0 by shooting along the unstable manifold of U_-.
/// Returns (u, E) at the requested abscissas, with the same phase condition.
pub fn shoot_fluid_profile(pair: &EndstatePair, params: &ModelParams, xs: &[f64]) -> Result<Vec<(f64, f64)>> {
    let sys = ProfileSystem::new(pair, params)?;
    if params.qheat != 0.0 {
        return Err(DetonaError::NoConvergence("fluid shooting requires q = 0".into()));
    }
    let f2 = |w: &[f64]| -> Result<[f64; 2]> {
        let r = sys.rhs(&W4::new(w[0], w[1], 0.0, 0.0))?;
        Ok([r[0], r[1]])
    };
    // 2x2 fluid Jacobian at U_-
    let wm = sys.w_minus();
    let h = 1e-7;
    let mut j = nalgebra::Matrix2::<f64>::zeros();
    for k in 0..2 {
        let mut p = [wm[0], wm[1]];
        let mut m = p;
        p[k] += h;
        m[k] -= h;
        let (fp, fm) = (f2(&p)?, f2(&m)?);
        j[(0, k)] = (fp[0] - fm[0]) / (2.0 * h);
        j[(1, k)] = (fp[1] - fm[1]) / (2.0 * h);
    }
    let ev = j.complex_eigenvalues();
    let mu = if ev[0].re > ev[1].re { ev[0].re } else { ev[1].re };
    // eigenvector of [[a,b],[c,d]] for mu: (b, mu - a)
    let mut r = nalgebra::Vector2::new(j[(0, 1)], mu - j[(0, 0)]);
    if r.norm() < 1e-14 {
        r = nalgebra::Vector2::new(mu - j[(1, 1)], j[(1, 0)]);
    }
    r = r.normalize();
    let wp = sys.w_plus();
    if r[0] * (wp[0] - wm[0]) < 0.0 {
        r = -r;
    }
    let u_mid = 0.5 * (wm[0] + wp[0]);
    // far enough from U_- that the right-hand side is not dominated by cancellation
    let eps = 1e-6 * (1.0 + (wp[0] - wm[0]).abs());
    let start = [wm[0] + eps * r[0], wm[1] + eps * r[1]];
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15, ..Default::default() };
    // with u as the independent variable, the x-distance from the start point to the phase level
    let mut y = vec![0.0, start[1]];
    let mut err = None;
    let quad = OdeOptions { rtol: 1e-10, atol: 1e-10, ..Default::default() };
    dopri5(
        |u, y, d| match f2(&[u, y[1]]) {
            Ok(r) => {
                d[0] = 1.0 / r[0];
                d[1] = r[1] / r[0];
            }
            Err(e) => {
                err = Some(e);
                d[0] = 0.0;
                d[1] = 0.0;
            }
        },
        start[0],
        u_mid,
        &mut y,
        &quad,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    // forward in x from the start point: the orbit leaves the saddle at U_- and is attracted at U_+
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![(f64::NAN, f64::NAN); xs.len()];
    let rhs = |_: f64, y: &[f64], d: &mut [f64]| {
        if let Ok(r) = f2(y) {
            d[0] = r[0];
            d[1] = r[1];
        } else {
            d[0] = f64::NAN;
            d[1] = f64::NAN;
        }
    };
    let mut x0 = -y[0];
    let mut w = vec![start[0], start[1]];
    for i in order {
        if xs[i] < x0 {
            // closer to U_- than the start point: the linear approximation is exact to O(eps^2)
            let decay = (mu * (xs[i] - x0)).exp();
            out[i] = (wm[0] + (w[0] - wm[0]) * decay, wm[1] + (w[1] - wm[1]) * decay);
            continue;
        }
        dopri5(rhs, x0, xs[i], &mut w, &opts)?;
        x0 = xs[i];
        out[i] = (w[0], w[1]);
    }
    Ok(out)
}

/// Translation-invariant Wronskian of the linearized traveling-wave ODE.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Transversality {
    /// Translation-invariant coefficient (sign carries orientation).
    pub gamma: f64,
    /// Raw Wronskian det(W1-, W2-, W_a+, W_b+) at x = 0.
    pub wronskian0: f64,
    /// Sine-type conditioning of the 2-form pairing at x = 0.
    pub conditioning: f64,
}

/// Minimal exterior-algebra helpers on R^4 used for the 2-form Wronskian.
mod wedge4 {
    pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

    pub fn wedge(a: &[f64; 4], b: &[f64; 4]) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            out[k] = a[i] * b[j] - a[j] * b[i];
        }
        out
    }

    /// alpha ^ beta for two 2-forms as the coefficient of e0^e1^e2^e3.
    pub fn pair(a: &[f64; 6], b: &[f64; 6]) -> f64 {
        // complements: (01|23)+, (02|13)-, (03|12)+, (12|03)+, (13|02)-, (23|01)+
        a[0] * b[5] - a[1] * b[4] + a[2] * b[3] + a[3] * b[2] - a[4] * b[1] + a[5] * b[0]
    }

    /// Induced action of J on 2-forms.
    pub fn compound(j: &nalgebra::Matrix4<f64>) -> nalgebra::Matrix6<f64> {
        let mut m = nalgebra::Matrix6::zeros();
        for (c, &(p, q)) in PAIRS.iter().enumerate() {
            // image of e_p ^ e_q is (J e_p) ^ e_q + e_p ^ (J e_q)
            let mut ep = [0.0; 4];
            let mut eq = [0.0; 4];
            ep[p] = 1.0;
            eq[q] = 1.0;
            let jp: [f64; 4] = std::array::from_fn(|i| j[(i, p)]);
            let jq: [f64; 4] = std::array::from_fn(|i| j[(i, q)]);
            let a = wedge(&jp, &eq);
            let b = wedge(&ep, &jq);
            for r in 0..6 {
                m[(r, c)] = a[r] + b[r];
            }
        }
        m
    }
}

pub fn transversality_gamma(profile: &Profile) -> Result<Transversality> {
    let sys = &profile.sys;
    let jm = sys.jac(&sys.w_minus())?;
    let jp = sys.jac(&sys.w_plus())?;
    let zero_tol = 1e-6 * (1.0 + jp.amax());
    let unst = real_invariant_basis(&jm, |r| r > 0.0);
    let mut stab = real_invariant_basis(&jp, |r| r < -zero_tol);
    if unst.len() != 2 || stab.len() != 3 {
        return Err(DetonaError::IllConditioned(format!("splitting {}+{}", unst.len(), stab.len())));
    }
    // drop the slowest stable mode, the one carrying the profile tail
    stab.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let stab = &stab[1..];
    let to4 = |v: &W4| [v[0], v[1], v[2], v[3]];
    let zm0 = wedge4::wedge(&to4(&unst[0].1), &to4(&unst[1].1));
    let zp0 = wedge4::wedge(&to4(&stab[0].1), &to4(&stab[1].1));
    let nrm = |z: &[f64; 6]| z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm(&zm0) < 1e-10 || nrm(&zp0) < 1e-10 {
        return Err(DetonaError::IllConditioned("degenerate endpoint basis".into()));
    }
    let sum_m = unst[0].0 + unst[1].0;
    let sum_p = stab[0].0 + stab[1].0;
    let l = profile.half_length;
    let opts = OdeOptions { rtol: 1e-11, atol: 1e-14, ..Default::default() };
    let integrate = |z0: [f64; 6], from: f64, shift: f64| -> Result<[f64; 6]> {
        let mut y = z0.to_vec();
        dopri5(
            |x, y, d| {
                let (w, _, _) = profile.eval(x);
                let j = sys.jac(&w).unwrap_or_else(|_| Matrix4::from_element(f64::NAN));
                let c = wedge4::compound(&j);
                let v = nalgebra::Vector6::from_column_slice(y);
                let r = c * v - v * shift;
                d.copy_from_slice(r.as_slice());
            },
            from,
            0.0,
            &mut y,
            &opts,
        )?;
        Ok(std::array::from_fn(|i| y[i]))
    };
    let zm = integrate(zm0, -l, sum_m)?;
    let zp = integrate(zp0, l, sum_p)?;
    let w0 = wedge4::pair(&zm, &zp);
    let conditioning = w0.abs() / (nrm(&zm) * nrm(&zp));

    // Abel factors: int_{-L}^0 (tr J - tr J_-) and int_0^L (tr J - tr J_+)
    let trm = jm.trace();
    let trp = jp.trace();
    let mut im = 0.0;
    let mut ip = 0.0;
    for i in 0..profile.x.len() - 1 {
        let (a, b) = (profile.x[i], profile.x[i + 1]);
        let g = |x: f64| -> f64 { sys.jac(&profile.eval(x).0).map(|j| j.trace()).unwrap_or(f64::NAN) };
        // Simpson on each mesh interval
        let integral = |t0: f64| (b - a) / 6.0 * ((g(a) - t0) + 4.0 * (g(0.5 * (a + b)) - t0) + (g(b) - t0));
        if b <= 0.0 {
            im += integral(trm);
        } else {
            ip += integral(trp);
        }
    }
    let sigma = sum_m + sum_p;
    let (alpha, beta) = if (trp - trm).abs() > 1e-12 {
        ((trp - sigma) / (trp - trm), (sigma - trm) / (trp - trm))
    } else {
        (0.5, 0.5)
    };
    let log_gamma = w0.abs().ln() - alpha * im + beta * ip;
    Ok(Transversality { gamma: w0.signum() * log_gamma.exp(), wronskian0: w0, conditioning })
}
