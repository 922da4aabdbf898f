//! Finite-volume time integration of the reactive system in the traveling frame.
//!
//! Local Lax-Friedrichs convective flux on MUSCL-reconstructed states, central
//! differences for the viscous term, pointwise reaction and Heun's RK2 in time.

use std::io::Write;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{DetonaError, Result};
use crate::model::{diffusion, ignition, thermo, ModelParams, State};
use crate::profile::Profile;

type V4 = Vector4<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limiter {
    None,
    Minmod,
    VanLeer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub cells: usize,
    /// Half-width of the domain; None uses the profile's truncation length.
    pub half_length: Option<f64>,
    pub cfl: f64,
    pub diffusion_number: f64,
    /// Sponge width as a fraction of the domain, on each side.
    pub sponge_width: f64,
    pub sponge_rate: f64,
    pub limiter: Limiter,
    /// Steps between diagnostic rows; 0 picks about 400 rows.
    pub record_stride: usize,
    /// Rows between snapshots; 0 disables snapshots.
    pub snapshot_stride: usize,
    /// Test harness: anti-damping rate applied near the front.
    pub injected_growth: f64,
    pub injected_width: f64,
    /// Time the unperturbed profile is run before the perturbation is added.
    pub relax_time: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            cells: 1024,
            half_length: None,
            cfl: 0.4,
            diffusion_number: 0.25,
            sponge_width: 0.1,
            sponge_rate: 1.0,
            limiter: Limiter::VanLeer,
            record_stride: 0,
            snapshot_stride: 0,
            injected_growth: 0.0,
            injected_width: 5.0,
            relax_time: 100.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub x: Vec<f64>,
    pub h: f64,
    pub u: Vec<V4>,
    pub t: f64,
    pub left: V4,
    pub right: V4,
    /// Relaxation rate toward the endstates per cell.
    pub sponge: Vec<f64>,
    /// Anti-damping rate per cell toward `reference`.
    pub injected: Vec<f64>,
    pub reference: Vec<V4>,
    /// Time integral of boundary inflow plus all sources, per component.
    pub budget: V4,
}

impl SimState {
    /// Uniform grid on [-l, l] with cell values from `init`.
    pub fn new(cells: usize, l: f64, left: V4, right: V4, init: impl Fn(f64) -> V4) -> Self {
        let h = 2.0 * l / cells as f64;
        let x: Vec<f64> = (0..cells).map(|i| -l + (i as f64 + 0.5) * h).collect();
        let u: Vec<V4> = x.iter().map(|&x| init(x)).collect();
        SimState {
            reference: u.clone(),
            x,
            h,
            u,
            t: 0.0,
            left,
            right,
            sponge: vec![0.0; cells],
            injected: vec![0.0; cells],
            budget: V4::zeros(),
        }
    }

    pub fn mass(&self) -> V4 {
        self.u.iter().sum::<V4>() * self.h
    }

    /// Sponge rate ramping quadratically from 0 to `rate` over the outer `width` fraction.
    pub fn set_sponge(&mut self, width: f64, rate: f64) {
        let l = self.x.len() as f64 * self.h / 2.0;
        let w = width * 2.0 * l;
        for (i, &x) in self.x.iter().enumerate() {
            let d = l - x.abs();
            self.sponge[i] = if w > 0.0 && d < w { rate * (1.0 - d / w).powi(2) } else { 0.0 };
        }
    }
}

fn to_state(v: &V4) -> State {
    State::new(v[0], v[1], v[2], v[3])
}

struct Point {
    flux: V4,
    speed: f64,
}

fn point(v: &V4, params: &ModelParams) -> Result<Point> {
    let st = to_state(v);
    let th = thermo(&st, params)?;
    let s = params.s;
    let f = V4::new(-st.u - s * st.tau, th.p - s * st.u, th.p * st.u - s * st.E, -s * st.z);
    Ok(Point { flux: f, speed: s.abs() + th.sigma })
}

fn reaction(v: &V4, params: &ModelParams) -> Result<V4> {
    let th = thermo(&to_state(v), params)?;
    let (phi, _) = ignition(th.T, params);
    Ok(V4::new(0.0, 0.0, 0.0, -params.krate * phi * v[3]))
}

fn limited(a: f64, b: f64, lim: Limiter) -> f64 {
    match lim {
        Limiter::None => 0.5 * (a + b),
        Limiter::Minmod => {
            if a * b <= 0.0 {
                0.0
            } else if a.abs() < b.abs() {
                a
            } else {
                b
            }
        }
        Limiter::VanLeer => {
            if a * b <= 0.0 {
                0.0
            } else {
                2.0 * a * b / (a + b)
            }
        }
    }
}

/// Largest stable step for the current state.
pub fn stable_dt(state: &SimState, params: &ModelParams, opts: &SimOptions) -> Result<f64> {
    let (mut speed, mut diff): (f64, f64) = (0.0, 0.0);
    for v in &state.u {
        let p = point(v, params)?;
        speed = speed.max(p.speed);
        let t = v[0];
        diff = diff.max(params.nu / t).max(params.kappa / (params.cheat * t)).max(params.dcoef / (t * t));
    }
    let h = state.h;
    let mut dt = opts.cfl * h / speed;
    if diff > 0.0 {
        dt = dt.min(opts.diffusion_number * h * h / diff);
    }
    Ok(dt)
}

type Ghost<'a> = &'a dyn Fn(f64, f64) -> V4;
type Source<'a> = &'a dyn Fn(f64, f64) -> V4;

/// Semi-discrete right-hand side and the rate of change of the budget.
fn rhs(st: &SimState, u: &[V4], t: f64, params: &ModelParams, lim: Limiter, ghost: Ghost, source: Option<Source>) -> Result<(Vec<V4>, V4)> {
    let n = u.len();
    let h = st.h;
    // two ghost cells on each side
    let mut ext = Vec::with_capacity(n + 4);
    for k in [2.0, 1.0] {
        let x = st.x[0] - k * h;
        ext.push(ghost(x, t));
    }
    ext.extend_from_slice(u);
    for k in [1.0, 2.0] {
        let x = st.x[n - 1] + k * h;
        ext.push(ghost(x, t));
    }
    let m = ext.len();
    let mut slope = vec![V4::zeros(); m];
    for i in 1..m - 1 {
        for c in 0..4 {
            slope[i][c] = limited(ext[i][c] - ext[i - 1][c], ext[i + 1][c] - ext[i][c], lim);
        }
    }
    // interface j sits between ext[j + 1] and ext[j + 2], j = 0..=n
    let mut phi = vec![V4::zeros(); n + 1];
    for (j, out) in phi.iter_mut().enumerate() {
        let (a, b) = (j + 1, j + 2);
        let ul = ext[a] + 0.5 * slope[a];
        let ur = ext[b] - 0.5 * slope[b];
        let (pl, pr) = (point(&ul, params)?, point(&ur, params)?);
        let lf = 0.5 * (pl.flux + pr.flux) - 0.5 * pl.speed.max(pr.speed) * (ur - ul);
        let mid = 0.5 * (ext[a] + ext[b]);
        let visc = diffusion(&to_state(&mid), params) * (ext[b] - ext[a]) / h;
        *out = lf - visc;
    }
    let mut du = vec![V4::zeros(); n];
    let mut src_total = V4::zeros();
    for i in 0..n {
        let mut s = reaction(&u[i], params)?;
        if st.sponge[i] != 0.0 {
            let target = if st.x[i] < 0.0 { st.left } else { st.right };
            s -= st.sponge[i] * (u[i] - target);
        }
        if st.injected[i] != 0.0 {
            s += st.injected[i] * (u[i] - st.reference[i]);
        }
        if let Some(f) = source {
            s += f(st.x[i], t);
        }
        src_total += s;
        du[i] = -(phi[i + 1] - phi[i]) / h + s;
    }
    Ok((du, phi[0] - phi[n] + src_total * h))
}

fn check_physical(u: &[V4], params: &ModelParams) -> Result<()> {
    for v in u {
        thermo(&to_state(v), params)?;
    }
    Ok(())
}

fn advance(st: &mut SimState, params: &ModelParams, dt: f64, lim: Limiter, ghost: Ghost, source: Option<Source>) -> Result<()> {
    let t = st.t;
    let (k1, b1) = rhs(st, &st.u, t, params, lim, ghost, source)?;
    let u1: Vec<V4> = st.u.iter().zip(&k1).map(|(u, k)| u + dt * k).collect();
    check_physical(&u1, params)?;
    let (k2, b2) = rhs(st, &u1, t + dt, params, lim, ghost, source)?;
    for i in 0..st.u.len() {
        st.u[i] = 0.5 * (st.u[i] + u1[i] + dt * k2[i]);
    }
    check_physical(&st.u, params)?;
    st.budget += 0.5 * dt * (b1 + b2);
    st.t += dt;
    Ok(())
}

/// One RK2 step with endstate ghost cells; rejects steps above the stability limit.
pub fn step(st: &mut SimState, params: &ModelParams, dt: f64, opts: &SimOptions) -> Result<()> {
    let limit = stable_dt(st, params, opts)?;
    if dt > limit * (1.0 + 1e-12) {
        return Err(DetonaError::CflViolation { dt, limit });
    }
    let (l, r) = (st.left, st.right);
    let ghost = move |x: f64, _t: f64| if x < 0.0 { l } else { r };
    advance(st, params, dt, opts.limiter, &ghost, None)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    /// Amplitude relative to the endstate jump of each component.
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec { amplitude: 1e-3, center: 0.0, width: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeRow {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub delta: f64,
    pub mass_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeSeries {
    pub rows: Vec<TimeRow>,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub dt: f64,
    pub h: f64,
    /// Time at which norms exceeded ten jumps or the state left the physical set.
    pub blowup: Option<f64>,
}

/// Profile plus the relaxation correction of the discrete scheme, translatable in x.
struct Reference<'a> {
    profile: &'a Profile,
    x0: f64,
    h: f64,
    corr: Vec<V4>,
}

impl Reference<'_> {
    fn at(&self, x: f64) -> V4 {
        let base = self.profile.state_at(x).0.to_vec();
        if self.corr.is_empty() {
            return base;
        }
        let n = self.corr.len();
        let r = ((x - self.x0) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (r.floor() as usize).min(n - 2);
        let f = r - i as f64;
        base + self.corr[i] * (1.0 - f) + self.corr[i + 1] * f
    }

    fn distance2(&self, st: &SimState, delta: f64) -> f64 {
        st.x.iter().zip(&st.u).map(|(&x, u)| (u - self.at(x - delta)).norm_squared()).sum()
    }

    /// Golden-section minimization of the L2 distance to translates on [a, b].
    fn best_shift(&self, st: &SimState, a: f64, b: f64) -> f64 {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (a, b);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.distance2(st, c), self.distance2(st, d));
        while (b - a).abs() > 1e-9 * st.h {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.distance2(st, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.distance2(st, d);
            }
        }
        0.5 * (a + b)
    }

    fn norms(&self, st: &SimState, delta: f64) -> (f64, f64) {
        let mut l2 = 0.0;
        let mut linf: f64 = 0.0;
        for (&x, u) in st.x.iter().zip(&st.u) {
            let d = u - self.at(x - delta);
            l2 += d.norm_squared();
            linf = linf.max(d.amax());
        }
        ((l2 * st.h).sqrt(), linf)
    }
}

/// Cell values of the profile on the simulation grid, with sponges set.
pub fn profile_state(profile: &Profile, opts: &SimOptions) -> SimState {
    let l = opts.half_length.unwrap_or(profile.half_length);
    let pair = profile.pair();
    let mut st = SimState::new(opts.cells, l, pair.left.to_vec(), pair.right.to_vec(), |x| profile.state_at(x).0.to_vec());
    st.set_sponge(opts.sponge_width, opts.sponge_rate);
    st
}

fn integrate_to(st: &mut SimState, params: &ModelParams, t_end: f64, opts: &SimOptions) -> Result<usize> {
    let mut k = 0;
    while st.t < t_end {
        let dt = (0.95 * stable_dt(st, params, opts)?).min(t_end - st.t);
        step(st, params, dt, opts)?;
        k += 1;
    }
    Ok(k)
}

/// Relax the unperturbed profile, add a compactly supported cos^2 bump and integrate to t_final.
pub fn run_perturbation(profile: &Profile, spec: &PerturbationSpec, t_final: f64, opts: &SimOptions) -> Result<TimeSeries> {
    let params = profile.params();
    let jump = profile.pair().right.to_vec() - profile.pair().left.to_vec();
    if spec.amplitude.abs() > 1e-2 {
        return Err(DetonaError::ConstraintViolated(format!("perturbation amplitude {} exceeds 1e-2", spec.amplitude)));
    }
    let mut st = profile_state(profile, opts);
    let mut reference = Reference { profile, x0: st.x[0], h: st.h, corr: Vec::new() };
    if opts.relax_time > 0.0 {
        integrate_to(&mut st, params, opts.relax_time, opts)?;
        reference.corr = st.x.iter().zip(&st.u).map(|(&x, u)| u - profile.state_at(x).0.to_vec()).collect();
        st.t = 0.0;
        st.budget = V4::zeros();
    }
    st.reference = st.u.clone();
    if opts.injected_growth != 0.0 {
        for (i, &x) in st.x.iter().enumerate() {
            st.injected[i] = opts.injected_growth * (-(x / opts.injected_width).powi(2)).exp();
        }
    }
    for (i, &x) in st.x.iter().enumerate() {
        let r = (x - spec.center) / spec.width;
        if r.abs() < 1.0 {
            let b = (0.5 * std::f64::consts::PI * r).cos().powi(2);
            for c in 0..3 {
                st.u[i][c] += spec.amplitude * jump[c].abs() * b;
            }
        }
    }
    check_physical(&st.u, params)?;
    let dt0 = stable_dt(&st, params, opts)?;
    let stride = if opts.record_stride > 0 { opts.record_stride } else { ((t_final / dt0) as usize / 400).max(1) };
    let m0 = st.mass();
    let m0n = m0.fixed_rows::<3>(0).norm();
    let jump_size = jump.amax();
    let mut series = TimeSeries { rows: Vec::new(), snapshots: Vec::new(), steps: 0, dt: dt0, h: st.h, blowup: None };
    let mut delta = reference.best_shift(&st, -2.0 * st.h, 2.0 * st.h);
    let record = |st: &SimState, delta: f64, series: &mut TimeSeries| {
        let (l2, linf) = reference.norms(st, delta);
        let defect = (st.mass() - m0 - st.budget).fixed_rows::<3>(0).norm() / m0n;
        series.rows.push(TimeRow { t: st.t, l2, linf, delta, mass_defect: defect });
        if opts.snapshot_stride > 0 && (series.rows.len() - 1) % opts.snapshot_stride == 0 {
            series.snapshots.push(Snapshot { t: st.t, x: st.x.clone(), u: st.u.iter().map(|v| [v[0], v[1], v[2], v[3]]).collect() });
        }
        linf
    };
    record(&st, delta, &mut series);
    let mut k = 0;
    while st.t < t_final {
        let dt = match stable_dt(&st, params, opts) {
            // a collapsing step means the state is leaving the physical set
            Ok(d) if d < 1e-3 * dt0 => {
                series.blowup = Some(st.t);
                break;
            }
            Ok(d) => (0.95 * d).min(t_final - st.t),
            Err(DetonaError::NonPhysical(_)) => {
                series.blowup = Some(st.t);
                break;
            }
            Err(e) => return Err(e),
        };
        match step(&mut st, params, dt, opts) {
            Ok(()) => {}
            Err(DetonaError::NonPhysical(_)) => {
                series.blowup = Some(st.t);
                break;
            }
            Err(e) => return Err(e),
        }
        k += 1;
        series.steps = k;
        if k % stride == 0 || st.t >= t_final {
            let w = 2.0 * st.h * stride as f64;
            delta = reference.best_shift(&st, delta - w, delta + w);
            let linf = record(&st, delta, &mut series);
            if linf > 10.0 * jump_size {
                series.blowup = Some(st.t);
                break;
            }
        }
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Oscillation {
    pub growth_rate: f64,
    pub period: Option<f64>,
}

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Growth rate of the log-amplitude and dominant period of the derivative of y,
/// by peak-to-peak spacing after linear detrending.
pub fn detect_oscillation(t: &[f64], y: &[f64]) -> Result<Oscillation> {
    let n = t.len().min(y.len());
    if n < 20 {
        return Err(DetonaError::TooShort);
    }
    let dy: Vec<f64> = (1..n - 1).map(|i| (y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1])).collect();
    let tt = &t[1..n - 1];
    let (a, b) = fit_line(tt, &dy);
    let r: Vec<f64> = tt.iter().zip(&dy).map(|(x, v)| v - a * x - b).collect();
    let peaks: Vec<usize> = (1..r.len() - 1).filter(|&i| r[i] > r[i - 1] && r[i] >= r[i + 1] && r[i] > 0.0).collect();
    let mut period = None;
    if peaks.len() >= 3 {
        let gaps: Vec<f64> = peaks.windows(2).map(|w| tt[w[1]] - tt[w[0]]).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64).sqrt();
        if sd < 0.1 * mean {
            let span = t[n - 1] - t[0];
            if span < 10.0 * mean {
                return Err(DetonaError::TooShort);
            }
            period = Some(mean);
        }
    }
    let growth = match period {
        Some(_) => {
            let pt: Vec<f64> = peaks.iter().map(|&i| tt[i]).collect();
            let pa: Vec<f64> = peaks.iter().map(|&i| r[i].ln()).collect();
            fit_line(&pt, &pa).0
        }
        None => {
            let idx: Vec<usize> = (0..n).filter(|&i| y[i].abs() > 0.0).collect();
            let xs: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
            let ls: Vec<f64> = idx.iter().map(|&i| y[i].abs().ln()).collect();
            fit_line(&xs, &ls).0
        }
    };
    Ok(Oscillation { growth_rate: growth, period })
}

/// Smooth manufactured solution used for convergence studies.
pub struct Manufactured {
    pub params: ModelParams,
    pub half_length: f64,
}

impl Manufactured {
    pub fn standard() -> Self {
        let params = ModelParams {
            nu: 0.5,
            kappa: 0.4,
            dcoef: 0.3,
            krate: 1.0,
            qheat: 0.5,
            Gamma: 1.2,
            cheat: 1.0,
            T_ign: 0.5,
            ign_C: 1.0,
            ign_E: 0.5,
            s: 0.7,
            ignition: Default::default(),
            eps_map: Default::default(),
        };
        Manufactured { params, half_length: 1.0 }
    }

    /// (U, U_t, U_x, U_xx) at (x, t).
    fn jet(&self, x: f64, t: f64) -> [V4; 4] {
        let k = std::f64::consts::PI / self.half_length;
        let th = k * x + t;
        let (s, c) = th.sin_cos();
        let amp = V4::new(0.1, 0.1, 0.1, 0.2);
        let base = V4::new(1.0, 0.0, 2.5, 0.5);
        // components alternate sin / cos
        let wave = V4::new(s, c, s, c);
        let dwave = V4::new(c, -s, c, -s);
        let u = base + amp.component_mul(&wave);
        let ut = amp.component_mul(&dwave);
        let ux = ut * k;
        let uxx = -amp.component_mul(&wave) * k * k;
        [u, ut, ux, uxx]
    }

    pub fn exact(&self, x: f64, t: f64) -> V4 {
        self.jet(x, t)[0]
    }

    /// Forcing S = U_t + F(U)_x - (B(U) U_x)_x - G(U) for the exact solution.
    pub fn forcing(&self, x: f64, t: f64) -> V4 {
        let [u, ut, ux, uxx] = self.jet(x, t);
        let st = to_state(&u);
        let jet = crate::model::flux_jet(&st, &self.params).expect("manufactured state is physical");
        let (bt, bu) = crate::model::diffusion_derivs(&st, &self.params);
        let bx = bt * ux[0] + bu * ux[1];
        ut + jet.dF * ux - (jet.B * uxx + bx * ux) - jet.G
    }

    /// L2 error at t_final on a grid of `cells` cells.
    pub fn error(&self, cells: usize, t_final: f64, opts: &SimOptions) -> Result<f64> {
        let l = self.half_length;
        let mut st = SimState::new(cells, l, V4::zeros(), V4::zeros(), |x| self.exact(x, 0.0));
        let dt0 = stable_dt(&st, &self.params, opts)? * 0.8;
        let n = (t_final / dt0).ceil() as usize;
        let dt = t_final / n as f64;
        let ghost = |x: f64, t: f64| self.exact(x, t);
        let src = |x: f64, t: f64| self.forcing(x, t);
        for _ in 0..n {
            advance(&mut st, &self.params, dt, opts.limiter, &ghost, Some(&src))?;
        }
        let e2: f64 = st.x.iter().zip(&st.u).map(|(&x, u)| (u - self.exact(x, st.t)).norm_squared()).sum();
        Ok((e2 * st.h).sqrt())
    }

    /// Observed orders log2(e_k / e_{k+1}) for successive doublings of `cells`.
    pub fn orders(&self, cells: &[usize], t_final: f64, opts: &SimOptions) -> Result<(Vec<f64>, Vec<f64>)> {
        let errs: Vec<f64> = cells.iter().map(|&c| self.error(c, t_final, opts)).collect::<Result<_>>()?;
        let ord = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        Ok((errs, ord))
    }
}

/// CSV with columns t, L2, Linf, delta, mass_defect.
pub fn write_series_csv<W: Write>(w: W, series: &TimeSeries) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "L2", "Linf", "delta", "mass_defect"])?;
    for r in &series.rows {
        wr.write_record([r.t, r.l2, r.linf, r.delta, r.mass_defect].iter().map(|v| format!("{v:e}")))?;
    }
    wr.flush()?;
    Ok(())
}

/// CSV with columns x, tau, u, E, z.
pub fn write_snapshot_csv<W: Write>(w: W, snap: &Snapshot) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x", "tau", "u", "E", "z"])?;
    for (x, v) in snap.x.iter().zip(&snap.u) {
        wr.write_record([*x, v[0], v[1], v[2], v[3]].iter().map(|v| format!("{v:e}")))?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EpsMap;

    fn params() -> ModelParams {
        ModelParams {
            nu: 1.0,
            kappa: 1.0,
            dcoef: 1.0,
            krate: 1.0,
            qheat: 0.5,
            Gamma: 1.2,
            cheat: 1.0,
            T_ign: 2.0,
            ign_C: 1.0,
            ign_E: 0.2,
            s: 1.0,
            ignition: Default::default(),
            eps_map: EpsMap::default(),
        }
    }

    #[test]
    fn constant_states_are_fixed_points() {
        let pr = params();
        let opts = SimOptions::default();
        // unburned below ignition, then burned (z = 0) above it
        for v in [V4::new(1.0, 0.3, 1.6, 1.0), V4::new(0.5, -0.2, 3.0, 0.0)] {
            let mut st = SimState::new(64, 5.0, v, v, |_| v);
            st.set_sponge(0.1, 1.0);
            let dt = stable_dt(&st, &pr, &opts).unwrap();
            for _ in 0..50 {
                step(&mut st, &pr, dt, &opts).unwrap();
            }
            let dev = st.u.iter().map(|u| (u - v).amax()).fold(0.0, f64::max);
            assert!(dev <= 1e-14, "{dev}");
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let pr = params();
        let v = V4::new(1.0, 0.0, 1.6, 1.0);
        let opts = SimOptions::default();
        let mut st = SimState::new(32, 1.0, v, v, |_| v);
        let dt = stable_dt(&st, &pr, &opts).unwrap();
        assert!(matches!(step(&mut st, &pr, 2.0 * dt, &opts), Err(DetonaError::CflViolation { .. })));
    }

    #[test]
    fn mass_budget_closes() {
        let mut pr = params();
        pr.T_ign = 0.5;
        let (a, b) = (V4::new(1.0, 0.0, 2.0, 0.0), V4::new(0.8, 0.1, 2.2, 1.0));
        let opts = SimOptions::default();
        let mut st = SimState::new(128, 10.0, a, b, |x| a + (b - a) * 0.5 * (1.0 + (x / 2.0).tanh()));
        st.set_sponge(0.1, 1.0);
        let m0 = st.mass();
        for _ in 0..400 {
            let dt = 0.9 * stable_dt(&st, &pr, &opts).unwrap();
            step(&mut st, &pr, dt, &opts).unwrap();
        }
        let defect = (st.mass() - m0 - st.budget).amax() / m0.amax();
        assert!(defect < 1e-12, "{defect}");
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let m = Manufactured::standard();
        let (errs, ord) = m.orders(&[32, 64, 128], 0.2, &SimOptions::default()).unwrap();
        assert!(errs[2] < errs[0]);
        assert!(ord.iter().all(|&o| o >= 1.8), "{ord:?} {errs:?}");
    }

    #[test]
    fn oscillation_detector() {
        let t: Vec<f64> = (0..5000).map(|i| i as f64 * 0.02).collect();
        let y: Vec<f64> = t.iter().map(|&t| (0.01 * t).exp() * (2.0 * std::f64::consts::PI * t / 5.0).sin()).collect();
        let o = detect_oscillation(&t, &y).unwrap();
        assert!((o.growth_rate - 0.01).abs() < 0.01 * 0.02, "{o:?}");
        assert!((o.period.unwrap() - 5.0).abs() < 0.1);
        let y: Vec<f64> = t.iter().map(|&t| (-0.1 * t).exp()).collect();
        let o = detect_oscillation(&t, &y).unwrap();
        assert!(o.period.is_none() && o.growth_rate < 0.0);
        // deterministic pseudo-noise
        let mut s = 12345u64;
        let y: Vec<f64> = (0..5000)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        match detect_oscillation(&t, &y) {
            Ok(o) => assert!(o.period.is_none()),
            Err(e) => assert_eq!(e, DetonaError::TooShort),
        }
        assert!(matches!(detect_oscillation(&t[..10], &y[..10]), Err(DetonaError::TooShort)));
    }
}
