//! Root location for analytic functions of lambda, tracking of a conjugate root
//! pair across a parameter sweep and detection of the Hopf crossing.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DetonaError, Result};
use crate::evans::contour::{winding_adaptive, Contour};
use crate::evans::stability::{stability_check, StabilityOptions, Verdict};
use crate::evans::{evans, EvansOptions};
use crate::profile::Profile;
use crate::spectral::build_system;

/// A function of lambda that is analytic in the region of interest.
pub trait AnalyticFamily: Sync {
    fn eval(&self, lambda: C64) -> Result<C64>;
}

impl<F: Fn(C64) -> C64 + Sync> AnalyticFamily for F {
    fn eval(&self, lambda: C64) -> Result<C64> {
        Ok(self(lambda))
    }
}

/// The Evans function of a converged profile.
pub struct EvansFamily {
    pub profile: Profile,
    pub opts: EvansOptions,
}

impl AnalyticFamily for EvansFamily {
    fn eval(&self, lambda: C64) -> Result<C64> {
        let sys = build_system(&self.profile)?;
        Ok(evans(&sys, lambda, &self.opts)?.d)
    }
}

/// (lambda - g - i t)(lambda - g + i t) e^lambda with g = eps - center.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyntheticHopf {
    pub eps: f64,
    pub center: f64,
    pub tau: f64,
}

impl SyntheticHopf {
    pub fn new(eps: f64) -> Self {
        SyntheticHopf { eps, center: 0.1, tau: 1.0 }
    }
}

impl AnalyticFamily for SyntheticHopf {
    fn eval(&self, lambda: C64) -> Result<C64> {
        let g = self.eps - self.center;
        let z = lambda - g;
        Ok((z * z + self.tau * self.tau) * lambda.exp())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocateOptions {
    /// Bisection stops at cells of this diameter.
    pub cell_diameter: f64,
    /// Initial samples per box edge.
    pub edge_samples: usize,
    pub max_rounds: usize,
    /// Minimum distance of the box from the origin.
    pub origin_exclusion: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Radius and node count of the Cauchy circle for D'.
    pub cauchy_radius: f64,
    pub cauchy_points: usize,
    pub max_retries: usize,
}

impl Default for LocateOptions {
    fn default() -> Self {
        LocateOptions {
            cell_diameter: 1e-6,
            edge_samples: 4,
            max_rounds: 16,
            origin_exclusion: 1e-3,
            newton_tol: 1e-13,
            max_newton: 30,
            cauchy_radius: 1e-4,
            cauchy_points: 8,
            max_retries: 3,
        }
    }
}

/// f(z) by the mean value and f'(z) by the Cauchy integral on |lambda - z| = rho.
pub fn cauchy_derivative<F: AnalyticFamily>(f: &F, z: C64, rho: f64, n: usize) -> Result<(C64, C64)> {
    let vals: Vec<(C64, C64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let h = C64::from_polar(rho, 2.0 * PI * k as f64 / n as f64);
            f.eval(z + h).map(|v| (v, h))
        })
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let mean = vals.iter().map(|(v, _)| *v).sum::<C64>() / nf;
    let der = vals.iter().map(|(v, h)| *v / *h).sum::<C64>() / nf;
    Ok((mean, der))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NewtonRoot {
    pub lambda: C64,
    /// |f| / (|f'| max(1, |lambda|)), a relative distance to the root.
    pub residual: f64,
    pub derivative: C64,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton iteration z <- z - m f/f' with the derivative from a Cauchy circle.
pub fn refine_root<F: AnalyticFamily>(f: &F, z0: C64, multiplicity: usize, opts: &LocateOptions) -> Result<NewtonRoot> {
    let m = multiplicity.max(1) as f64;
    let mut z = z0;
    let mut out = NewtonRoot { lambda: z0, residual: f64::INFINITY, derivative: C64::new(0.0, 0.0), iterations: 0, converged: false };
    for it in 0..opts.max_newton {
        let v = f.eval(z)?;
        let (_, d) = cauchy_derivative(f, z, opts.cauchy_radius, opts.cauchy_points)?;
        out = NewtonRoot {
            lambda: z,
            residual: v.norm() / (d.norm() * z.norm().max(1.0)),
            derivative: d,
            iterations: it,
            converged: false,
        };
        if v.norm() == 0.0 {
            out.converged = true;
            return Ok(out);
        }
        if d.norm() == 0.0 || !d.re.is_finite() {
            return Ok(out);
        }
        let step = m * v / d;
        z -= step;
        if step.norm() <= opts.newton_tol * z.norm().max(1.0) {
            let v = f.eval(z)?;
            out.lambda = z;
            out.residual = v.norm() / (d.norm() * z.norm().max(1.0));
            out.iterations = it + 1;
            out.converged = true;
            return Ok(out);
        }
    }
    Ok(out)
}

fn box_winding<F: AnalyticFamily>(f: &F, lo: C64, hi: C64, opts: &LocateOptions) -> Result<i64> {
    let err = std::sync::Mutex::new(None);
    let g = |l: C64| match f.eval(l) {
        Ok(v) => v,
        Err(e) => {
            *err.lock().unwrap() = Some(e);
            C64::new(f64::NAN, f64::NAN)
        }
    };
    let res = winding_adaptive(g, &Contour::rectangle(lo, hi), 4 * opts.edge_samples.max(1), opts.max_rounds);
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e);
    }
    res.map(|(w, _)| w)
}

fn distance_to_box(p: C64, lo: C64, hi: C64) -> f64 {
    let dx = (lo.re - p.re).max(0.0).max(p.re - hi.re);
    let dy = (lo.im - p.im).max(0.0).max(p.im - hi.im);
    dx.hypot(dy)
}

fn search<F: AnalyticFamily>(f: &F, lo: C64, hi: C64, w: i64, opts: &LocateOptions, out: &mut Vec<C64>) -> Result<()> {
    if w == 0 {
        return Ok(());
    }
    if w < 0 {
        return Err(DetonaError::RefinementLimit(format!("negative winding {w} on [{lo}, {hi}]")));
    }
    if (hi - lo).norm() <= opts.cell_diameter {
        let c = 0.5 * (lo + hi);
        let r = refine_root(f, c, w as usize, opts)?;
        let z = if r.converged && (r.lambda - c).norm() <= (hi - lo).norm() { r.lambda } else { c };
        out.extend(std::iter::repeat(z).take(w as usize));
        return Ok(());
    }
    let wide = hi.re - lo.re >= hi.im - lo.im;
    for frac in [0.5, 0.5 + 0.0371, 0.5 - 0.0529, 0.5 + 0.1123] {
        let (a_hi, b_lo) = if wide {
            let x = lo.re + frac * (hi.re - lo.re);
            (C64::new(x, hi.im), C64::new(x, lo.im))
        } else {
            let y = lo.im + frac * (hi.im - lo.im);
            (C64::new(hi.re, y), C64::new(lo.re, y))
        };
        let (wa, wb) = match (box_winding(f, lo, a_hi, opts), box_winding(f, b_lo, hi, opts)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(DetonaError::RefinementLimit(_)), _) | (_, Err(DetonaError::RefinementLimit(_))) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        if wa + wb != w {
            continue;
        }
        search(f, lo, a_hi, wa, opts, out)?;
        return search(f, b_lo, hi, wb, opts, out);
    }
    Err(DetonaError::RefinementLimit(format!("no admissible split of [{lo}, {hi}]")))
}

/// All roots in the rectangle [lo, hi] with multiplicity, by recursive winding bisection
/// followed by Newton.
pub fn locate_roots<F: AnalyticFamily>(f: &F, lo: C64, hi: C64, opts: &LocateOptions) -> Result<Vec<C64>> {
    if distance_to_box(C64::new(0.0, 0.0), lo, hi) < opts.origin_exclusion {
        return Err(DetonaError::ConstraintViolated(format!("box [{lo}, {hi}] is within {} of the origin", opts.origin_exclusion)));
    }
    let diam = (hi - lo).norm();
    let mut last = None;
    for k in 0..=opts.max_retries {
        // nudge the box outward when a root sits on its boundary
        let pad = diam * 1.3e-3 * k as f64;
        let (l, h) = (lo - C64::new(pad, pad), hi + C64::new(pad, pad));
        if k > 0 && distance_to_box(C64::new(0.0, 0.0), l, h) < opts.origin_exclusion {
            break;
        }
        match box_winding(f, l, h, opts) {
            Ok(w) => {
                let mut out = Vec::new();
                search(f, l, h, w, opts, &mut out)?;
                out.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap().then(a.re.partial_cmp(&b.re).unwrap()));
                return Ok(out);
            }
            Err(e @ DetonaError::RefinementLimit(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| DetonaError::RefinementLimit("box boundary".into())))
}

/// Winding number of f on the full right-half-plane D-contour.
pub fn rhp_winding<F: AnalyticFamily>(f: &F, r0: f64, radius: f64, n0: usize, max_rounds: usize) -> Result<i64> {
    let g = |l: C64| f.eval(l).unwrap_or(C64::new(f64::NAN, f64::NAN));
    winding_adaptive(g, &Contour::d_contour(r0, radius), n0, max_rounds).map(|(w, _)| w)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Crossing {
    pub eps_star: f64,
    pub tau_star: f64,
    pub dgamma_deps: f64,
    /// Standard error of the slope from the local linear fit.
    pub slope_stderr: f64,
    /// Uncertainty in eps_star implied by the fit.
    pub eps_star_bound: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RootTrajectory {
    pub eps_values: Vec<f64>,
    /// Upper-half-plane member of the pair at each eps.
    pub roots: Vec<C64>,
    pub newton_residuals: Vec<f64>,
    /// Points recovered by a fresh box search rather than warm Newton.
    pub relocated: Vec<bool>,
    pub crossing: Option<Crossing>,
}

impl RootTrajectory {
    pub fn gamma(&self) -> Vec<f64> {
        self.roots.iter().map(|z| z.re).collect()
    }

    pub fn tau(&self) -> Vec<f64> {
        self.roots.iter().map(|z| z.im).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackOptions {
    pub locate: LocateOptions,
    /// Largest accepted |lambda(eps_{i+1}) - lambda(eps_i)|.
    pub max_jump: f64,
    /// Tracked roots must keep Im lambda above this.
    pub tau_min: f64,
    /// Half-width of the re-centred box used after a Newton failure.
    pub fallback_halfwidth: f64,
    pub residual_tol: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions { locate: LocateOptions::default(), max_jump: 0.5, tau_min: 1e-3, fallback_halfwidth: 0.25, residual_tol: 1e-8 }
    }
}

fn pick_seed(roots: &[C64], tau_min: f64) -> Option<C64> {
    roots
        .iter()
        .filter(|z| z.im > tau_min)
        .copied()
        .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap()))
}

/// Follow the upper member of a root pair across an eps grid (sorted ascending first).
pub fn track_pair<F, B>(mut build: B, eps: &[f64], seed: (C64, C64), opts: &TrackOptions) -> Result<RootTrajectory>
where
    F: AnalyticFamily,
    B: FnMut(f64) -> Result<F>,
{
    let mut eps_values = eps.to_vec();
    eps_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eps_values.dedup();
    let mut traj = RootTrajectory { eps_values: eps_values.clone(), roots: Vec::new(), newton_residuals: Vec::new(), relocated: Vec::new(), crossing: None };
    for (i, &e) in eps_values.iter().enumerate() {
        let f = build(e)?;
        let guess = match traj.roots.len() {
            0 => None,
            1 => Some(traj.roots[0]),
            n => {
                let (z1, z0) = (traj.roots[n - 1], traj.roots[n - 2]);
                let (e1, e0) = (eps_values[i - 1], eps_values[i - 2]);
                Some(z1 + (z1 - z0) * ((e - e1) / (e1 - e0)))
            }
        };
        let mut found = None;
        if let Some(g) = guess {
            let r = refine_root(&f, g, 1, &opts.locate)?;
            let prev = *traj.roots.last().unwrap();
            if r.converged && r.residual <= opts.residual_tol && r.lambda.im > opts.tau_min && (r.lambda - prev).norm() <= opts.max_jump {
                found = Some((r, false));
            }
        }
        if found.is_none() {
            let (lo, hi) = match guess {
                None => seed,
                Some(g) => {
                    let h = opts.fallback_halfwidth;
                    (C64::new(g.re - h, (g.im - h).max(opts.tau_min)), C64::new(g.re + h, g.im + h))
                }
            };
            let roots = locate_roots(&f, lo, hi, &opts.locate)?;
            let pick = match guess {
                None => pick_seed(&roots, opts.tau_min),
                Some(g) => roots.iter().filter(|z| z.im > opts.tau_min).copied().min_by(|a, b| (a - g).norm().partial_cmp(&(b - g).norm()).unwrap()),
            };
            let z = pick.ok_or(DetonaError::TrackingLost(e))?;
            let r = refine_root(&f, z, 1, &opts.locate)?;
            if !(r.residual <= opts.residual_tol) {
                return Err(DetonaError::TrackingLost(e));
            }
            found = Some((r, true));
        }
        let (r, relocated) = found.unwrap();
        traj.roots.push(r.lambda);
        traj.newton_residuals.push(r.residual);
        traj.relocated.push(relocated);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopfOptions {
    pub tau_tol: f64,
    pub slope_tol: f64,
    /// Half-width of the slope-fit window in units of the local grid spacing.
    pub fit_window: f64,
}

impl Default for HopfOptions {
    fn default() -> Self {
        HopfOptions { tau_tol: 1e-6, slope_tol: 1e-6, fit_window: 2.0 }
    }
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let stderr = if x.len() > 2 {
        let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
        (ss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, icpt, stderr)
}

/// First sign change of gamma = Re lambda: secant crossing, local slope fit and
/// the nondegeneracy conditions tau* != 0, dgamma/deps != 0.
pub fn detect_hopf(traj: &RootTrajectory, opts: &HopfOptions) -> Result<Option<Crossing>> {
    let (e, g, t) = (&traj.eps_values, traj.gamma(), traj.tau());
    let Some(i) = (0..e.len().saturating_sub(1)).find(|&i| g[i] * g[i + 1] <= 0.0) else {
        return Ok(None);
    };
    let eps_star = if g[i] == g[i + 1] { e[i] } else { e[i] - g[i] * (e[i + 1] - e[i]) / (g[i + 1] - g[i]) };
    let frac = if e[i + 1] > e[i] { (eps_star - e[i]) / (e[i + 1] - e[i]) } else { 0.0 };
    let tau_star = t[i] + frac * (t[i + 1] - t[i]);
    let h = e[i + 1] - e[i];
    let idx: Vec<usize> = (0..e.len()).filter(|&j| (e[j] - eps_star).abs() <= opts.fit_window * h * (1.0 + 1e-9)).collect();
    let xs: Vec<f64> = idx.iter().map(|&j| e[j]).collect();
    let ys: Vec<f64> = idx.iter().map(|&j| g[j]).collect();
    let (slope, icpt, stderr) = if xs.len() >= 2 { linear_fit(&xs, &ys) } else { (0.0, 0.0, f64::INFINITY) };
    if !(tau_star.abs() > opts.tau_tol) {
        return Err(DetonaError::Degenerate(format!("tau* = {tau_star:e}")));
    }
    if !(slope.abs() > opts.slope_tol.max(3.0 * stderr)) {
        return Err(DetonaError::Degenerate(format!("dgamma/deps = {slope:e} (stderr {stderr:e})")));
    }
    let fit_root = -icpt / slope;
    Ok(Some(Crossing {
        eps_star,
        tau_star,
        dgamma_deps: slope,
        slope_stderr: stderr,
        eps_star_bound: (fit_root - eps_star).abs() + stderr / slope.abs() * h,
        period: 2.0 * PI / tau_star.abs(),
    }))
}

/// One row of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub gamma: f64,
    pub tau: f64,
    pub residual: f64,
    pub winding: Option<i64>,
    pub verdict: String,
}

/// Verdict from the winding on the full contour for a generic family.
pub fn winding_verdict<F: AnalyticFamily>(f: &F, r0: f64, radius: f64) -> (Option<i64>, String) {
    match rhp_winding(f, r0, radius, 64, 16) {
        Ok(0) => (Some(0), "stable".into()),
        Ok(w) if w > 0 => (Some(w), format!("unstable({w})")),
        Ok(w) => (Some(w), format!("inconclusive(negative winding {w})")),
        Err(e) => (None, format!("inconclusive({e})")),
    }
}

/// Verdict for an Evans family from the full stability check.
pub fn evans_verdict(f: &EvansFamily, opts: &StabilityOptions) -> (Option<i64>, String) {
    let sys = match build_system(&f.profile) {
        Ok(s) => s,
        Err(e) => return (None, format!("inconclusive({e})")),
    };
    let rep = stability_check(&sys, f.profile.params(), f.profile.pair(), opts);
    let v = match rep.verdict {
        Verdict::Stable => "stable".to_string(),
        Verdict::Unstable(w) => format!("unstable({w})"),
        Verdict::Inconclusive(m) => format!("inconclusive({m})"),
    };
    (rep.winding, v)
}

pub fn sweep_points(traj: &RootTrajectory, verdicts: &[(Option<i64>, String)]) -> Vec<SweepPoint> {
    (0..traj.eps_values.len())
        .map(|i| {
            let (w, v) = verdicts.get(i).cloned().unwrap_or((None, String::new()));
            SweepPoint { eps: traj.eps_values[i], gamma: traj.roots[i].re, tau: traj.roots[i].im, residual: traj.newton_residuals[i], winding: w, verdict: v }
        })
        .collect()
}

/// CSV with columns eps, gamma, tau, residual, winding, verdict.
pub fn write_sweep_csv<W: Write>(w: W, points: &[SweepPoint]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["eps", "gamma", "tau", "residual", "winding", "verdict"])?;
    for p in points {
        wr.write_record([
            format!("{:e}", p.eps),
            format!("{:e}", p.gamma),
            format!("{:e}", p.tau),
            format!("{:e}", p.residual),
            p.winding.map(|w| w.to_string()).unwrap_or_default(),
            p.verdict.clone(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn locates_synthetic_pair() {
        let f = SyntheticHopf { eps: 0.15, center: 0.1, tau: 2.0 };
        let roots = locate_roots(&f, C64::new(0.01, -3.0), C64::new(0.2, 3.0), &LocateOptions::default()).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - C64::new(0.05, -2.0)).norm() < 1e-8);
        assert!((roots[1] - C64::new(0.05, 2.0)).norm() < 1e-8);
        let roots = locate_roots(&f, C64::new(-0.2, 1.0), C64::new(0.2, 3.0), &LocateOptions::default()).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - C64::new(0.05, 2.0)).norm() < 1e-8);
    }

    #[test]
    fn empty_box_and_origin_guard() {
        let f = SyntheticHopf::new(0.0);
        assert!(locate_roots(&f, C64::new(0.5, 0.5), C64::new(1.5, 1.5), &LocateOptions::default()).unwrap().is_empty());
        let e = locate_roots(&f, C64::new(-1.0, -1.0), C64::new(1.0, 1.0), &LocateOptions::default());
        assert!(matches!(e, Err(DetonaError::ConstraintViolated(_))));
    }

    #[test]
    fn root_on_boundary_and_double_root() {
        // root exactly on the bottom edge and on the first split line
        let f = |l: C64| (l - C64::new(0.0, 1.0)) * (l - C64::new(0.3, 2.0));
        let roots = locate_roots(&f, C64::new(-0.5, 1.0), C64::new(0.5, 2.5), &LocateOptions::default()).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - C64::new(0.0, 1.0)).norm() < 1e-8);
        assert!((roots[1] - C64::new(0.3, 2.0)).norm() < 1e-8);
        let g = |l: C64| (l - C64::new(0.1, 1.3)).powi(2);
        let roots = locate_roots(&g, C64::new(-0.5, 1.0), C64::new(0.5, 2.0), &LocateOptions::default()).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().all(|z| (z - C64::new(0.1, 1.3)).norm() < 1e-6));
    }

    #[test]
    fn tracks_synthetic_family_and_detects_crossing() {
        let eps = grid(0.0, 0.2, 21);
        let seed = (C64::new(-0.5, 0.5), C64::new(0.5, 1.5));
        let opts = TrackOptions::default();
        let traj = track_pair(|e| Ok(SyntheticHopf::new(e)), &eps, seed, &opts).unwrap();
        for (e, z) in traj.eps_values.iter().zip(&traj.roots) {
            assert!((z - C64::new(e - 0.1, 1.0)).norm() < 1e-8);
        }
        let c = detect_hopf(&traj, &HopfOptions::default()).unwrap().unwrap();
        assert!((c.eps_star - 0.1).abs() < 1e-6);
        assert!((c.tau_star - 1.0).abs() < 1e-6);
        assert!((c.dgamma_deps - 1.0).abs() < 1e-6);
        assert!((c.period - 2.0 * PI).abs() < 1e-5);
        let mut rev = eps.clone();
        rev.reverse();
        let back = track_pair(|e| Ok(SyntheticHopf::new(e)), &rev, seed, &opts).unwrap();
        for (a, b) in traj.roots.iter().zip(&back.roots) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn hopf_edge_cases() {
        let mk = |g: &dyn Fn(f64) -> f64| {
            let e = grid(-0.5, 0.5, 11);
            RootTrajectory {
                roots: e.iter().map(|&x| C64::new(g(x), 1.0)).collect(),
                newton_residuals: vec![0.0; e.len()],
                relocated: vec![false; e.len()],
                eps_values: e,
                crossing: None,
            }
        };
        assert!(detect_hopf(&mk(&|x| x + 2.0), &HopfOptions::default()).unwrap().is_none());
        assert!(matches!(detect_hopf(&mk(&|x| x * x), &HopfOptions::default()), Err(DetonaError::Degenerate(_))));
        let c = detect_hopf(&mk(&|x| 0.5 * x - 0.01), &HopfOptions::default()).unwrap().unwrap();
        assert!((c.eps_star - 0.02).abs() < 1e-12);
    }

    #[test]
    fn winding_counts_pairs() {
        for (e, want) in [(0.0, 0), (0.2, 2)] {
            let f = SyntheticHopf::new(e);
            assert_eq!(rhp_winding(&f, 1e-3, 10.0, 64, 16).unwrap(), want);
        }
    }

    #[test]
    fn sweep_csv_header() {
        let traj = RootTrajectory { eps_values: vec![0.0], roots: vec![C64::new(-0.1, 1.0)], newton_residuals: vec![0.0], relocated: vec![false], crossing: None };
        let pts = sweep_points(&traj, &[(Some(0), "stable".into())]);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &pts).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("eps,gamma,tau,residual,winding,verdict\n"));
        assert!(s.contains(",0,stable"));
    }
}
