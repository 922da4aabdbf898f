//! Rankine-Hugoniot endstates of strong detonations.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{DetonaError, Result};
use crate::model::{ignition, thermo, ModelParams, State};

/// Strict-inequality margin for constraint checks.
pub const MARGIN: f64 = 1e-12;
/// Acceptance bound on the nondimensional RH residual.
pub const RH_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndstatePair {
    pub left: State,
    pub right: State,
    pub s: f64,
    pub rh_residual: f64,
    pub lax_ok: bool,
    pub temp_ok: bool,
    pub tau_pole: f64,
    /// The rejected (deflagration-side) intersection, if any.
    pub tau_other: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub p_minus: f64,
}

fn left_pressure(left: &State, gamma: f64) -> f64 {
    // z_- = 0, so q drops out
    gamma * (left.E - 0.5 * left.u * left.u) / left.tau
}

pub fn rh_constants(left: &State, s: f64, gamma: f64) -> RhConstants {
    let p = left_pressure(left, gamma);
    let c0 = left.u + s * left.tau;
    RhConstants { c0, c1: p + s * s * left.tau, c2: (p * left.u - s * left.E) + 0.5 * c0 * c0 * s, p_minus: p }
}

pub fn rayleigh(tau: f64, left: &State, s: f64, gamma: f64) -> f64 {
    -s * s * tau + rh_constants(left, s, gamma).c1
}

pub fn hugoniot_pole(left: &State, s: f64, gamma: f64) -> f64 {
    rh_constants(left, s, gamma).c0 / (s * (1.0 + 1.0 / gamma))
}

pub fn hugoniot(tau: f64, left: &State, s: f64, q: f64, z_plus: f64, gamma: f64) -> Result<f64> {
    let c = rh_constants(left, s, gamma);
    let den = c.c0 - s * tau * (1.0 + 1.0 / gamma);
    let tau0 = hugoniot_pole(left, s, gamma);
    if den.abs() <= 1e-13 * (c.c0.abs() + 1.0) {
        return Err(DetonaError::PoleAt(tau0));
    }
    Ok((c.c2 + s * q * z_plus + 0.5 * s.powi(3) * tau * tau - s * s * c.c0 * tau) / den)
}

/// Coefficients (a, b, c) of the intersection quadratic in delta = tau - tau_-:
/// (H)*(denominator) - (R)*(denominator) = a delta^2 + b delta + c.
pub fn intersection_quadratic(left: &State, s: f64, q: f64, z_plus: f64, gamma: f64) -> (f64, f64, f64) {
    let p = left_pressure(left, gamma);
    let a = -s.powi(3) * (0.5 + 1.0 / gamma);
    let b = s * ((1.0 + 1.0 / gamma) * p - s * s * left.tau / gamma);
    (a, b, s * q * z_plus)
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    let qq = -0.5 * (b + b.signum() * sq);
    let mut r = Vec::new();
    if qq != 0.0 {
        r.push(qq / a);
        r.push(c / qq);
    } else {
        r.push(0.0);
        r.push(0.0);
    }
    r.sort_by(|x, y| x.partial_cmp(y).unwrap());
    r
}

/// Build the right state at specific volume tau from (RH)(i)-(iii).
pub fn right_state_at(tau: f64, left: &State, s: f64, q: f64, z_plus: f64, gamma: f64) -> State {
    let c = rh_constants(left, s, gamma);
    let u = c.c0 - s * tau;
    let p = c.c1 - s * s * tau;
    let e = p * tau / gamma;
    State::new(tau, u, e + 0.5 * u * u + q * z_plus, z_plus)
}

/// Nondimensional residual of (RH)(i)-(v): each jump relation divided by the size of its terms.
pub fn rh_residual(left: &State, right: &State, params: &ModelParams) -> Result<f64> {
    let s = params.s;
    let tl = thermo(left, params)?;
    let tr = thermo(right, params)?;
    let r1 = (-(right.u - left.u) - s * (right.tau - left.tau)).abs()
        / (1.0 + left.u.abs().max(right.u.abs()) + s * left.tau.max(right.tau));
    let r2 = ((tr.p - s * right.u) - (tl.p - s * left.u)).abs()
        / (1.0 + tl.p.max(tr.p) + s * left.u.abs().max(right.u.abs()));
    let r3 = ((tr.p * right.u - s * right.E) - (tl.p * left.u - s * left.E)).abs()
        / (1.0 + (tl.p * left.u).abs().max((tr.p * right.u).abs()) + s * left.E.abs().max(right.E.abs()));
    let k = params.krate;
    let r4 = (k * ignition(tl.T, params).0 * left.z).abs();
    let r5 = (k * ignition(tr.T, params).0 * right.z).abs();
    Ok(r1.max(r2).max(r3).max(r4).max(r5))
}

/// Intersection of (R) and (H) by bisection on the pressure difference over (lo, hi).
pub fn bisect_intersection(left: &State, s: f64, q: f64, z_plus: f64, gamma: f64, lo: f64, hi: f64) -> Option<f64> {
    let f = |t: f64| -> Option<f64> { Some(hugoniot(t, left, s, q, z_plus, gamma).ok()? - rayleigh(t, left, s, gamma)) };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a)?, f(b)?);
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

fn left_checks(left: &State, params: &ModelParams) -> Result<()> {
    let th = thermo(left, params)?;
    if left.z != 0.0 {
        return Err(DetonaError::ConstraintViolated("z_- = 0".into()));
    }
    if !(th.sigma > params.s * (1.0 + MARGIN)) {
        return Err(DetonaError::ConstraintViolated(format!("(L)_-: sigma_- = {} <= s = {}", th.sigma, params.s)));
    }
    Ok(())
}

/// Solve (RH) for the right state on the strong-detonation branch tau_+ > tau_-.
pub fn solve_right_state(left: &State, q: f64, z_plus: f64, params: &ModelParams) -> Result<EndstatePair> {
    let mut params = params.clone();
    params.qheat = q;
    let params = &params;
    let (s, gamma) = (params.s, params.Gamma);
    left_checks(left, params)?;
    let reacting = z_plus > 0.0;
    let tl = thermo(left, params)?;
    if reacting && !(tl.T > params.T_ign * (1.0 + MARGIN)) {
        return Err(DetonaError::ConstraintViolated(format!("(T)_-: T_- = {} <= T_i = {}", tl.T, params.T_ign)));
    }

    let (a, b, c) = intersection_quadratic(left, s, q, z_plus, gamma);
    let roots = quadratic_roots(a, b, c);
    let tol = 1e-12 * left.tau;
    let mut strong: Vec<f64> = roots.iter().copied().filter(|d| *d > tol).collect();
    let other = roots.iter().copied().filter(|d| *d <= tol).map(|d| left.tau + d).next();
    let delta = strong.pop().ok_or(DetonaError::NoIntersection)?;
    // Newton polish on the quadratic in delta
    let mut d = delta;
    for _ in 0..3 {
        let f = (a * d + b) * d + c;
        let df = 2.0 * a * d + b;
        if df != 0.0 {
            d -= f / df;
        }
    }
    let tau_plus = left.tau + d;
    let right = right_state_at(tau_plus, left, s, q, z_plus, gamma);
    let tr = thermo(&right, params)?;

    let rh_residual = rh_residual(left, &right, params)?;
    let lax_ok = tl.sigma > s * (1.0 + MARGIN) && s > tr.sigma * (1.0 + MARGIN);
    let temp_ok = !reacting || (tl.T > params.T_ign * (1.0 + MARGIN) && params.T_ign > tr.T * (1.0 + MARGIN));
    let pair = EndstatePair {
        left: *left,
        right,
        s,
        rh_residual,
        lax_ok,
        temp_ok,
        tau_pole: hugoniot_pole(left, s, gamma),
        tau_other: other,
    };
    if !lax_ok {
        return Err(DetonaError::ConstraintViolated(format!("(L)_+: sigma_+ = {} >= s = {s}", tr.sigma)));
    }
    if !temp_ok {
        return Err(DetonaError::ConstraintViolated(format!("(T)_+: T_+ = {} >= T_i = {}", tr.T, params.T_ign)));
    }
    if !(right.tau > left.tau) {
        return Err(DetonaError::ConstraintViolated("tau_- < tau_+".into()));
    }
    if rh_residual > RH_TOL {
        return Err(DetonaError::ConstraintViolated(format!("RH residual {rh_residual:e}")));
    }
    Ok(pair)
}

/// The first-order correction of tau_+ obtained by expanding p_H = p_R around (1 + 2/G) tau_-.
pub fn tau_tilde_plus(tau_minus: f64, p_tilde: f64, q: f64, z_plus: f64, gamma: f64) -> f64 {
    let g = gamma;
    2.0 * (1.0 + 1.0 / g) * p_tilde / (1.0 + 2.0 / g) + g * q * z_plus / ((1.0 + 2.0 / g) * tau_minus)
}

/// The closed form for tau_tilde_+ exactly as printed in the source derivation.
pub fn tau_tilde_plus_printed(tau_minus: f64, p_tilde: f64, q: f64, z_plus: f64, gamma: f64) -> f64 {
    let g = gamma;
    let a = 1.0 + 2.0 / g;
    g * p_tilde / (a * tau_minus) * ((1.0 + 1.0 / g) * a - 1.0) + g * q * z_plus / (a * tau_minus)
}

/// Large-s zero of the Hugoniot curve.
pub fn tau_bar_expansion(tau_minus: f64, u_tilde: f64, p_tilde: f64, s: f64, q: f64, z_plus: f64, gamma: f64) -> f64 {
    (1.0 + 2.0 / gamma) * tau_minus
        - (p_tilde * u_tilde + q * z_plus) / (s * s * (2.0 * tau_minus / gamma - u_tilde))
}

/// Final bracket on tau_- guaranteeing (alpha6) and the upper bound in (more).
pub fn regime_bracket(tau_minus: f64, q: f64, z_plus: f64, params: &ModelParams) -> (f64, f64, f64) {
    let g = params.Gamma;
    let mid = (3.0 + 2.0 / g - (1.0 + 2.0 / g) * tau_minus) / (4.0 * tau_minus);
    let upper = if q * z_plus > 0.0 { 1.0 + params.cheat * params.T_ign / (q * z_plus) } else { f64::INFINITY };
    (1.0, mid, upper)
}

/// Admissible left state in the large-s regime p_- = 2 s^2 tau_-/G + p_tilde, u_- = s u_tilde.
///
/// `p_tilde` defaults to -2 G q z_+ / tau_-.
pub fn construct_regime(
    tau_minus: f64,
    u_tilde: f64,
    q: f64,
    z_plus: f64,
    p_tilde: Option<f64>,
    params: &ModelParams,
) -> Result<State> {
    let (g, s) = (params.Gamma, params.s);
    let t = tau_minus;
    let mid = (1.0 - 2.0 / g) * t + 2.0 * u_tilde;
    if !(t / (1.0 + 1.0 / g) < mid && mid < (1.0 + 2.0 / g) * t) {
        return Err(DetonaError::RegimeViolated("(reg-u)".into()));
    }
    let (lo, b, hi) = regime_bracket(t, q, z_plus, params);
    if !(lo < b && b < hi) {
        return Err(DetonaError::RegimeViolated(format!("tau_- bracket: {lo} < {b} < {hi} fails")));
    }
    let pt = p_tilde.unwrap_or(-2.0 * g * q * z_plus / t);
    if !(pt < -(pt * u_tilde + q * z_plus) / (2.0 * t / g - u_tilde)) {
        return Err(DetonaError::RegimeViolated("(6.9.1)".into()));
    }
    let p = 2.0 * s * s * t / g + pt;
    let u = s * u_tilde;
    let e = p * t / g;
    let left = State::new(t, u, e + 0.5 * u * u, 0.0);
    let mut pr = params.clone();
    pr.qheat = q;
    let th = thermo(&left, &pr).map_err(|_| DetonaError::RegimeViolated("e_- > 0".into()))?;
    if !(t * p > params.cheat * g * params.T_ign) {
        return Err(DetonaError::RegimeViolated(format!("(T)_-: T_- = {}", th.T)));
    }
    if !(p / t > s * s / (g + 1.0)) {
        return Err(DetonaError::RegimeViolated("(L)_-".into()));
    }
    Ok(left)
}

/// Roots of the endstate linearizations of the traveling-wave ODE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndstateEigenvalues {
    pub fluid_minus: [C64; 2],
    pub fluid_plus: [C64; 2],
    pub reactive_minus: [C64; 2],
    pub reactive_plus: [C64; 2],
}

fn quad_c(a: f64, b: f64, c: f64) -> [C64; 2] {
    let disc = C64::new(b * b - 4.0 * a * c, 0.0).sqrt();
    let mut r = [(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)];
    r.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
    r
}

/// Fluid quadratic (e-af) and reactive quadratic d_eff mu^2 + s mu - k phi = 0 at U_-/U_+.
pub fn endstate_eigenvalues(pair: &EndstatePair, params: &ModelParams) -> Result<EndstateEigenvalues> {
    let s = params.s;
    let kc = params.kappa / params.cheat;
    let side = |st: &State| -> Result<([C64; 2], [C64; 2])> {
        let th = thermo(st, params)?;
        let t = st.tau;
        let p_tau = -th.p / t;
        let b = s * kc / t + params.nu / (s * t) * (s * s + p_tau);
        let c = kc * params.nu / (t * t) * (s * s - th.sigma * th.sigma);
        let fluid = quad_c(1.0, b, c);
        let d_eff = params.dcoef / (t * t);
        let phi = ignition(th.T, params).0;
        let reactive = quad_c(d_eff, s, -params.krate * phi);
        Ok((fluid, reactive))
    };
    let (fm, rm) = side(&pair.left)?;
    let (fp, rp) = side(&pair.right)?;
    Ok(EndstateEigenvalues { fluid_minus: fm, fluid_plus: fp, reactive_minus: rm, reactive_plus: rp })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RhSample {
    pub tau: f64,
    pub p_rayleigh: f64,
    pub p_hugoniot: f64,
    pub p_temperature: f64,
    pub p_lax: f64,
}

/// Samples of (R), (H) and the (T)/(L) boundaries p = c G T_i / tau, p = s^2 tau/(G+1).
pub fn rh_diagram(pair: &EndstatePair, params: &ModelParams, tau_max: f64, n: usize) -> Vec<RhSample> {
    let (s, g) = (params.s, params.Gamma);
    let zp = pair.right.z;
    (0..n)
        .map(|i| {
            let tau = tau_max * (i as f64 + 0.5) / n as f64;
            RhSample {
                tau,
                p_rayleigh: rayleigh(tau, &pair.left, s, g),
                p_hugoniot: hugoniot(tau, &pair.left, s, params.qheat, zp, g).unwrap_or(f64::NAN),
                p_temperature: params.cheat * g * params.T_ign / tau,
                p_lax: s * s * tau / (g + 1.0),
            }
        })
        .collect()
}
