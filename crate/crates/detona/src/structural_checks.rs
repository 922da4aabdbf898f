//! Certificate for the structural conditions (A1)-(A2) and (H1)-(H4).

use nalgebra::{Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::endstates::EndstatePair;
use crate::error::Result;
use crate::model::{diffusion_block, flux_jet, thermo, ModelParams, State};
use crate::profile::{transversality_gamma, Profile};
use crate::spectral::{kawashima_grid, kawashima_margin, Side};

#[derive(Debug, Clone, Serialize)]
pub struct Flag {
    pub pass: bool,
    pub margin: f64,
    pub provenance: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Flag {
    fn from_margin(margin: f64, tol: f64, provenance: &'static str) -> Self {
        Flag { pass: margin > tol, margin, provenance, detail: None }
    }

    fn failed(provenance: &'static str, why: String) -> Self {
        Flag { pass: false, margin: f64::NAN, provenance, detail: Some(why) }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub A1: Flag,
    pub A2: Flag,
    pub H1: Flag,
    pub H2: Flag,
    pub H3: Flag,
    pub H4: Flag,
    /// Smallest |-s + sigma| along the profile and where it occurs; the Lax
    /// conditions force a sign change of this characteristic in the interior.
    pub sonic_point: (f64, f64),
    pub all_pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    pub tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { tol: 1e-10 }
    }
}

/// Convection row for tau must be -u - s tau: its Jacobian row is constant and
/// B has no tau row or column.
fn check_a1(states: &[State], params: &ModelParams) -> Result<f64> {
    let mut dev: f64 = 0.0;
    for st in states {
        let j = flux_jet(st, params)?;
        dev = dev.max((j.dF[(0, 0)] + params.s).abs()).max((j.dF[(0, 1)] + 1.0).abs());
        dev = dev.max(j.dF[(0, 2)].abs()).max(j.dF[(0, 3)].abs());
        for k in 0..4 {
            dev = dev.max(j.B[(0, k)].abs()).max(j.B[(k, 0)].abs());
        }
    }
    Ok(dev)
}

/// Smallest eigenvalue of the symmetric part of b in (u, e, z) coordinates.
fn b_margin(st: &State, params: &ModelParams) -> f64 {
    let b = diffusion_block(st, params);
    let q = params.qheat;
    let j = Matrix3::new(1.0, 0.0, 0.0, -st.u, 1.0, -q, 0.0, 0.0, 1.0);
    let jinv = Matrix3::new(1.0, 0.0, 0.0, st.u, 1.0, q, 0.0, 0.0, 1.0);
    let bt = j * b * jinv;
    SymmetricEigen::new(0.5 * (bt + bt.transpose())).eigenvalues.min()
}

/// Gap and distance from 0 of the fluid characteristic speeds -s - sigma, -s, -s + sigma.
fn h2_margin(st: &State, params: &ModelParams) -> Result<f64> {
    let sig = thermo(st, params)?.sigma;
    let s = params.s;
    let ev = [-s - sig, -s, -s + sig];
    let gap = sig;
    let zero = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    Ok(gap.min(zero))
}

/// Evaluate every condition on `profile` with constants `params`; failures are recorded.
pub fn certify(profile: &Profile, params: &ModelParams, opts: &CertifyOptions) -> Certificate {
    let pair: &EndstatePair = profile.pair();
    let states: Vec<State> = profile.x.iter().map(|&x| profile.state_at(x).0).collect();
    let tol = opts.tol;

    let a1 = match check_a1(&[pair.left, pair.right, states[states.len() / 2]], params) {
        Ok(dev) => Flag { pass: dev <= 1e-12, margin: 1.0 - dev, provenance: "flux_jet", detail: Some(format!("deviation {dev:e}")) },
        Err(e) => Flag::failed("flux_jet", e.to_string()),
    };

    let a2_margin = states.iter().map(|st| b_margin(st, params)).fold(f64::INFINITY, f64::min);
    let a2 = Flag::from_margin(a2_margin, tol, "diffusion_block");

    let h1 = Flag::from_margin(params.s.abs(), tol, "params.s");

    let h2 = match (h2_margin(&pair.left, params), h2_margin(&pair.right, params)) {
        (Ok(a), Ok(b)) => Flag::from_margin(a.min(b), tol, "thermo"),
        (Err(e), _) | (_, Err(e)) => Flag::failed("thermo", e.to_string()),
    };
    let mut sonic = (f64::INFINITY, f64::NAN);
    for (x, st) in profile.x.iter().zip(&states) {
        if let Ok(th) = thermo(st, params) {
            let v = (th.sigma - params.s).abs();
            if v < sonic.0 {
                sonic = (v, *x);
            }
        }
    }

    let h3 = match kawashima_grid(params, pair).and_then(|xi| {
        let a = kawashima_margin(Side::Minus, params, pair, &xi)?;
        let b = kawashima_margin(Side::Plus, params, pair, &xi)?;
        Ok(a.min(b))
    }) {
        Ok(theta) => Flag::from_margin(theta, 0.0, "kawashima_margin"),
        Err(e) => Flag::failed("kawashima_margin", e.to_string()),
    };

    let h4 = match transversality_gamma(profile) {
        Ok(t) => {
            let mut f = Flag::from_margin(t.gamma.abs(), tol, "transversality_gamma");
            f.detail = Some(format!("gamma {:e}, conditioning {:e}", t.gamma, t.conditioning));
            f
        }
        Err(e) => Flag::failed("transversality_gamma", e.to_string()),
    };

    let all_pass = [&a1, &a2, &h1, &h2, &h3, &h4].iter().all(|f| f.pass);
    Certificate { A1: a1, A2: a2, H1: h1, H2: h2, H3: h3, H4: h4, sonic_point: sonic, all_pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::solve_profile;
    use crate::profile::tests::small_amplitude;

    #[test]
    fn small_amplitude_passes_and_artificial_failures() {
        let (pair, pr) = small_amplitude(0.05);
        let prof = solve_profile(&pair, &pr, &Default::default(), None).unwrap();
        let c = certify(&prof, &pr, &Default::default());
        assert!(c.all_pass, "{c:#?}");
        assert!(c.sonic_point.0 < 1e-2);
        let mut p0 = pr.clone();
        p0.s = 0.0;
        let c = certify(&prof, &p0, &Default::default());
        assert!(!c.H1.pass);
        let mut k0 = pr.clone();
        k0.kappa = 0.0;
        let c = certify(&prof, &k0, &Default::default());
        assert!(!c.A2.pass && c.A2.margin.abs() < 1e-14);
    }

    #[test]
    fn b_is_diagonal_in_internal_energy_coordinates() {
        let (_, pr) = small_amplitude(0.3);
        let st = State::new(0.7, 2.0, 9.0, 0.4);
        let m = b_margin(&st, &pr);
        let want = (pr.nu / 0.7).min(pr.kappa / (pr.cheat * 0.7)).min(pr.dcoef / 0.49);
        assert!((m - want).abs() < 1e-13);
    }
}
