//! Equation of state, ignition kinetics and the flux/diffusion/source jets of
//! the reactive Navier-Stokes system in Lagrangian traveling coordinates,
//!
//!   U_t + F(U)_x = (B(U) U_x)_x + G(U),   U = (tau, u, E, z).

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{DetonaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IgnitionLaw {
    /// C exp(-E/(T - T_i)) above T_i.
    #[default]
    Arrhenius,
    /// C exp(+E/(T - T_i)) above T_i; singular at T_i, kept for comparison only.
    ArrheniusPositive,
    /// C times a C-infinity step rising from 0 at T_i to 1 at T_i + E.
    Bump,
}

/// Affine map eps -> value of one named constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsMap {
    pub param: String,
    pub base: f64,
    pub slope: f64,
}

impl Default for EpsMap {
    fn default() -> Self {
        EpsMap { param: "qheat".into(), base: 0.0, slope: 1.0 }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub nu: f64,
    pub kappa: f64,
    pub dcoef: f64,
    pub krate: f64,
    pub qheat: f64,
    pub Gamma: f64,
    pub cheat: f64,
    pub T_ign: f64,
    pub ign_C: f64,
    pub ign_E: f64,
    pub s: f64,
    #[serde(default)]
    pub ignition: IgnitionLaw,
    #[serde(default)]
    pub eps_map: EpsMap,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nu", self.nu),
            ("kappa", self.kappa),
            ("dcoef", self.dcoef),
            ("krate", self.krate),
            ("Gamma", self.Gamma),
            ("cheat", self.cheat),
            ("T_ign", self.T_ign),
            ("ign_C", self.ign_C),
            ("ign_E", self.ign_E),
            ("s", self.s),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DetonaError::Config { key: key.into(), msg: format!("must be > 0, got {v}") });
            }
        }
        if !self.qheat.is_finite() {
            return Err(DetonaError::Config { key: "qheat".into(), msg: "must be finite".into() });
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "nu" => self.nu,
            "kappa" => self.kappa,
            "dcoef" => self.dcoef,
            "krate" => self.krate,
            "qheat" => self.qheat,
            "Gamma" => self.Gamma,
            "cheat" => self.cheat,
            "T_ign" => self.T_ign,
            "ign_C" => self.ign_C,
            "ign_E" => self.ign_E,
            "s" => self.s,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, v: f64) -> Result<()> {
        let slot = match name {
            "nu" => &mut self.nu,
            "kappa" => &mut self.kappa,
            "dcoef" => &mut self.dcoef,
            "krate" => &mut self.krate,
            "qheat" => &mut self.qheat,
            "Gamma" => &mut self.Gamma,
            "cheat" => &mut self.cheat,
            "T_ign" => &mut self.T_ign,
            "ign_C" => &mut self.ign_C,
            "ign_E" => &mut self.ign_E,
            "s" => &mut self.s,
            _ => return Err(DetonaError::Config { key: name.into(), msg: "unknown parameter".into() }),
        };
        *slot = v;
        Ok(())
    }

    /// Parameters at bifurcation value eps according to `eps_map`.
    pub fn at_eps(&self, eps: f64) -> Result<ModelParams> {
        let mut p = self.clone();
        let v = self.eps_map.base + self.eps_map.slope * eps;
        p.set(&self.eps_map.param.clone(), v)?;
        Ok(p)
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub tau: f64,
    pub u: f64,
    pub E: f64,
    pub z: f64,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thermo {
    pub e: f64,
    pub T: f64,
    pub p: f64,
    pub sigma: f64,
}

impl State {
    #[allow(non_snake_case)]
    pub fn new(tau: f64, u: f64, E: f64, z: f64) -> Self {
        State { tau, u, E, z }
    }

    pub fn from_vec(v: &Vector4<f64>) -> Self {
        State { tau: v[0], u: v[1], E: v[2], z: v[3] }
    }

    pub fn to_vec(&self) -> Vector4<f64> {
        Vector4::new(self.tau, self.u, self.E, self.z)
    }

    pub fn internal_energy(&self, q: f64) -> f64 {
        self.E - 0.5 * self.u * self.u - q * self.z
    }
}

pub fn thermo(state: &State, params: &ModelParams) -> Result<Thermo> {
    let e = state.internal_energy(params.qheat);
    if !(state.tau > 0.0) {
        return Err(DetonaError::NonPhysical(format!("tau = {} <= 0", state.tau)));
    }
    if !(e > 0.0) {
        return Err(DetonaError::NonPhysical(format!("internal energy e = {e} <= 0")));
    }
    let g = params.Gamma;
    Ok(Thermo {
        e,
        T: e / params.cheat,
        p: g * e / state.tau,
        sigma: (g * (g + 1.0) * e).sqrt() / state.tau,
    })
}

fn bump_step(x: f64) -> (f64, f64) {
    // smooth step 0 -> 1 on [0, 1] with all derivatives vanishing at both ends
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let f = |t: f64| (-1.0 / t).exp();
    let df = |t: f64| (-1.0 / t).exp() / (t * t);
    let (a, b) = (f(x), f(1.0 - x));
    let (da, db) = (df(x), -df(1.0 - x));
    let den = a + b;
    (a / den, (da * den - a * (da + db)) / (den * den))
}

/// Ignition function phi(T) and its derivative.
#[allow(non_snake_case)]
pub fn ignition(T: f64, params: &ModelParams) -> (f64, f64) {
    let dt = T - params.T_ign;
    if dt <= 0.0 {
        return (0.0, 0.0);
    }
    let (c, e) = (params.ign_C, params.ign_E);
    match params.ignition {
        IgnitionLaw::Arrhenius => {
            let phi = c * (-e / dt).exp();
            (phi, phi * e / (dt * dt))
        }
        IgnitionLaw::ArrheniusPositive => {
            let phi = c * (e / dt).exp();
            (phi, -phi * e / (dt * dt))
        }
        IgnitionLaw::Bump => {
            let (h, dh) = bump_step(dt / e);
            (c * h, c * dh / e)
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxJet {
    pub F: Vector4<f64>,
    pub dF: Matrix4<f64>,
    pub B: Matrix4<f64>,
    pub G: Vector4<f64>,
    pub dG: Matrix4<f64>,
}

/// Pressure gradient (p_tau, p_u, p_E, p_z).
pub fn pressure_gradient(state: &State, params: &ModelParams) -> Result<Vector4<f64>> {
    let th = thermo(state, params)?;
    let g = params.Gamma;
    let t = state.tau;
    Ok(Vector4::new(-g * th.e / (t * t), -g * state.u / t, g / t, -g * params.qheat / t))
}

/// Diffusion matrix B(U); first row and column vanish.
pub fn diffusion(state: &State, params: &ModelParams) -> Matrix4<f64> {
    let (nu, kc, d, q) = (params.nu, params.kappa / params.cheat, params.dcoef, params.qheat);
    let t = state.tau;
    let mut b = Matrix4::zeros();
    b[(1, 1)] = nu / t;
    b[(2, 1)] = (nu - kc) * state.u / t;
    b[(2, 2)] = kc / t;
    b[(2, 3)] = -kc * q / t + q * d / (t * t);
    b[(3, 3)] = d / (t * t);
    b
}

/// Partial derivatives of B with respect to tau and u (B does not depend on E, z).
pub fn diffusion_derivs(state: &State, params: &ModelParams) -> (Matrix4<f64>, Matrix4<f64>) {
    let (nu, kc, d, q) = (params.nu, params.kappa / params.cheat, params.dcoef, params.qheat);
    let t = state.tau;
    let (t2, t3) = (t * t, t * t * t);
    let mut bt = Matrix4::zeros();
    bt[(1, 1)] = -nu / t2;
    bt[(2, 1)] = -(nu - kc) * state.u / t2;
    bt[(2, 2)] = -kc / t2;
    bt[(2, 3)] = kc * q / t2 - 2.0 * q * d / t3;
    bt[(3, 3)] = -2.0 * d / t3;
    let mut bu = Matrix4::zeros();
    bu[(2, 1)] = (nu - kc) / t;
    (bt, bu)
}

/// Lower 3x3 block b of B, acting on w = (u, E, z).
pub fn diffusion_block(state: &State, params: &ModelParams) -> Matrix3<f64> {
    diffusion(state, params).fixed_view::<3, 3>(1, 1).into_owned()
}

pub fn flux_jet(state: &State, params: &ModelParams) -> Result<FluxJet> {
    let th = thermo(state, params)?;
    let s = params.s;
    let (t, u, e_tot, z) = (state.tau, state.u, state.E, state.z);
    let p = th.p;
    let dp = pressure_gradient(state, params)?;

    let f = Vector4::new(-u - s * t, p - s * u, p * u - s * e_tot, -s * z);
    let mut df = Matrix4::zeros();
    df[(0, 0)] = -s;
    df[(0, 1)] = -1.0;
    for j in 0..4 {
        df[(1, j)] = dp[j];
        df[(2, j)] = u * dp[j];
    }
    df[(1, 1)] -= s;
    df[(2, 1)] += p;
    df[(2, 2)] -= s;
    df[(3, 3)] = -s;

    let (phi, dphi) = ignition(th.T, params);
    let k = params.krate;
    let c = params.cheat;
    let mut g = Vector4::zeros();
    let mut dg = Matrix4::zeros();
    if phi != 0.0 || dphi != 0.0 {
        g[3] = -k * phi * z;
        // T = (E - u^2/2 - q z)/c
        dg[(3, 1)] = k * dphi * z * u / c;
        dg[(3, 2)] = -k * dphi * z / c;
        dg[(3, 3)] = k * dphi * z * params.qheat / c - k * phi;
    }
    Ok(FluxJet { F: f, dF: df, B: diffusion(state, params), G: g, dG: dg })
}
