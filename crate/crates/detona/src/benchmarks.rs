//! Parameter points used by the bundled configs and the test suites.

use crate::endstates::{construct_regime, solve_right_state, EndstatePair};
use crate::error::Result;
use crate::model::{EpsMap, IgnitionLaw, ModelParams, State};

/// Small-amplitude point: G = 1.2, burned state U_- = (1, 0, 1, 0), s = 0.9 sigma_-,
/// ignition just below T_- so that the reaction is slow and the wave is weak.
pub fn small_amplitude(q: f64) -> Result<(EndstatePair, ModelParams)> {
    let g = 1.2;
    let sigma = (g * (g + 1.0f64)).sqrt();
    let pr = ModelParams {
        nu: 1.0,
        kappa: 1.0,
        dcoef: 1.0,
        krate: 1.0,
        qheat: q,
        Gamma: g,
        cheat: 1.0,
        T_ign: 0.8672,
        ign_C: 1.0,
        ign_E: 0.1328,
        s: 0.9 * sigma,
        ignition: IgnitionLaw::Arrhenius,
        eps_map: EpsMap::default(),
    };
    let left = State::new(1.0, 0.0, 1.0, 0.0);
    Ok((solve_right_state(&left, q, 1.0, &pr)?, pr))
}

/// Heavily overdriven point with G = 1.2, activation 50 and q = 50 in the large-s regime.
pub fn fickett_woods_like() -> Result<(EndstatePair, ModelParams)> {
    let pr = ModelParams {
        nu: 1.0,
        kappa: 1.0,
        dcoef: 1.0,
        krate: 1.0,
        qheat: 50.0,
        Gamma: 1.2,
        cheat: 1.0,
        T_ign: 60.0,
        ign_C: 1.0,
        ign_E: 50.0,
        s: 200.0,
        ignition: IgnitionLaw::Arrhenius,
        eps_map: EpsMap { param: "qheat".into(), base: 50.0, slope: 1.0 },
    };
    let left = construct_regime(0.6, 0.5, 50.0, 1.0, None, &pr)?;
    Ok((solve_right_state(&left, 50.0, 1.0, &pr)?, pr))
}
