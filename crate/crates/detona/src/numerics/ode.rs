//! Adaptive Dormand-Prince 5(4) integrator on real slices.

use crate::error::{DetonaError, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub hmax: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, h0: 0.0, hmax: f64::INFINITY, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub last_h: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate y' = f(x, y) from x0 to x1 (either direction), overwriting y.
pub fn dopri5<F>(f: F, x0: f64, x1: f64, y: &mut [f64], opts: &OdeOptions) -> Result<OdeStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    dopri5_hooked(f, |_, _| {}, x0, x1, y, opts)
}

/// As `dopri5`, calling `hook(x, y)` after each accepted step; the hook may modify y.
pub fn dopri5_hooked<F, H>(mut f: F, mut hook: H, x0: f64, x1: f64, y: &mut [f64], opts: &OdeOptions) -> Result<OdeStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    H: FnMut(f64, &mut [f64]),
{
    let n = y.len();
    let mut stats = OdeStats::default();
    if x1 == x0 {
        return Ok(stats);
    }
    let dir = (x1 - x0).signum();
    let span = (x1 - x0).abs();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut x = x0;
    f(x, y, &mut k[0]);

    let mut h = if opts.h0 > 0.0 {
        opts.h0
    } else {
        let d0 = rms_scaled(y, y, y, opts);
        let d1 = rms_scaled(&k[0], y, y, opts);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span)
    };
    h = h.min(opts.hmax);
    let mut last_err: f64 = 1e-4;

    loop {
        if stats.accepted + stats.rejected > opts.max_steps {
            return Err(DetonaError::StiffnessFailure(x));
        }
        let remaining = (x1 - x).abs();
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        let hs = dir * h;
        let stage = |tmp: &mut Vec<f64>, k: &Vec<Vec<f64>>, coeffs: &[(usize, f64)]| {
            for i in 0..n {
                let mut acc = y[i];
                for &(j, a) in coeffs {
                    acc += hs * a * k[j][i];
                }
                tmp[i] = acc;
            }
        };
        stage(&mut tmp, &k, &[(0, A21)]);
        f(x + C2 * hs, &tmp, &mut k[1]);
        stage(&mut tmp, &k, &[(0, A31), (1, A32)]);
        f(x + C3 * hs, &tmp, &mut k[2]);
        stage(&mut tmp, &k, &[(0, A41), (1, A42), (2, A43)]);
        f(x + C4 * hs, &tmp, &mut k[3]);
        stage(&mut tmp, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        f(x + C5 * hs, &tmp, &mut k[4]);
        stage(&mut tmp, &k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        f(x + hs, &tmp, &mut k[5]);
        for i in 0..n {
            ynew[i] = y[i] + hs * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
        }
        f(x + hs, &ynew, &mut k[6]);
        let mut err = 0.0;
        for i in 0..n {
            let e = hs * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            if h < 1e-14 * span.max(1.0) {
                return Err(DetonaError::StiffnessFailure(x));
            }
            continue;
        }
        if err <= 1.0 {
            stats.accepted += 1;
            x = if last { x1 } else { x + hs };
            y.copy_from_slice(&ynew);
            hook(x, y);
            stats.last_h = h;
            if last {
                return Ok(stats);
            }
            f(x, y, &mut k[0]);
            // PI controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0);
            h = (h * fac.clamp(0.2, 5.0)).min(opts.hmax);
            last_err = err.max(1e-4);
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * span.max(1.0) {
                return Err(DetonaError::StiffnessFailure(x));
            }
        }
    }
}

fn rms_scaled(v: &[f64], y0: &[f64], y1: &[f64], opts: &OdeOptions) -> f64 {
    let n = v.len().max(1);
    let s: f64 = v
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(vi, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (vi / sc).powi(2)
        })
        .sum();
    (s / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let mut y = vec![1.0];
        dopri5(|_, y, d| d[0] = -2.0 * y[0], 0.0, 3.0, &mut y, &OdeOptions::default()).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-11);
        let mut y = vec![1.0, 0.0];
        dopri5(|_, y, d| { d[0] = y[1]; d[1] = -y[0]; }, 0.0, -10.0, &mut y, &OdeOptions::default()).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] - 10f64.sin()).abs() < 1e-8);
    }
}
