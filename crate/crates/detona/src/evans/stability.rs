//! Argument-principle stability check on the right-half-plane contour, the
//! Evans derivative at the origin and the Lopatinski determinant.

use nalgebra::{Matrix3, Matrix4, Vector4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contour::{consistent_split, winding_number, Contour, REFINE_ANGLE};
use super::kato::{self, Subspace};
use super::{evans_from, subspace_chain, subspaces_at, EvansOptions, EvansSample};
use crate::endstates::EndstatePair;
use crate::error::{DetonaError, Result};
use crate::model::{flux_jet, thermo, ModelParams};
use crate::spectral::{CoefficientField, Side};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable(i64),
    Inconclusive(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityOptions {
    pub evans: EvansOptions,
    pub r0: Option<f64>,
    pub radius: Option<f64>,
    pub n_arc: usize,
    pub n_axis: usize,
    pub n_indent: usize,
    pub n_circle: usize,
    pub max_rounds: usize,
    pub max_doublings: usize,
    /// Required |D'(0)| r0 relative to the median |D| on the indent circle.
    pub simple_zero_ratio: f64,
    /// Test harness: multiply D by prod (lambda - mu_j).
    pub injected_roots: Vec<C64>,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            evans: EvansOptions::default(),
            r0: None,
            radius: None,
            n_arc: 24,
            n_axis: 40,
            n_indent: 6,
            n_circle: 32,
            max_rounds: 12,
            max_doublings: 3,
            simple_zero_ratio: 0.1,
            injected_roots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeAtZero {
    pub r0: f64,
    pub d0: C64,
    pub dprime: C64,
    pub dprime_fd: C64,
    pub scale: f64,
    pub samples: Vec<EvansSample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub winding: Option<i64>,
    pub r0: f64,
    pub radius: f64,
    /// (R, winding) for each radius tried.
    pub radius_history: Vec<(f64, i64)>,
    pub origin: Option<DerivativeAtZero>,
    pub min_conditioning: f64,
    pub samples: Vec<EvansSample>,
}

/// Default high-frequency radius 10 (1 + s^2 + sigma^2 + nu + kappa/c + d)^2.
pub fn default_radius(params: &ModelParams, pair: &EndstatePair) -> Result<f64> {
    let sm = thermo(&pair.left, params)?.sigma;
    let sp = thermo(&pair.right, params)?.sigma;
    let visc = params.nu + params.kappa / params.cheat + params.dcoef;
    Ok(10.0 * (1.0 + params.s.powi(2) + sm.max(sp).powi(2) + visc).powi(2))
}

fn modifier(opts: &StabilityOptions, l: C64) -> C64 {
    opts.injected_roots.iter().fold(C64::new(1.0, 0.0), |acc, m| acc * (l - m))
}

struct Point {
    t: f64,
    sub: (Subspace, Subspace),
    sample: EvansSample,
    /// The segment to the next point passed the midpoint check.
    verified: bool,
}

fn evaluate<F: CoefficientField>(field: &F, sub: (Subspace, Subspace), t: f64, opts: &StabilityOptions) -> Result<Point> {
    let mut sample = evans_from(field, &sub.0, &sub.1, &opts.evans)?;
    sample.d *= modifier(opts, sample.lambda);
    Ok(Point { t, sub, sample, verified: false })
}

/// Samples of D along the upper half D-contour, refined until argument steps are below REFINE_ANGLE.
fn sample_upper<F: CoefficientField>(field: &F, contour: &Contour, opts: &StabilityOptions) -> Result<Vec<Point>> {
    let mut ts: Vec<f64> = Vec::new();
    for k in 0..opts.n_arc {
        ts.push(k as f64 / opts.n_arc as f64 / 3.0);
    }
    for k in 0..opts.n_axis {
        ts.push((1.0 + k as f64 / opts.n_axis as f64) / 3.0);
    }
    for k in 0..=opts.n_indent {
        ts.push((2.0 + k as f64 / opts.n_indent as f64) / 3.0);
    }
    let lams: Vec<C64> = ts.iter().map(|&t| contour.at(t)).collect();
    let chain = subspace_chain(field, &lams, &opts.evans)?;
    let mut pts: Vec<Point> = chain
        .into_par_iter()
        .zip(ts.par_iter())
        .map(|(sub, &t)| evaluate(field, sub, t, opts))
        .collect::<Result<_>>()?;
    let coeffs = (field.end_coeffs(Side::Minus), field.end_coeffs(Side::Plus));
    let midpoint = |pts: &[Point], i: usize| -> Result<Point> {
        let t = 0.5 * (pts[i].t + pts[i + 1].t);
        let l = contour.at(t);
        let m = kato::transport(&coeffs.0, &pts[i].sub.0, l, opts.evans.kato_tol)?;
        let p = kato::transport(&coeffs.1, &pts[i].sub.1, l, opts.evans.kato_tol)?;
        evaluate(field, (m, p), t, opts)
    };
    let step = |pts: &[Point], i: usize| (pts[i + 1].sample.d / pts[i].sample.d).arg().abs();
    for _ in 0..opts.max_rounds {
        let coarse: Vec<usize> = (0..pts.len() - 1).filter(|&i| step(&pts, i) >= REFINE_ANGLE).collect();
        if !coarse.is_empty() {
            let new: Vec<Point> = coarse.par_iter().map(|&i| midpoint(&pts, i)).collect::<Result<_>>()?;
            for &i in &coarse {
                pts[i].verified = false;
            }
            pts.extend(new);
            pts.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
            continue;
        }
        // every segment is fine at its ends; check the unverified ones at their midpoints
        let open: Vec<usize> = (0..pts.len() - 1).filter(|&i| !pts[i].verified).collect();
        if open.is_empty() {
            break;
        }
        let mut new: Vec<Point> = open.par_iter().map(|&i| midpoint(&pts, i)).collect::<Result<_>>()?;
        for (m, &i) in new.iter_mut().zip(&open) {
            let ok = consistent_split(pts[i].sample.d, m.sample.d, pts[i + 1].sample.d);
            pts[i].verified = ok;
            m.verified = ok;
        }
        pts.extend(new);
        pts.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    }
    Ok(pts)
}

/// Closed list of D values: the upper half followed by the mirrored lower half.
fn closed_values(pts: &[Point]) -> Vec<C64> {
    let mut v: Vec<C64> = pts.iter().map(|p| p.sample.d).collect();
    let n = v.len();
    for i in (1..n - 1).rev() {
        v.push(v[i].conj());
    }
    v
}

/// Winding number of D on the D-contour with indent r0 and radius R.
pub fn contour_winding<F: CoefficientField>(field: &F, r0: f64, radius: f64, opts: &StabilityOptions) -> Result<(i64, Vec<EvansSample>)> {
    let contour = Contour::upper_d(r0, radius);
    let pts = sample_upper(field, &contour, opts)?;
    let w = winding_number(&closed_values(&pts))?;
    Ok((w, pts.into_iter().map(|p| p.sample).collect()))
}

/// D(0) by the mean value and D'(0) by the Cauchy integral on |lambda| = r0.
pub fn derivative_at_zero<F: CoefficientField>(field: &F, r0: f64, n: usize, opts: &EvansOptions) -> Result<DerivativeAtZero> {
    let n = n.max(4) & !1;
    let pts: Vec<C64> = (0..n).map(|k| C64::from_polar(r0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    let start = subspaces_at(field, pts[0], opts)?;
    let mut chain = vec![start];
    let (cm, cp) = (field.end_coeffs(Side::Minus), field.end_coeffs(Side::Plus));
    for k in 1..n {
        // two chords per step keep the path close to the circle
        let mid = C64::from_polar(r0, 2.0 * std::f64::consts::PI * (k as f64 - 0.5) / n as f64);
        let (pm, pp) = &chain[k - 1];
        let m = kato::transport_path(&cm, pm, &[mid, pts[k]], opts.kato_tol)?;
        let p = kato::transport_path(&cp, pp, &[mid, pts[k]], opts.kato_tol)?;
        chain.push((m, p));
    }
    let samples: Vec<EvansSample> = chain.par_iter().map(|(m, p)| evans_from(field, m, p, opts)).collect::<Result<_>>()?;
    Ok(summarize_circle(r0, samples))
}

fn summarize_circle(r0: f64, samples: Vec<EvansSample>) -> DerivativeAtZero {
    let n = samples.len();
    let nf = n as f64;
    let d0 = samples.iter().map(|s| s.d).sum::<C64>() / nf;
    let dprime = samples.iter().map(|s| s.d / s.lambda).sum::<C64>() / nf;
    let dprime_fd = (samples[0].d - samples[n / 2].d) / (2.0 * r0);
    let mut mags: Vec<f64> = samples.iter().map(|s| s.d.norm()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = mags[n / 2];
    DerivativeAtZero { r0, d0, dprime, dprime_fd, scale, samples }
}

/// Stable iff the winding on the D-contour vanishes and the origin zero is simple.
pub fn stability_check<F: CoefficientField>(field: &F, params: &ModelParams, pair: &EndstatePair, opts: &StabilityOptions) -> StabilityReport {
    let r0 = opts.r0.unwrap_or(1e-3 * params.s.min(1.0));
    let mut radius = opts.radius.unwrap_or_else(|| default_radius(params, pair).unwrap_or(100.0));
    let mut report = StabilityReport {
        verdict: Verdict::Inconclusive("not run".into()),
        winding: None,
        r0,
        radius,
        radius_history: Vec::new(),
        origin: None,
        min_conditioning: f64::INFINITY,
        samples: Vec::new(),
    };
    let mut last: Option<i64> = None;
    let mut accepted = false;
    for _ in 0..=opts.max_doublings {
        match contour_winding(field, r0, radius, opts) {
            Ok((w, samples)) => {
                report.radius_history.push((radius, w));
                report.min_conditioning = samples.iter().map(|s| s.conditioning).fold(report.min_conditioning, f64::min);
                if last == Some(w) {
                    accepted = true;
                    break;
                }
                last = Some(w);
                report.samples = samples;
                report.radius = radius;
                report.winding = Some(w);
                radius *= 2.0;
            }
            Err(e) => {
                report.verdict = Verdict::Inconclusive(format!("contour at R = {radius}: {e}"));
                return report;
            }
        }
    }
    if !accepted {
        report.verdict = Verdict::Inconclusive("winding did not stabilize under doubling R".into());
        return report;
    }
    match derivative_at_zero(field, r0, opts.n_circle, &opts.evans) {
        Ok(mut o) => {
            for s in o.samples.iter_mut() {
                s.d *= modifier(opts, s.lambda);
            }
            report.origin = Some(summarize_circle(r0, o.samples));
        }
        Err(e) => {
            report.verdict = Verdict::Inconclusive(format!("origin indent: {e}"));
            return report;
        }
    }
    let w = report.winding.unwrap_or(0);
    let o = report.origin.as_ref().unwrap();
    report.verdict = if report.min_conditioning <= 1e-8 {
        Verdict::Inconclusive(format!("conditioning {:.2e}", report.min_conditioning))
    } else if w >= 1 {
        Verdict::Unstable(w)
    } else if w < 0 {
        Verdict::Inconclusive(format!("negative winding {w}"))
    } else if o.dprime.norm() * r0 > opts.simple_zero_ratio * o.scale {
        Verdict::Stable
    } else {
        Verdict::Inconclusive("zero at the origin is not simple".into())
    };
    report
}

/// Outgoing right eigenvectors r_1, r_2, r_4 of dF(U_-) normalized by l_j A r_k = -delta_jk.
///
/// Fluid left eigenvectors are unit vectors in (tau, u, E) with the largest entry positive;
/// the reactive one is (0, 0, 0, 1).
pub fn lopatinski_vectors(pair: &EndstatePair, params: &ModelParams) -> Result<[Vector4<f64>; 4]> {
    let jet = flux_jet(&pair.left, params)?;
    let a = jet.dF;
    let af: Matrix3<f64> = a.fixed_view::<3, 3>(0, 0).into_owned();
    let az = a.fixed_view::<3, 1>(0, 3).into_owned();
    let s = params.s;
    let sigma = thermo(&pair.left, params)?.sigma;
    let speeds = [-s - sigma, -s, -s + sigma, -s];
    let mut l = Matrix4::<f64>::zeros();
    for j in 0..3 {
        let m = af.transpose() - Matrix3::identity() * speeds[j];
        let svd = m.svd(false, true);
        let vt = svd.v_t.ok_or(DetonaError::DegenerateEigenvector)?;
        let k = (0..3).min_by(|&x, &y| svd.singular_values[x].partial_cmp(&svd.singular_values[y]).unwrap()).unwrap();
        let mut lf = vt.row(k).transpose().into_owned();
        let big = (0..3).max_by(|&x, &y| lf[x].abs().partial_cmp(&lf[y].abs()).unwrap()).unwrap();
        if lf[big] < 0.0 {
            lf = -lf;
        }
        let x = if j == 1 { 0.0 } else { lf.dot(&az) / (speeds[j] + s) };
        for c in 0..3 {
            l[(j, c)] = lf[c];
        }
        l[(j, 3)] = x;
    }
    l[(3, 3)] = 1.0;
    let linv = l.try_inverse().ok_or(DetonaError::DegenerateEigenvector)?;
    let r: [Vector4<f64>; 4] = std::array::from_fn(|k| -linv.column(k) / speeds[k]);
    // the normalization l_j A r_k = -delta_jk must hold
    for j in 0..4 {
        for k in 0..4 {
            let v = (l.row(j) * a * r[k])[(0, 0)];
            let want = if j == k { -1.0 } else { 0.0 };
            if (v - want).abs() > 1e-8 * (1.0 + a.norm()) {
                return Err(DetonaError::DegenerateEigenvector);
            }
        }
    }
    Ok(r)
}

/// det(r_1^-, r_2^-, r_4^-, U_+ - U_-).
pub fn lopatinski_delta(pair: &EndstatePair, params: &ModelParams) -> Result<f64> {
    let r = lopatinski_vectors(pair, params)?;
    let jump = pair.right.to_vec() - pair.left.to_vec();
    Ok(Matrix4::from_columns(&[r[0], r[1], r[3], jump]).determinant())
}
