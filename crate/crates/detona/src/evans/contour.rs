//! Closed contours and argument-principle winding numbers.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{DetonaError, Result};

/// Closed, positively oriented contour given by a parametrization on t in [0, 1).
#[derive(Clone)]
pub struct Contour {
    pub name: String,
    pub path: std::sync::Arc<dyn Fn(f64) -> C64 + Send + Sync>,
    pub r0: f64,
    pub radius: f64,
}

impl std::fmt::Debug for Contour {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Contour({}, r0 = {}, R = {})", self.name, self.r0, self.radius)
    }
}

impl Contour {
    pub fn at(&self, t: f64) -> C64 {
        (self.path)(t)
    }

    pub fn circle(center: C64, radius: f64) -> Self {
        Contour {
            name: "circle".into(),
            path: std::sync::Arc::new(move |t| center + C64::from_polar(radius, 2.0 * PI * t)),
            r0: 0.0,
            radius,
        }
    }

    /// Counterclockwise rectangle [lo.re, hi.re] x [lo.im, hi.im].
    pub fn rectangle(lo: C64, hi: C64) -> Self {
        let (w, h) = (hi.re - lo.re, hi.im - lo.im);
        let per = 2.0 * (w + h);
        Contour {
            name: "rectangle".into(),
            path: std::sync::Arc::new(move |t| {
                let mut d = t.rem_euclid(1.0) * per;
                if d < w {
                    return C64::new(lo.re + d, lo.im);
                }
                d -= w;
                if d < h {
                    return C64::new(hi.re, lo.im + d);
                }
                d -= h;
                if d < w {
                    return C64::new(hi.re - d, hi.im);
                }
                d -= w;
                C64::new(lo.re, hi.im - d)
            }),
            r0: 0.0,
            radius: w.max(h),
        }
    }

    /// Upper half of the right-half-plane D-contour: arc R -> iR, axis iR -> i r0,
    /// quarter indent i r0 -> r0. The lower half is its mirror image.
    pub fn upper_d(r0: f64, radius: f64) -> Self {
        Contour {
            name: "d_contour_upper".into(),
            path: std::sync::Arc::new(move |t| {
                let t = t.clamp(0.0, 1.0);
                if t < 1.0 / 3.0 {
                    C64::from_polar(radius, 1.5 * PI * t)
                } else if t < 2.0 / 3.0 {
                    let u = 3.0 * t - 1.0;
                    C64::new(0.0, radius * (r0 / radius).powf(u))
                } else {
                    let u = 3.0 * t - 2.0;
                    C64::from_polar(r0, 0.5 * PI * (1.0 - u))
                }
            }),
            r0,
            radius,
        }
    }

    /// Full right-half-plane D-contour: the upper half followed by its mirror image.
    pub fn d_contour(r0: f64, radius: f64) -> Self {
        let upper = Contour::upper_d(r0, radius);
        let up = upper.path.clone();
        Contour {
            name: "d_contour".into(),
            path: std::sync::Arc::new(move |t| {
                let t = t.rem_euclid(1.0);
                if t < 0.5 {
                    up(2.0 * t)
                } else {
                    up(2.0 - 2.0 * t).conj()
                }
            }),
            r0,
            radius,
        }
    }
}

fn arg_step(a: C64, b: C64) -> f64 {
    (b / a).arg()
}

/// Winding number of the closed polygon of nonzero values (last point joins the first).
/// Every increment of the argument must be below pi/2.
pub fn winding_number(values: &[C64]) -> Result<i64> {
    if values.is_empty() {
        return Ok(0);
    }
    let mut total = 0.0;
    for i in 0..values.len() {
        let (a, b) = (values[i], values[(i + 1) % values.len()]);
        if a.norm() == 0.0 || !a.re.is_finite() {
            return Err(DetonaError::RefinementLimit(format!("zero or non-finite value at sample {i}")));
        }
        let d = arg_step(a, b);
        if d.abs() >= 0.5 * PI {
            return Err(DetonaError::RefinementLimit(format!("argument increment {d:.3} at sample {i}")));
        }
        total += d;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Total argument change divided by 2 pi over a dense uniform sampling (no checks).
pub fn argument_sum<G: Fn(C64) -> C64>(f: G, contour: &Contour, n: usize) -> f64 {
    let vals: Vec<C64> = (0..n).map(|k| f(contour.at(k as f64 / n as f64))).collect();
    let mut total = 0.0;
    for i in 0..n {
        total += arg_step(vals[i], vals[(i + 1) % n]);
    }
    total / (2.0 * PI)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContourSample {
    pub t: f64,
    pub lambda: C64,
    pub value: C64,
}

/// Threshold for refining a contour segment.
pub const REFINE_ANGLE: f64 = PI / 3.0;

/// Midpoint check of one segment: both halves below REFINE_ANGLE and adding up to the whole.
pub fn consistent_split(a: C64, m: C64, b: C64) -> bool {
    let (h1, h2) = (arg_step(a, m), arg_step(m, b));
    h1.abs() < REFINE_ANGLE && h2.abs() < REFINE_ANGLE && (h1 + h2 - arg_step(a, b)).abs() < 1e-9
}

/// Adaptive winding number of an analytic function on a closed contour.
///
/// Segments are bisected while the argument step reaches REFINE_ANGLE; each
/// surviving segment is then checked at its midpoint, which catches steps that
/// alias a full turn.
pub fn winding_adaptive<G: Fn(C64) -> C64>(f: G, contour: &Contour, n0: usize, max_rounds: usize) -> Result<(i64, Vec<ContourSample>)> {
    let sample = |t: f64| {
        let l = contour.at(t);
        ContourSample { t, lambda: l, value: f(l) }
    };
    // (sample, segment to the next sample verified)
    let mut pts: Vec<(ContourSample, bool)> = (0..n0).map(|k| (sample(k as f64 / n0 as f64), false)).collect();
    let mut rounds = 0;
    loop {
        let n = pts.len();
        let mut out = Vec::with_capacity(2 * n);
        let mut changed = false;
        let coarse = (0..n).any(|i| arg_step(pts[i].0.value, pts[(i + 1) % n].0.value).abs() >= REFINE_ANGLE);
        for i in 0..n {
            let (a, verified) = pts[i].clone();
            let (tb, vb) = if i + 1 < n { (pts[i + 1].0.t, pts[i + 1].0.value) } else { (1.0, pts[0].0.value) };
            let step = arg_step(a.value, vb).abs();
            if step >= REFINE_ANGLE {
                let m = sample(0.5 * (a.t + tb));
                out.push((a, false));
                out.push((m, false));
                changed = true;
            } else if !verified && !coarse {
                let m = sample(0.5 * (a.t + tb));
                let ok = consistent_split(a.value, m.value, vb);
                out.push((a, ok));
                out.push((m, ok));
                changed |= !ok;
            } else {
                out.push((a, verified));
            }
        }
        pts = out;
        rounds += 1;
        if !changed || rounds >= max_rounds {
            break;
        }
    }
    let samples: Vec<ContourSample> = pts.into_iter().map(|(s, _)| s).collect();
    let vals: Vec<C64> = samples.iter().map(|s| s.value).collect();
    Ok((winding_number(&vals)?, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_windings() {
        let l0 = C64::new(0.3, -0.2);
        let (w, _) = winding_adaptive(|l| l - l0, &Contour::circle(l0, 0.5), 8, 20).unwrap();
        assert_eq!(w, 1);
        let f = |l: C64| (l * l + 1.0) * l.exp();
        let rect = Contour::rectangle(C64::new(-1.0, -2.0), C64::new(1.0, 2.0));
        let (w, _) = winding_adaptive(f, &rect, 16, 20).unwrap();
        assert_eq!(w, 2);
        assert!((argument_sum(f, &rect, 40000) - 2.0).abs() < 1e-6);
        let (w, _) = winding_adaptive(|_| C64::new(2.0, 1.0), &rect, 8, 5).unwrap();
        assert_eq!(w, 0);
        // a full turn of e^lambda between two coarse samples on the axis must not be missed
        let g = |l: C64| (l + 1.0) * (l + C64::new(2.0, 3.0)) * l.exp();
        let (w, _) = winding_adaptive(g, &Contour::d_contour(1e-3, 10.0), 64, 20).unwrap();
        assert_eq!(w, 0);
    }

    #[test]
    fn coarse_samples_are_rejected() {
        let vals: Vec<C64> = (0..3).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / 3.0)).collect();
        assert!(matches!(winding_number(&vals), Err(DetonaError::RefinementLimit(_))));
    }

    #[test]
    fn d_contour_endpoints() {
        let c = Contour::upper_d(1e-3, 100.0);
        assert!((c.at(0.0) - C64::new(100.0, 0.0)).norm() < 1e-12);
        assert!((c.at(1.0 / 3.0) - C64::new(0.0, 100.0)).norm() < 1e-9);
        assert!((c.at(2.0 / 3.0) - C64::new(0.0, 1e-3)).norm() < 1e-12);
        assert!((c.at(1.0) - C64::new(1e-3, 0.0)).norm() < 1e-12);
        let full = Contour::d_contour(1e-3, 100.0);
        assert!((full.at(5.0 / 6.0) - C64::new(0.0, -100.0)).norm() < 1e-9);
        let (w, _) = winding_adaptive(|l| (l - C64::new(2.0, 3.0)) * (l - C64::new(2.0, -3.0)) * (l + 1.0), &full, 32, 20).unwrap();
        assert_eq!(w, 2);
    }
}
