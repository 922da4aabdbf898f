//! Small numerical kernels shared by the solvers.

pub mod banded;
pub mod eig;
pub mod ode;

use num_complex::Complex64;

pub type C64 = Complex64;

/// View a complex slice as interleaved (re, im) reals.
pub fn as_reals(z: &[C64]) -> &[f64] {
    // Complex<f64> is #[repr(C)] { re, im }
    unsafe { std::slice::from_raw_parts(z.as_ptr() as *const f64, 2 * z.len()) }
}

pub fn as_reals_mut(z: &mut [C64]) -> &mut [f64] {
    unsafe { std::slice::from_raw_parts_mut(z.as_mut_ptr() as *mut f64, 2 * z.len()) }
}

pub fn as_complex(x: &[f64]) -> &[C64] {
    assert!(x.len() % 2 == 0);
    unsafe { std::slice::from_raw_parts(x.as_ptr() as *const C64, x.len() / 2) }
}

pub fn as_complex_mut(x: &mut [f64]) -> &mut [C64] {
    assert!(x.len() % 2 == 0);
    unsafe { std::slice::from_raw_parts_mut(x.as_mut_ptr() as *mut C64, x.len() / 2) }
}

/// Roots of sum_k coeffs[k] x^k via companion-matrix eigenvalues.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let mut c: Vec<C64> = coeffs.to_vec();
    while c.len() > 1 && c.last().map_or(false, |v| v.norm() == 0.0) {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = c[n];
    let mut m = nalgebra::DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    let mut roots = eig::eigenvalues(&m);
    // one Newton polish per root
    for r in roots.iter_mut() {
        let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for k in (0..=n).rev() {
            dp = dp * *r + p;
            p = p * *r + c[k];
        }
        if dp.norm() > 0.0 {
            let step = p / dp;
            if step.norm() < 1e-6 * (1.0 + r.norm()) {
                *r -= step;
            }
        }
    }
    roots
}
