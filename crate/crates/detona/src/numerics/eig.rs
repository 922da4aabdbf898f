use nalgebra::{DMatrix, DVector};

use super::C64;

/// Eigen-decomposition of a general complex matrix: A = V diag(values) V^{-1}.
#[derive(Debug, Clone)]
pub struct Eig {
    pub values: Vec<C64>,
    /// Right eigenvectors as unit columns.
    pub right: DMatrix<C64>,
    /// Rows of V^{-1}: left eigenvectors with left.row(j) * right.column(k) = delta_jk.
    pub left: DMatrix<C64>,
}

pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    let (_, t) = nalgebra::Schur::new(m.clone()).unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

pub fn eig(m: &DMatrix<C64>) -> Eig {
    let n = m.nrows();
    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1e-300);
    let (q, t) = nalgebra::Schur::new(m.clone()).unpack();
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut right = DMatrix::<C64>::zeros(n, n);
    let tiny = 1e-14 * scale;
    for k in 0..n {
        let mut x = DVector::<C64>::zeros(n);
        x[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * x[j];
            }
            let mut den = t[(i, i)] - t[(k, k)];
            if den.norm() < tiny {
                den = C64::new(tiny, 0.0);
            }
            x[i] = -acc / den;
        }
        let v = &q * x;
        let nv = v.norm();
        right.set_column(k, &(v / C64::new(nv, 0.0)));
    }
    let left = right.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, C64::new(f64::NAN, 0.0)));
    Eig { values, right, left }
}

impl Eig {
    /// Spectral projector onto the span of the eigenvectors in `idx`.
    pub fn projector(&self, idx: &[usize]) -> DMatrix<C64> {
        let n = self.values.len();
        let mut p = DMatrix::<C64>::zeros(n, n);
        for &j in idx {
            p += self.right.column(j) * self.left.row(j);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_reconstructs_matrix() {
        let n = 6;
        let m = DMatrix::<C64>::from_fn(n, n, |i, j| {
            C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 * 0.3)
        });
        let e = eig(&m);
        for k in 0..n {
            let r = &m * e.right.column(k) - e.right.column(k) * e.values[k];
            assert!(r.norm() < 1e-11);
        }
        let id = &e.left * &e.right;
        assert!((id - DMatrix::<C64>::identity(n, n)).norm() < 1e-10);
    }

    #[test]
    fn projector_is_idempotent() {
        let m = DMatrix::<C64>::from_fn(4, 4, |i, j| C64::new((i as f64 + 1.0) * if i == j { 3.0 } else { 0.2 }, 0.1 * j as f64));
        let e = eig(&m);
        let p = e.projector(&[0, 2]);
        assert!((&p * &p - &p).norm() < 1e-12);
        assert!((p.trace().re - 2.0).abs() < 1e-12);
    }
}
