//! Banded LU with partial pivoting for the collocation Jacobians.

#[derive(Debug, Clone)]
pub struct Banded {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded { n, kl, ku, width, data: vec![0.0; n * width], piv: vec![0; n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku, "({i},{j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                y[i] += self.get(i, j) * x[j];
            }
        }
        y
    }

    /// In-place factorization. Returns false on an exactly singular pivot.
    pub fn factor(&mut self) -> bool {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for i in 0..n {
            let last = (i + kl).min(n - 1);
            let mut p = i;
            let mut best = self.get(i, i).abs();
            for r in i + 1..=last {
                let v = self.get(r, i).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            self.piv[i] = p;
            if best == 0.0 {
                return false;
            }
            let jmax = (i + kl + ku).min(n - 1);
            if p != i {
                for j in i..=jmax {
                    let a = self.idx(i, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let d = self.get(i, i);
            for r in i + 1..=last {
                let l = self.get(r, i) / d;
                let k = self.idx(r, i);
                self.data[k] = l;
                if l != 0.0 {
                    for j in i + 1..=jmax {
                        let u = self.get(i, j);
                        if u != 0.0 {
                            let k = self.idx(r, j);
                            self.data[k] -= l * u;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for i in 0..n {
            let p = self.piv[i];
            if p != i {
                b.swap(i, p);
            }
            let bi = b[i];
            for r in i + 1..=(i + kl).min(n - 1) {
                b[r] -= self.get(r, i) * bi;
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                acc -= self.get(i, j) * b[j];
            }
            b[i] = acc / self.get(i, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_solve_matches_dense() {
        let (n, kl, ku) = (40, 3, 2);
        let mut a = Banded::zeros(n, kl, ku);
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal to force pivoting
                let v = ((i * 31 + j * 17) % 11) as f64 - 5.0 + if i == j { 0.01 } else { 0.0 };
                a.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = a.matvec(&x);
        let bd = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..n {
            assert!((b[i] - bd[i]).abs() < 1e-12);
        }
        assert!(a.factor());
        a.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-9, "{i}: {} vs {}", b[i], x[i]);
        }
    }
}
