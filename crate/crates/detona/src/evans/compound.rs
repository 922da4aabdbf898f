//! Exterior-power (compound matrix) integration of the decaying subspaces.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use super::kato::CM;
use crate::spectral::M7;

pub const N: usize = 7;

pub struct Table {
    pub k: usize,
    pub sets: Vec<Vec<usize>>,
    index: Vec<usize>,
    /// (source set, target set, sign, row j, column i) contributions of A[j, i].
    entries: Vec<(usize, usize, f64, usize, usize)>,
}

fn mask(set: &[usize]) -> usize {
    set.iter().fold(0, |m, &i| m | (1 << i))
}

fn parity(v: &[usize]) -> f64 {
    let mut inv = 0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] > v[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 { 1.0 } else { -1.0 }
}

fn build(k: usize) -> Table {
    let mut sets = Vec::new();
    for m in 0usize..(1 << N) {
        if m.count_ones() as usize == k {
            sets.push((0..N).filter(|i| m & (1 << i) != 0).collect::<Vec<_>>());
        }
    }
    let mut index = vec![usize::MAX; 1 << N];
    for (a, s) in sets.iter().enumerate() {
        index[mask(s)] = a;
    }
    let mut entries = Vec::new();
    for (a, s) in sets.iter().enumerate() {
        for p in 0..k {
            for j in 0..N {
                if j != s[p] && s.contains(&j) {
                    continue;
                }
                let mut t = s.clone();
                t[p] = j;
                let sign = parity(&t);
                let b = index[mask(&t)];
                entries.push((a, b, sign, j, s[p]));
            }
        }
    }
    Table { k, sets, index, entries }
}

pub fn table(k: usize) -> &'static Table {
    static T3: OnceLock<Table> = OnceLock::new();
    static T4: OnceLock<Table> = OnceLock::new();
    match k {
        3 => T3.get_or_init(|| build(3)),
        4 => T4.get_or_init(|| build(4)),
        _ => panic!("compound tables exist for k = 3, 4"),
    }
}

impl Table {
    pub fn dim(&self) -> usize {
        self.sets.len()
    }

    /// Coordinates of the wedge product of the columns of `basis` (7 x k).
    pub fn wedge(&self, basis: &CM) -> Vec<C64> {
        self.sets
            .iter()
            .map(|s| CM::from_fn(self.k, self.k, |i, j| basis[(s[i], j)]).determinant())
            .collect()
    }

    /// out = (A^(k) - shift) zeta.
    pub fn apply(&self, a: &M7, shift: C64, zeta: &[C64], out: &mut [C64]) {
        for (o, z) in out.iter_mut().zip(zeta) {
            *o = -shift * z;
        }
        for &(src, dst, sign, j, i) in &self.entries {
            out[dst] += a[(j, i)] * zeta[src] * sign;
        }
    }

    pub fn complement_index(&self, set: usize, other: &Table) -> (usize, f64) {
        let s = &self.sets[set];
        let c: Vec<usize> = (0..N).filter(|i| !s.contains(i)).collect();
        let mut cat = s.clone();
        cat.extend(&c);
        (other.index[mask(&c)], parity(&cat))
    }
}

/// zeta_minus (k = 4) wedge zeta_plus (k = 3) as a multiple of e1 ^ ... ^ e7.
pub fn pairing(zm: &[C64], zp: &[C64]) -> C64 {
    let t4 = table(4);
    let t3 = table(3);
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..t4.dim() {
        let (b, sign) = t4.complement_index(a, t3);
        acc += zm[a] * zp[b] * sign;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(seed: u64) -> CM {
        let mut x = seed;
        CM::from_fn(7, 7, |_, _| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn pairing_equals_determinant() {
        let m = sample(3);
        let zm = table(4).wedge(&m.columns(0, 4).into_owned());
        let zp = table(3).wedge(&m.columns(4, 3).into_owned());
        assert!((pairing(&zm, &zp) - m.determinant()).norm() < 1e-12);
    }

    #[test]
    fn compound_is_derivation() {
        // d/dt wedge(e^{tA} V) at t = 0 equals A^(k) wedge(V)
        let a = sample(5);
        let a7 = M7::from_fn(|i, j| a[(i, j)]);
        let v = sample(9).columns(0, 3).into_owned();
        let t = table(3);
        let z = t.wedge(&v);
        let mut dz = vec![C64::new(0.0, 0.0); t.dim()];
        t.apply(&a7, C64::new(0.0, 0.0), &z, &mut dz);
        let h = 1e-6;
        let vp = &v + &a * &v * C64::new(h, 0.0);
        let vm = &v - &a * &v * C64::new(h, 0.0);
        let (zp, zm) = (t.wedge(&vp), t.wedge(&vm));
        for i in 0..t.dim() {
            let fd = (zp[i] - zm[i]) / (2.0 * h);
            assert!((fd - dz[i]).norm() < 1e-8);
        }
    }
}
