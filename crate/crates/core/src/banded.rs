//! Banded Gaussian elimination with partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals. Row `i` stores columns
/// `i - kl ..= i + ku + kl`; the extra `kl` columns absorb fill-in from pivoting.
#[derive(Clone, Debug)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width || j >= self.n {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map(|s| self.data[s]).unwrap_or(0.0)
    }

    /// Panics if `(i, j)` lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let off = j as isize - i as isize;
        assert!(
            off >= -(self.kl as isize) && off <= self.ku as isize,
            "entry ({i}, {j}) outside band"
        );
        let s = self.slot(i, j).expect("inside band");
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// `y = A x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solves `A X = B` in place for every right-hand side in `rhs`.
    pub fn solve(mut self, rhs: &mut [Vec<f64>]) -> Result<()> {
        let n = self.n;
        let w = self.width;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularSystem(k));
            }
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.slot(k, j).unwrap();
                    let b = self.slot(p, j).unwrap();
                    self.data.swap(a, b);
                }
                for r in rhs.iter_mut() {
                    r.swap(k, p);
                }
            }
            let piv = self.data[k * w + kl];
            for i in k + 1..=last {
                let si = self.slot(i, k).unwrap();
                let f = self.data[si] / piv;
                if f == 0.0 {
                    continue;
                }
                self.data[si] = 0.0;
                for j in k + 1..=jmax {
                    let a = self.get(k, j);
                    if a != 0.0 {
                        let s = self.slot(i, j).unwrap();
                        self.data[s] -= f * a;
                    }
                }
                for r in rhs.iter_mut() {
                    r[i] -= f * r[k];
                }
            }
        }
        for r in rhs.iter_mut() {
            for k in (0..n).rev() {
                let jmax = (k + reach).min(n - 1);
                let mut s = r[k];
                for j in k + 1..=jmax {
                    s -= self.get(k, j) * r[j];
                }
                r[k] = s / self.get(k, k);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tridiagonal_poisson() {
        let n = 50;
        let mut a = Banded::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul(&x);
        let mut rhs = vec![b];
        a.solve(&mut rhs).unwrap();
        for (u, v) in rhs[0].iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_pivoting() {
        // zero on the diagonal forces a row swap
        let mut a = Banded::zeros(3, 1, 1);
        a.set(0, 0, 0.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(1, 2, 1.0);
        a.set(2, 1, 1.0);
        a.set(2, 2, 3.0);
        let x = vec![1.0, -2.0, 0.5];
        let mut rhs = vec![a.mul(&x)];
        a.solve(&mut rhs).unwrap();
        for (u, v) in rhs[0].iter().zip(&x) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = Banded::zeros(4, 1, 1);
        assert!(matches!(a.solve(&mut [vec![0.0; 4]]), Err(Error::SingularSystem(0))));
    }

    proptest! {
        #[test]
        fn random_banded_roundtrip(seed in proptest::collection::vec(-1.0f64..1.0, 40 * 7), kl in 1usize..3, ku in 1usize..3) {
            let n = 40;
            let mut a = Banded::zeros(n, kl, ku);
            let mut it = seed.iter();
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let v = *it.next().unwrap_or(&0.3);
                    a.set(i, j, if i == j { v + 4.0 } else { v });
                }
            }
            let x: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
            let mut rhs = vec![a.mul(&x)];
            a.solve(&mut rhs).unwrap();
            for (u, v) in rhs[0].iter().zip(&x) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
