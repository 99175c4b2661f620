//! Banded LU with partial pivoting and banded Cholesky factorisations.

use crate::error::{Error, Result};

/// Square band matrix. Row `i` stores columns `i - kl ..= i + kl + ku`; the extra
/// `kl` upper diagonals hold fill-in from row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to entry `(i, j)`; `j` must lie within `i - kl ..= i + ku`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band"
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Solves `A x = b` in place of `b`, consuming the matrix.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let (n, kl) = (self.n, self.kl);
        let reach = kl + self.ku;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= f64::EPSILON * scale * n as f64 || best == 0.0 {
                return Err(Error::Linear(format!("singular pivot at row {k}")));
            }
            let jend = (k + reach).min(n - 1);
            if piv != k {
                for j in k..=jend {
                    let (a, c) = (self.slot(k, j), self.slot(piv, j));
                    self.data.swap(a, c);
                }
                b.swap(k, piv);
            }
            let d = self.data[self.slot(k, k)];
            for i in k + 1..=last {
                let sik = self.slot(i, k);
                let l = self.data[sik] / d;
                if l == 0.0 {
                    continue;
                }
                self.data[sik] = l;
                for j in k + 1..=jend {
                    let (sij, skj) = (self.slot(i, j), self.slot(k, j));
                    self.data[sij] -= l * self.data[skj];
                }
                b[i] -= l * b[k];
            }
        }
        for i in (0..n).rev() {
            let jend = (i + reach).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=jend {
                acc -= self.data[self.slot(i, j)] * b[j];
            }
            b[i] = acc / self.data[self.slot(i, i)];
        }
        Ok(())
    }
}

/// Cholesky factor of a symmetric positive definite band matrix with `k`
/// sub-diagonals, stored by rows as `L[i][i - k ..= i]`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Zero lower band; fill with [`BandCholesky::add`] then call [`BandCholesky::factor`].
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            data: vec![0.0; n * (k + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * (self.k + 1) + (j + self.k - i)
    }

    /// Adds `v` to the symmetric entry `(i, j)`; only `j <= i` is stored.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        assert!(i - j <= self.k, "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.data[self.slot(i, i)]
    }

    pub fn factor(mut self) -> Result<Self> {
        let (n, k) = (self.n, self.k);
        for i in 0..n {
            let j0 = i.saturating_sub(k);
            for j in j0..=i {
                let mut acc = self.data[self.slot(i, j)];
                for l in j0.max(j.saturating_sub(k))..j {
                    acc -= self.data[self.slot(i, l)] * self.data[self.slot(j, l)];
                }
                if j == i {
                    if !(acc > 0.0) {
                        return Err(Error::Linear(format!(
                            "matrix not positive definite at row {i}"
                        )));
                    }
                    let s = self.slot(i, i);
                    self.data[s] = acc.sqrt();
                } else {
                    let s = self.slot(i, j);
                    self.data[s] = acc / self.data[self.slot(j, j)];
                }
            }
        }
        Ok(self)
    }

    /// Solves with a factor produced by [`BandCholesky::factor`].
    pub fn solve(&self, b: &mut [f64]) {
        let (n, k) = (self.n, self.k);
        for i in 0..n {
            let mut acc = b[i];
            for j in i.saturating_sub(k)..i {
                acc -= self.data[self.slot(i, j)] * b[j];
            }
            b[i] = acc / self.data[self.slot(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..(i + k + 1).min(n) {
                acc -= self.data[self.slot(j, i)] * b[j];
            }
            b[i] = acc / self.data[self.slot(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, kl, ku) = (40, 3, 5);
        let mut dense = vec![vec![0.0; n]; n];
        let mut band = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces pivoting
                let v = if i == j {
                    0.01
                } else {
                    rng.gen_range(-1.0..1.0)
                };
                dense[i][j] = v;
                band.add(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum())
            .collect();
        band.solve(&mut b).unwrap();
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-9, "{a} vs {e}");
        }
    }

    #[test]
    fn cholesky_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, k) = (30, 4);
        let mut dense = vec![vec![0.0; n]; n];
        let mut band = BandCholesky::zeros(n, k);
        for i in 0..n {
            for j in i.saturating_sub(k)..i {
                let v = rng.gen_range(-1.0..1.0);
                dense[i][j] = v;
                dense[j][i] = v;
                band.add(i, j, v);
            }
            dense[i][i] = 10.0;
            band.add(i, i, 10.0);
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum())
            .collect();
        band.factor().unwrap().solve(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
        let mut indefinite = BandCholesky::zeros(2, 1);
        indefinite.add(0, 0, 1.0);
        indefinite.add(1, 0, 2.0);
        indefinite.add(1, 1, 1.0);
        assert!(indefinite.factor().is_err());
    }

    #[test]
    fn singular_is_reported() {
        let band = BandMatrix::zeros(3, 1, 1);
        assert!(band.solve(&mut [1.0, 2.0, 3.0]).is_err());
    }
}
