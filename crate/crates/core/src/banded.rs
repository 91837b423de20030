//! General band matrices with an LU factorization using partial pivoting.

use num_complex::ComplexFloat;

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `i` stores columns `i - kl ..= i + ku` in `data[i * width ..]`.
#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

impl<T: ComplexFloat> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            return T::zero();
        }
        self.data[i * self.width() + j + self.kl - i]
    }

    /// Adds `v` at `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "entry ({i},{j}) outside band");
        let w = self.width();
        let idx = i * w + j + self.kl - i;
        self.data[idx] = self.data[idx] + v;
    }

    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        let w = self.width();
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * w + j0 + self.kl - i..=i * w + j1 + self.kl - i];
            y[i] = row.iter().zip(&x[j0..=j1]).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
    }

    /// `alpha * self + beta * I`.
    pub fn scaled_plus_identity(&self, alpha: T, beta: T) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = *v * alpha;
        }
        for i in 0..self.n {
            out.add(i, i, beta);
        }
        out
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = BandMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n.saturating_sub(1));
            for j in j0..=j1 {
                out.add(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// Converts element type through `f`.
    pub fn map<U: ComplexFloat>(&self, f: impl Fn(T) -> U) -> BandMatrix<U> {
        BandMatrix {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn factor(&self) -> Result<BandLu<T>> {
        BandLu::new(self)
    }
}

/// LU factors of a band matrix. Row interchanges widen the upper band of `U`
/// to `kl + ku`.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    uw: usize,
    // U rows: u[i * uw + k] holds U(i, i + k), k = 0..uw
    u: Vec<T>,
    // multipliers: l[i * kl + k] holds L(i + 1 + k, i)
    l: Vec<T>,
    piv: Vec<usize>,
    inv_diag: Vec<T>,
}

impl<T: ComplexFloat> BandLu<T> {
    fn new(a: &BandMatrix<T>) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let klw = kl.max(1);
        let uw = a.kl + a.ku + 1;
        // row i holds columns i - kl ..= i + kl + ku at offset j + kl - i
        let rw = 2 * kl + a.ku + 1;
        let off = |i: usize, j: usize| i * rw + j + kl - i;
        let mut work = vec![T::zero(); n * rw];
        for i in 0..n {
            let j0 = i.saturating_sub(kl);
            let j1 = (i + a.ku).min(n.saturating_sub(1));
            for j in j0..=j1 {
                work[off(i, j)] = a.get(i, j);
            }
        }
        let mut l = vec![T::zero(); n * klw];
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let jmax = (k + uw - 1).min(n - 1);
            let mut best = k;
            let mut best_abs = work[off(k, k)].abs();
            for r in k + 1..=last {
                let v = work[off(r, k)].abs();
                if v > best_abs {
                    best_abs = v;
                    best = r;
                }
            }
            if best_abs == num_traits::zero() || !best_abs.is_finite() {
                return Err(Error::Singular { column: k });
            }
            piv[k] = best;
            if best != k {
                for j in k..=jmax {
                    work.swap(off(k, j), off(best, j));
                }
            }
            let pivot = work[off(k, k)];
            for r in k + 1..=last {
                let m = work[off(r, k)] / pivot;
                l[k * klw + (r - k - 1)] = m;
                work[off(r, k)] = T::zero();
                if m == T::zero() {
                    continue;
                }
                for j in k + 1..=jmax {
                    let src = work[off(k, j)];
                    if src != T::zero() {
                        let d = off(r, j);
                        work[d] = work[d] - m * src;
                    }
                }
            }
        }
        let mut u = vec![T::zero(); n * uw];
        for i in 0..n {
            for k in 0..uw {
                let j = i + k;
                if j < n {
                    u[i * uw + k] = work[off(i, j)];
                }
            }
        }
        let inv_diag = (0..n).map(|i| T::one() / u[i * uw]).collect();
        Ok(BandLu {
            n,
            kl,
            uw,
            u,
            l,
            piv,
            inv_diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        let kl = self.kl;
        let klw = kl.max(1);
        let uw = self.uw;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != T::zero() {
                let m = (k + kl).min(n - 1) - k;
                let mult = &self.l[k * klw..k * klw + m];
                for (t, &l) in b[k + 1..k + 1 + m].iter_mut().zip(mult) {
                    *t = *t - l * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let m = (n - i).min(uw);
            let row = &self.u[i * uw + 1..i * uw + m];
            let acc = row
                .iter()
                .zip(&b[i + 1..i + m])
                .fold(b[i], |acc, (&u, &x)| acc - u * x);
            b[i] = acc * self.inv_diag[i];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Determinant (product of pivots with interchange signs).
    pub fn det(&self) -> T {
        let mut d = T::one();
        for i in 0..self.n {
            d = d * self.u[i * self.uw];
            if self.piv[i] != i {
                d = T::zero() - d;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand_chacha::rand_core::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> BandMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces pivoting
                let scale = if i == j { 1e-3 } else { 1.0 };
                a.add(i, j, Complex64::new(uniform(&mut rng), uniform(&mut rng)) * scale);
            }
        }
        a
    }

    // Dense Gaussian elimination oracle
    fn dense_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[x][k].norm().total_cmp(&a[y][k].norm())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for r in k + 1..n {
                let m = a[r][k] / a[k][k];
                for j in k..n {
                    let t = a[k][j];
                    a[r][j] -= m * t;
                }
                let t = b[k];
                b[r] -= m * t;
            }
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= a[i][j] * x[j];
            }
            x[i] = acc / a[i][i];
        }
        x
    }

    #[test]
    fn band_solve_matches_dense_elimination() {
        for &(n, kl, ku, seed) in &[(30, 3, 2, 1), (41, 7, 7, 2), (12, 0, 3, 3), (25, 4, 0, 4), (9, 8, 8, 5)] {
            let a = random_band(n, kl, ku, seed);
            let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64 * 0.1 - 1.0, 0.5)).collect();
            let x = a.factor().unwrap().solve(&b);
            let xd = dense_solve(a.to_dense(), b.clone());
            let err: f64 = x.iter().zip(&xd).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            let scale: f64 = xd.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(err < 1e-9 * scale, "n={n} kl={kl} ku={ku}: {err}");
            let mut r = vec![Complex64::new(0.0, 0.0); n];
            a.mul_vec(&x, &mut r);
            let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(res < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn conj_transpose_entries() {
        let a = random_band(10, 2, 3, 9);
        let h = a.conj_transpose();
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(h.get(i, j), a.get(j, i).conj());
            }
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let a: BandMatrix<f64> = BandMatrix::zeros(4, 1, 1);
        assert!(matches!(a.factor(), Err(Error::Singular { column: 0 })));
    }

    #[test]
    fn determinant_of_triangular_band() {
        let mut a: BandMatrix<f64> = BandMatrix::zeros(3, 1, 1);
        a.add(0, 0, 2.0);
        a.add(1, 1, 3.0);
        a.add(2, 2, -1.0);
        a.add(0, 1, 5.0);
        assert!((a.factor().unwrap().det() + 6.0).abs() < 1e-14);
    }
}
