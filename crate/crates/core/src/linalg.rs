//! Small dense kernels: Householder QR and Cholesky, generic over [`Real`].

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Householder QR of a tall `m × n` matrix (column-major input).
#[derive(Debug, Clone)]
pub struct HouseholderQr<T> {
    m: usize,
    n: usize,
    /// Column-major; upper triangle holds R after factorization.
    a: Vec<T>,
    /// Reflector `k` acts on rows `k..m`, stored with unit norm.
    vs: Vec<Vec<T>>,
}

impl<T: Real> HouseholderQr<T> {
    /// Factorizes the column-major matrix `a` (`m` rows, `n` columns, `m ≥ n`).
    pub fn new(mut a: Vec<T>, m: usize, n: usize) -> Result<Self> {
        if a.len() != m * n || m < n {
            return Err(Error::Shape(format!("QR of {m}x{n} with {} entries", a.len())));
        }
        let mut vs = Vec::with_capacity(n);
        for k in 0..n {
            let col = &a[k * m + k..k * m + m];
            let norm = col.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
            let mut v: Vec<T> = col.to_vec();
            if norm == T::zero() {
                vs.push(vec![T::zero(); m - k]);
                continue;
            }
            let alpha = if v[0] > T::zero() { -norm } else { norm };
            v[0] = v[0] - alpha;
            let vnorm = v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
            if vnorm > T::zero() {
                for x in v.iter_mut() {
                    *x = *x / vnorm;
                }
            }
            for j in k..n {
                let c = &mut a[j * m + k..j * m + m];
                let dot = v.iter().zip(c.iter()).fold(T::zero(), |s, (&vi, &ci)| s + vi * ci);
                let two_dot = dot + dot;
                for (ci, &vi) in c.iter_mut().zip(&v) {
                    *ci = *ci - two_dot * vi;
                }
            }
            vs.push(v);
        }
        Ok(Self { m, n, a, vs })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn r(&self, i: usize, j: usize) -> T {
        self.a[j * self.m + i]
    }

    fn reflect(&self, k: usize, x: &mut [T]) {
        let v = &self.vs[k];
        let seg = &mut x[k..];
        let dot = v.iter().zip(seg.iter()).fold(T::zero(), |s, (&vi, &xi)| s + vi * xi);
        if dot == T::zero() {
            return;
        }
        let two_dot = dot + dot;
        for (xi, &vi) in seg.iter_mut().zip(v) {
            *xi = *xi - two_dot * vi;
        }
    }

    /// `x ← Qᵀ x`.
    pub fn apply_qt(&self, x: &mut [T]) {
        for k in 0..self.n {
            self.reflect(k, x);
        }
    }

    /// `x ← Q x`.
    pub fn apply_q(&self, x: &mut [T]) {
        for k in (0..self.n).rev() {
            self.reflect(k, x);
        }
    }

    /// Smallest-to-largest magnitude ratio on the diagonal of R.
    pub fn diagonal_ratio(&self) -> T {
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for k in 0..self.n {
            let d = self.r(k, k).abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if hi == T::zero() {
            T::zero()
        } else {
            lo / hi
        }
    }

    pub fn check_rank(&self, rtol: T) -> Result<()> {
        let ratio = self.diagonal_ratio();
        if ratio <= rtol {
            return Err(Error::Conditioning(format!("diagonal ratio {ratio:?} below {rtol:?}")));
        }
        Ok(())
    }

    /// Least-squares solution of `A x ≈ b`.
    pub fn solve_least_squares(&self, b: &[T]) -> Vec<T> {
        let mut y = b.to_vec();
        self.apply_qt(&mut y);
        self.solve_upper(&y[..self.n])
    }

    /// Solves `R x = y`.
    pub fn solve_upper(&self, y: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = y[..n].to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s = s - self.r(i, j) * x[j];
            }
            x[i] = s / self.r(i, i);
        }
        x
    }

    /// Solves `Rᵀ x = y`.
    pub fn solve_upper_transposed(&self, y: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = y[..n].to_vec();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.r(j, i) * x[j];
            }
            x[i] = s / self.r(i, i);
        }
        x
    }

    /// Column-major `m × (m - n)` orthonormal basis of the complement of range(A).
    pub fn complement_basis(&self) -> Vec<T> {
        let (m, n) = (self.m, self.n);
        let mut z = vec![T::zero(); m * (m - n)];
        for c in 0..(m - n) {
            let col = &mut z[c * m..(c + 1) * m];
            col[n + c] = T::one();
            self.apply_q(col);
        }
        z
    }

    /// `Q [y; 0]` for `y` of length `n`.
    pub fn expand(&self, y: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.m];
        x[..self.n].copy_from_slice(&y[..self.n]);
        self.apply_q(&mut x);
        x
    }
}

/// Cholesky factor `L` (row-major lower triangle) of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(a: &[T], n: usize) -> Result<Self> {
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > T::zero()) {
                        return Err(Error::NumericalFailure("matrix not positive definite".into()));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Row-major inverse.
    pub fn inverse(&self) -> Vec<T> {
        let n = self.n;
        let mut inv = vec![T::zero(); n * n];
        let mut e = vec![T::zero(); n];
        for c in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[c] = T::one();
            let col = self.solve(&e);
            for r in 0..n {
                inv[r * n + c] = col[r];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut a = Vec::new();
        a.extend(std::iter::repeat(1.0).take(10));
        a.extend(xs.iter().copied());
        let b: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let qr = HouseholderQr::new(a, 10, 2).unwrap();
        let sol = qr.solve_least_squares(&b);
        assert!((sol[0] - 2.0).abs() < 1e-12 && (sol[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal_to_range() {
        // columns (1,1,0,0) and (0,1,1,1)
        let a = vec![1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let qr = HouseholderQr::new(a.clone(), 4, 2).unwrap();
        let z = qr.complement_basis();
        for c in 0..2 {
            let zc = &z[c * 4..(c + 1) * 4];
            for k in 0..2 {
                let dot: f64 = (0..4).map(|i| a[k * 4 + i] * zc[i]).sum();
                assert!(dot.abs() < 1e-14);
            }
            let norm: f64 = zc.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_deficiency_detected() {
        let a = vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0];
        let qr = HouseholderQr::new(a, 3, 2).unwrap();
        assert!(qr.check_rank(1e-12).is_err());
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = vec![4.0f64, 1.0, 1.0, 3.0];
        let c = Cholesky::new(&a, 2).unwrap();
        let x = c.solve(&[1.0, 2.0]);
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
        let inv = c.inverse();
        assert!((inv[0] * 4.0 + inv[1] * 1.0 - 1.0).abs() < 1e-14);
        assert!(Cholesky::new(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
    }
}
