use crate::error::{Error, Result};
use crate::scalar::{Coefficient, Rational, Real};
use num_traits::{One, Zero};

/// Highest order for which the monomial form stays usable.
pub const MAX_ORDER: usize = 20;

/// Monomial coefficients of the Legendre polynomials `P_0..P_M`.
///
/// Row `j` holds the coefficients of `P_j` in ascending powers of τ, so the
/// matrix is lower triangular (row `j` has no terms above degree `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix<T> {
    order: usize,
    coeffs: Vec<T>,
}

impl<T: Coefficient> BasisMatrix<T> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.order + 1
    }

    /// Coefficient of τ^k in `P_j`.
    pub fn get(&self, j: usize, k: usize) -> &T {
        &self.coeffs[j * self.dim() + k]
    }

    pub fn row(&self, j: usize) -> &[T] {
        let n = self.dim();
        &self.coeffs[j * n..(j + 1) * n]
    }
}

impl<T: Real> BasisMatrix<T> {
    /// Monomial coefficients `c = L_Mᵀ α` of the series with Legendre coefficients `alpha`.
    pub fn to_monomial(&self, alpha: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut c = vec![T::zero(); n];
        for (j, &a) in alpha.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            for (k, ck) in c.iter_mut().enumerate().take(j + 1) {
                *ck = *ck + a * self.coeffs[j * n + k];
            }
        }
        c
    }

    /// Sum of absolute monomial coefficients of row `j`; bounds the rounding
    /// amplification of monomial evaluation on [-1, 1].
    pub fn row_abs_sum(&self, j: usize) -> T {
        self.row(j).iter().fold(T::zero(), |s, c| s + c.abs())
    }
}

fn rational_rows(order: usize) -> Vec<Vec<Rational>> {
    let n = order + 1;
    let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(n);
    let mut p0 = vec![Rational::zero(); n];
    p0[0] = Rational::one();
    rows.push(p0);
    if order >= 1 {
        let mut p1 = vec![Rational::zero(); n];
        p1[1] = Rational::one();
        rows.push(p1);
    }
    // (j+1) P_{j+1} = (2j+1) τ P_j - j P_{j-1}
    for j in 1..order {
        let a = Rational::from_integer(2 * j as i128 + 1);
        let b = Rational::from_integer(j as i128);
        let d = Rational::from_integer(j as i128 + 1);
        let mut next = vec![Rational::zero(); n];
        for k in 0..n {
            let shifted = if k > 0 { rows[j][k - 1] } else { Rational::zero() };
            next[k] = (a * shifted - b * rows[j - 1][k]) / d;
        }
        rows.push(next);
    }
    rows
}

/// Builds `L_M` exactly and materializes it in `T`.
pub fn build_basis<T: Coefficient>(order: usize) -> Result<BasisMatrix<T>> {
    if order > MAX_ORDER {
        return Err(Error::OrderLimit { order, max: MAX_ORDER });
    }
    let coeffs = rational_rows(order)
        .into_iter()
        .flatten()
        .map(|r| T::from_ratio(*r.numer(), *r.denom()))
        .collect();
    Ok(BasisMatrix { order, coeffs })
}

/// `P_j(τ)` for all `j ≤ order` via the three-term recurrence.
pub fn legendre_values<T: Real>(order: usize, tau: T) -> Vec<T> {
    let mut p = Vec::with_capacity(order + 1);
    p.push(T::one());
    if order >= 1 {
        p.push(tau);
    }
    for j in 1..order {
        let jf = T::lit(j as f64);
        let next = ((jf + jf + T::one()) * tau * p[j] - jf * p[j - 1]) / (jf + T::one());
        p.push(next);
    }
    p
}

/// `P_j'(τ)` for all `j ≤ order`, from `P_{j+1}' = P_{j-1}' + (2j+1) P_j`.
pub fn legendre_derivatives<T: Real>(order: usize, tau: T) -> Vec<T> {
    let p = legendre_values(order, tau);
    let mut d = vec![T::zero(); order + 1];
    if order >= 1 {
        d[1] = T::one();
    }
    for j in 1..order {
        let jf = T::lit(j as f64);
        d[j + 1] = d[j - 1] + (jf + jf + T::one()) * p[j];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn low_orders_match_closed_forms() {
        let b1: BasisMatrix<Rational> = build_basis(1).unwrap();
        assert_eq!(b1.row(0), &[r(1, 1), r(0, 1)]);
        assert_eq!(b1.row(1), &[r(0, 1), r(1, 1)]);

        let b3: BasisMatrix<Rational> = build_basis(3).unwrap();
        assert_eq!(b3.row(2), &[r(-1, 2), r(0, 1), r(3, 2), r(0, 1)]);
        assert_eq!(b3.row(3), &[r(0, 1), r(-3, 2), r(0, 1), r(5, 2)]);
    }

    #[test]
    fn rational_rows_satisfy_bonnet_exactly() {
        let b: BasisMatrix<Rational> = build_basis(MAX_ORDER).unwrap();
        let n = b.dim();
        for j in 1..MAX_ORDER {
            for k in 0..n {
                let lhs = Rational::from_integer(j as i128 + 1) * b.get(j + 1, k);
                let shifted = if k > 0 { *b.get(j, k - 1) } else { Rational::zero() };
                let rhs = Rational::from_integer(2 * j as i128 + 1) * shifted
                    - Rational::from_integer(j as i128) * b.get(j - 1, k);
                assert_eq!(lhs, rhs, "j={j} k={k}");
            }
        }
    }

    #[test]
    fn rows_are_lower_triangular() {
        let b: BasisMatrix<f64> = build_basis(12).unwrap();
        for j in 0..=12 {
            for k in (j + 1)..=12 {
                assert_eq!(*b.get(j, k), 0.0);
            }
            assert!(*b.get(j, j) != 0.0);
        }
    }

    #[test]
    fn order_above_limit_is_rejected() {
        assert!(matches!(
            build_basis::<f64>(MAX_ORDER + 1),
            Err(Error::OrderLimit { order: 21, max: 20 })
        ));
    }

    #[test]
    fn float_basis_is_exact_conversion_of_rational() {
        let exact: BasisMatrix<Rational> = build_basis(MAX_ORDER).unwrap();
        let float: BasisMatrix<f64> = build_basis(MAX_ORDER).unwrap();
        for j in 0..=MAX_ORDER {
            for k in 0..=MAX_ORDER {
                let e = exact.get(j, k);
                assert_eq!(
                    *float.get(j, k),
                    *e.numer() as f64 / *e.denom() as f64,
                    "P_{j} coefficient {k}"
                );
            }
        }
    }

    #[test]
    fn recurrence_values_agree_with_monomial_form() {
        let b: BasisMatrix<f64> = build_basis(8).unwrap();
        for &t in &[-1.0f64, -0.3, 0.0, 0.71, 1.0] {
            let p = legendre_values(8, t);
            for (j, pj) in p.iter().enumerate() {
                let mono: f64 = (0..=8).map(|k| b.get(j, k) * t.powi(k as i32)).sum();
                assert!((mono - pj).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6f64;
        for &t in &[-0.9, -0.2, 0.4, 0.8] {
            let d = legendre_derivatives(7, t);
            let up = legendre_values(7, t + h);
            let dn = legendre_values(7, t - h);
            for j in 0..=7 {
                let fd = (up[j] - dn[j]) / (2.0 * h);
                assert!((fd - d[j]).abs() < 1e-7, "j={j}");
            }
        }
    }
}
