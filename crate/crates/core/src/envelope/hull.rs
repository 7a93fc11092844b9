use crate::error::{Error, Result};
use crate::legendre::{build_basis, LegendreSpline, MAX_ORDER};
use crate::scalar::Real;

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> Interval<T> {
    pub fn width(&self) -> T {
        self.max - self.min
    }

    pub fn contains(&self, v: T) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Constant maps `C_M^k` from Legendre coefficients to the Bernstein control
/// points of region `k`.
///
/// The control points of a polynomial on a region bound it there (Bernstein
/// convex hull property), so `min/max(C_M^k α)` enclose the series on that
/// region without sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct HullMaps<T> {
    order: usize,
    edges: Vec<T>,
    maps: Vec<Vec<T>>,
    basis_row_abs: Vec<T>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl<T: Real> HullMaps<T> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn regions(&self) -> usize {
        self.maps.len()
    }

    /// Region edges in the local section coordinate τ* ∈ [-1, 1].
    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    /// Row-major `(M+1) × (M+1)` map of region `k`.
    pub fn map(&self, k: usize) -> &[T] {
        &self.maps[k]
    }

    /// Control points `C_M^k α` of one section's coefficients.
    pub fn control_points(&self, k: usize, alpha: &[T]) -> Vec<T> {
        let n = self.order + 1;
        let c = &self.maps[k];
        (0..n)
            .map(|i| (0..n).fold(T::zero(), |s, j| s + c[i * n + j] * alpha[j]))
            .collect()
    }

    /// Raw extrema of the control points with the indices attaining them.
    pub fn hull_with_argext(&self, k: usize, alpha: &[T]) -> (T, usize, T, usize) {
        let p = self.control_points(k, alpha);
        let (mut lo, mut ilo, mut hi, mut ihi) = (p[0], 0, p[0], 0);
        for (i, &v) in p.iter().enumerate().skip(1) {
            if v < lo {
                lo = v;
                ilo = i;
            }
            if v > hi {
                hi = v;
                ihi = i;
            }
        }
        (lo, ilo, hi, ihi)
    }

    /// Sound enclosure of the series on region `k`.
    ///
    /// The control-point extrema are widened outward by a dot-product rounding
    /// bound so the enclosure also holds for floating-point evaluation of the
    /// series.
    pub fn hull(&self, k: usize, alpha: &[T]) -> Interval<T> {
        let (lo, _, hi, _) = self.hull_with_argext(k, alpha);
        let slack = self.rounding_slack(k, alpha);
        Interval {
            min: lo - slack,
            max: hi + slack,
        }
    }

    fn rounding_slack(&self, k: usize, alpha: &[T]) -> T {
        let n = self.order + 1;
        let c = &self.maps[k];
        let mut map_mag = T::zero();
        for i in 0..n {
            let row = (0..n).fold(T::zero(), |s, j| s + (c[i * n + j] * alpha[j]).abs());
            map_mag = map_mag.max(row);
        }
        let eval_mag = alpha
            .iter()
            .zip(&self.basis_row_abs)
            .fold(T::zero(), |s, (a, r)| s + a.abs() * *r);
        let gamma = T::lit(4.0 * (n as f64 + 2.0)) * T::epsilon();
        gamma * (map_mag + eval_mag)
    }
}

/// Builds `C_M^k` for the regions delimited by `region_edges` (local τ*).
pub fn build_hull_maps<T: Real>(order: usize, region_edges: &[T]) -> Result<HullMaps<T>> {
    if order > MAX_ORDER {
        return Err(Error::OrderLimit { order, max: MAX_ORDER });
    }
    if region_edges.len() < 2 {
        return Err(Error::Domain("need at least two region edges".into()));
    }
    if region_edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("region edges must be strictly ascending".into()));
    }
    if region_edges[0] < -T::one() || *region_edges.last().unwrap() > T::one() {
        return Err(Error::Domain("region edges must lie in [-1, 1]".into()));
    }
    let basis = build_basis::<f64>(order)?;
    let n = order + 1;
    let mut maps = Vec::with_capacity(region_edges.len() - 1);
    for w in region_edges.windows(2) {
        let a = w[0].to_f64_lossy();
        let h = w[1].to_f64_lossy() - a;
        let mut map = vec![T::zero(); n * n];
        for j in 0..n {
            // monomial coefficients of P_j, then substitute τ = a + h s
            let c = basis.row(j);
            let mut shifted = vec![0.0; n];
            for (p, &cp) in c.iter().enumerate() {
                if cp == 0.0 {
                    continue;
                }
                for (k, sk) in shifted.iter_mut().enumerate().take(p + 1) {
                    *sk += cp * binomial(p, k) * a.powi((p - k) as i32) * h.powi(k as i32);
                }
            }
            // Bernstein control points b_i = Σ_{k ≤ i} C(i,k)/C(M,k) c'_k
            for i in 0..n {
                let b: f64 = (0..=i).map(|k| binomial(i, k) / binomial(order, k) * shifted[k]).sum();
                map[i * n + j] = T::lit(b);
            }
        }
        maps.push(map);
    }
    let basis_row_abs = (0..n).map(|j| T::lit(basis.row_abs_sum(j))).collect();
    Ok(HullMaps {
        order,
        edges: region_edges.to_vec(),
        maps,
        basis_row_abs,
    })
}

/// `K` equidistant regions on [-1, 1].
pub fn equidistant_hull_maps<T: Real>(order: usize, regions: usize) -> Result<HullMaps<T>> {
    let edges = crate::legendre::equidistant_breakpoints::<T>(regions);
    build_hull_maps(order, &edges)
}

/// Hull interval per section and region.
pub fn regional_extrema<T: Real>(spline: &LegendreSpline<T>, maps: &HullMaps<T>) -> Result<Vec<Vec<Interval<T>>>> {
    if spline.order() != maps.order() {
        return Err(Error::Shape(format!(
            "spline order {} but hull maps of order {}",
            spline.order(),
            maps.order()
        )));
    }
    Ok((0..spline.sections())
        .map(|s| {
            let a = spline.section_coeffs(s);
            (0..maps.regions()).map(|k| maps.hull(k, a)).collect()
        })
        .collect())
}
