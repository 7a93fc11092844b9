use super::basis::{legendre_values, MAX_ORDER};
use super::spline::{validate_breakpoints, LegendreSpline};
use crate::error::{Error, Result};
use crate::linalg::HouseholderQr;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T> {
    /// Weight of the soft C⁰ penalty between adjacent sections; `None` fits
    /// every section independently.
    pub continuity_weight: Option<T>,
    pub horizon_s: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            continuity_weight: None,
            horizon_s: T::one(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplineFit<T: Real> {
    pub spline: LegendreSpline<T>,
    pub residual_rms: T,
}

/// Least-squares fit of `(τ, value)` samples onto a Legendre-Spline.
pub fn fit_spline<T: Real>(
    signal: &str,
    samples: &[(T, T)],
    order: usize,
    breakpoints: &[T],
    options: FitOptions<T>,
) -> Result<SplineFit<T>> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::OrderLimit { order, max: MAX_ORDER });
    }
    validate_breakpoints(breakpoints)?;
    let ns = breakpoints.len() - 1;
    let n = order + 1;
    let mut rows_by_section: Vec<Vec<(T, T)>> = vec![Vec::new(); ns];
    for &(tau, v) in samples {
        if !(tau >= -T::one() && tau <= T::one()) {
            return Err(Error::Domain(format!("sample at τ = {tau:?} outside [-1, 1]")));
        }
        let idx = breakpoints[1..ns].partition_point(|&b| b <= tau).min(ns - 1);
        let (a, b) = (breakpoints[idx], breakpoints[idx + 1]);
        let local = (T::lit(2.0) * (tau - a) / (b - a) - T::one())
            .max(-T::one())
            .min(T::one());
        rows_by_section[idx].push((local, v));
    }
    for (s, rows) in rows_by_section.iter().enumerate() {
        if rows.len() < n {
            return Err(Error::InsufficientSamples {
                section: s,
                have: rows.len(),
                need: n,
            });
        }
    }

    let coeffs = match options.continuity_weight {
        Some(w) if ns > 1 && w > T::zero() => fit_joint(&rows_by_section, order, w)?,
        _ => {
            let mut out = Vec::with_capacity(ns * n);
            for rows in &rows_by_section {
                out.extend(fit_section(rows, order)?);
            }
            out
        }
    };

    let spline = LegendreSpline::new(signal, order, breakpoints.to_vec(), coeffs, options.horizon_s)?;
    let mut sse = T::zero();
    for (s, rows) in rows_by_section.iter().enumerate() {
        for &(local, v) in rows {
            let r = spline.eval_local(s, local) - v;
            sse = sse + r * r;
        }
    }
    let residual_rms = (sse / T::lit(samples.len() as f64)).sqrt();
    Ok(SplineFit { spline, residual_rms })
}

fn conditioning_tol<T: Real>() -> T {
    T::epsilon() * T::lit(1e4)
}

fn fit_section<T: Real>(rows: &[(T, T)], order: usize) -> Result<Vec<T>> {
    let m = rows.len();
    let n = order + 1;
    let mut a = vec![T::zero(); m * n];
    let mut b = Vec::with_capacity(m);
    for (i, &(local, v)) in rows.iter().enumerate() {
        let p = legendre_values(order, local);
        for j in 0..n {
            a[j * m + i] = p[j];
        }
        b.push(v);
    }
    let qr = HouseholderQr::new(a, m, n)?;
    qr.check_rank(conditioning_tol())?;
    Ok(qr.solve_least_squares(&b))
}

fn fit_joint<T: Real>(sections: &[Vec<(T, T)>], order: usize, weight: T) -> Result<Vec<T>> {
    let n = order + 1;
    let ns = sections.len();
    let cols = ns * n;
    let data_rows: usize = sections.iter().map(Vec::len).sum();
    let m = data_rows + ns - 1;
    let mut a = vec![T::zero(); m * cols];
    let mut b = vec![T::zero(); m];
    let mut r = 0;
    for (s, rows) in sections.iter().enumerate() {
        for &(local, v) in rows {
            let p = legendre_values(order, local);
            for j in 0..n {
                a[(s * n + j) * m + r] = p[j];
            }
            b[r] = v;
            r += 1;
        }
    }
    // x_s(τ*=1) - x_{s+1}(τ*=-1): P_j(1) = 1, P_j(-1) = (-1)^j
    let sw = weight.sqrt();
    for s in 0..ns - 1 {
        for j in 0..n {
            a[(s * n + j) * m + r] = sw;
            let sign = if j % 2 == 0 { T::one() } else { -T::one() };
            a[((s + 1) * n + j) * m + r] = -sw * sign;
        }
        r += 1;
    }
    let qr = HouseholderQr::new(a, m, cols)?;
    qr.check_rank(conditioning_tol())?;
    Ok(qr.solve_least_squares(&b))
}
