use super::basis::{build_basis, BasisMatrix, MAX_ORDER};
use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Maps `t ∈ [t0, tf]` onto `τ ∈ [-1, 1]`.
pub fn normalize_time<T: Real>(t: T, t0: T, tf: T) -> Result<T> {
    if !(tf > t0) {
        return Err(Error::Domain(format!("empty time window [{t0:?}, {tf:?}]")));
    }
    if t < t0 || t > tf {
        return Err(Error::Domain(format!("t = {t:?} outside [{t0:?}, {tf:?}]")));
    }
    let two = T::lit(2.0);
    Ok(two * (t - t0) / (tf - t0) - T::one())
}

/// Inverse of [`normalize_time`].
pub fn denormalize_time<T: Real>(tau: T, t0: T, tf: T) -> Result<T> {
    check_tau(tau)?;
    Ok(t0 + (tau + T::one()) * (tf - t0) / T::lit(2.0))
}

fn check_tau<T: Real>(tau: T) -> Result<()> {
    if tau >= -T::one() && tau <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("τ = {tau:?} outside [-1, 1]")))
    }
}

fn horner<T: Real>(mono: &[T], tau: T) -> T {
    mono.iter().rev().fold(T::zero(), |acc, &c| acc * tau + c)
}

/// Evaluates the truncated series `αᵀ L_M v(τ)`.
pub fn eval_tls<T: Real>(alpha: &[T], basis: &BasisMatrix<T>, tau: T) -> Result<T> {
    if alpha.len() != basis.dim() {
        return Err(Error::Shape(format!(
            "{} coefficients for order {}",
            alpha.len(),
            basis.order()
        )));
    }
    check_tau(tau)?;
    Ok(horner(&basis.to_monomial(alpha), tau))
}

/// `n` equal sections on [-1, 1].
pub fn equidistant_breakpoints<T: Real>(sections: usize) -> Vec<T> {
    let n = sections.max(1);
    let mut b: Vec<T> = (0..=n).map(|i| T::lit(-1.0 + 2.0 * i as f64 / n as f64)).collect();
    b[0] = -T::one();
    b[n] = T::one();
    b
}

pub(crate) fn validate_breakpoints<T: Real>(breakpoints: &[T]) -> Result<()> {
    if breakpoints.len() < 2 {
        return Err(Error::Domain("need at least two breakpoints".into()));
    }
    if breakpoints[0] != -T::one() || *breakpoints.last().unwrap() != T::one() {
        return Err(Error::Domain("breakpoints must start at -1 and end at 1".into()));
    }
    if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("breakpoints must be strictly increasing".into()));
    }
    Ok(())
}

/// Piecewise truncated Legendre series over the normalized horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreSpline<T: Real> {
    signal: String,
    order: usize,
    breakpoints: Vec<T>,
    coeffs: Vec<T>,
    horizon_s: T,
    basis: BasisMatrix<T>,
    mono: Vec<T>,
}

impl<T: Real> LegendreSpline<T> {
    pub fn new(
        signal: impl Into<String>,
        order: usize,
        breakpoints: Vec<T>,
        coeffs: Vec<T>,
        horizon_s: T,
    ) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::OrderLimit { order, max: MAX_ORDER });
        }
        validate_breakpoints(&breakpoints)?;
        let sections = breakpoints.len() - 1;
        if coeffs.len() != sections * (order + 1) {
            return Err(Error::Shape(format!(
                "{} coefficients for {} sections of order {}",
                coeffs.len(),
                sections,
                order
            )));
        }
        if !(horizon_s > T::zero()) {
            return Err(Error::Domain("horizon must be positive".into()));
        }
        let basis = build_basis::<T>(order)?;
        let mono = coeffs.chunks(order + 1).flat_map(|a| basis.to_monomial(a)).collect();
        Ok(Self {
            signal: signal.into(),
            order,
            breakpoints,
            coeffs,
            horizon_s,
            basis,
            mono,
        })
    }

    /// Single-section series.
    pub fn single(signal: impl Into<String>, alpha: Vec<T>, horizon_s: T) -> Result<Self> {
        let order = alpha.len().saturating_sub(1);
        Self::new(signal, order, vec![-T::one(), T::one()], alpha, horizon_s)
    }

    pub fn signal(&self) -> &str {
        &self.signal
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sections(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn horizon_s(&self) -> T {
        self.horizon_s
    }

    pub fn basis(&self) -> &BasisMatrix<T> {
        &self.basis
    }

    /// Row-major `N_S × (M+1)` coefficients.
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn section_coeffs(&self, section: usize) -> &[T] {
        let n = self.order + 1;
        &self.coeffs[section * n..(section + 1) * n]
    }

    /// Section containing τ; the last section is right-closed.
    pub fn section_of(&self, tau: T) -> Result<usize> {
        check_tau(tau)?;
        let ns = self.sections();
        let idx = self.breakpoints[1..ns].partition_point(|&b| b <= tau);
        Ok(idx.min(ns - 1))
    }

    /// Local coordinate τ* ∈ [-1, 1] of τ within `section`.
    pub fn local_tau(&self, section: usize, tau: T) -> T {
        let a = self.breakpoints[section];
        let b = self.breakpoints[section + 1];
        let two = T::lit(2.0);
        let local = two * (tau - a) / (b - a) - T::one();
        local.max(-T::one()).min(T::one())
    }

    pub fn eval(&self, tau: T) -> Result<T> {
        let s = self.section_of(tau)?;
        Ok(self.eval_local(s, self.local_tau(s, tau)))
    }

    /// Evaluates section `section` at local coordinate τ* without range checks.
    pub fn eval_local(&self, section: usize, local_tau: T) -> T {
        let n = self.order + 1;
        horner(&self.mono[section * n..(section + 1) * n], local_tau)
    }

    /// Evaluates at physical time `t ∈ [0, T_H]`.
    pub fn eval_time(&self, t: T) -> Result<T> {
        self.eval(normalize_time(t, T::zero(), self.horizon_s)?)
    }

    /// Copy with different coefficients (same sections and order).
    pub fn with_coeffs(&self, coeffs: Vec<T>) -> Result<Self> {
        Self::new(
            self.signal.clone(),
            self.order,
            self.breakpoints.clone(),
            coeffs,
            self.horizon_s,
        )
    }

    pub fn renamed(&self, signal: impl Into<String>) -> Self {
        let mut s = self.clone();
        s.signal = signal.into();
        s
    }

    pub fn to_record(&self) -> SplineRecord<T> {
        SplineRecord {
            order: self.order,
            sections: self.sections(),
            breakpoints: self.breakpoints.clone(),
            coeffs: self.coeffs.clone(),
            horizon_s: self.horizon_s,
            signal: self.signal.clone(),
        }
    }

    pub fn from_record(rec: SplineRecord<T>) -> Result<Self> {
        if rec.sections + 1 != rec.breakpoints.len() {
            return Err(Error::Shape(format!(
                "{} sections but {} breakpoints",
                rec.sections,
                rec.breakpoints.len()
            )));
        }
        Self::new(rec.signal, rec.order, rec.breakpoints, rec.coeffs, rec.horizon_s)
    }
}

/// Evaluates `spline` at τ.
pub fn eval_spline<T: Real>(spline: &LegendreSpline<T>, tau: T) -> Result<T> {
    spline.eval(tau)
}

/// Derivative with respect to the global normalized time τ.
///
/// Each section's Legendre coefficients are differentiated in closed form,
/// `β_k = (2k+1) Σ_{j>k, j-k odd} α_j`, then scaled by the section chain
/// rule `dτ*/dτ = 2 / (τ_{i+1} - τ_i)`. Multiply by `2 / T_H` for d/dt.
pub fn spline_derivative<T: Real>(spline: &LegendreSpline<T>) -> Result<LegendreSpline<T>> {
    let m = spline.order();
    let mut out = Vec::with_capacity(spline.coeffs().len());
    for s in 0..spline.sections() {
        let a = spline.section_coeffs(s);
        let width = spline.breakpoints()[s + 1] - spline.breakpoints()[s];
        let scale = T::lit(2.0) / width;
        for k in 0..=m {
            let mut acc = T::zero();
            let mut j = k + 1;
            while j <= m {
                acc = acc + a[j];
                j += 2;
            }
            out.push(T::lit(2.0 * k as f64 + 1.0) * acc * scale);
        }
    }
    spline.with_coeffs(out)
}

/// JSON interchange form of a spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineRecord<T> {
    pub order: usize,
    pub sections: usize,
    pub breakpoints: Vec<T>,
    pub coeffs: Vec<T>,
    pub horizon_s: T,
    pub signal: String,
}

/// Shape of a coefficient vector: which signals, how many sections, which order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientLayout {
    pub sections: usize,
    pub order: usize,
    pub breakpoints: Vec<f64>,
    pub horizon_s: f64,
    pub state_names: Vec<String>,
    pub control_names: Vec<String>,
}

impl CoefficientLayout {
    pub fn equidistant(
        sections: usize,
        order: usize,
        horizon_s: f64,
        state_names: &[&str],
        control_names: &[&str],
    ) -> Self {
        Self {
            sections,
            order,
            breakpoints: equidistant_breakpoints(sections),
            horizon_s,
            state_names: state_names.iter().map(|s| s.to_string()).collect(),
            control_names: control_names.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_controls(&self) -> usize {
        self.control_names.len()
    }

    pub fn n_signals(&self) -> usize {
        self.n_states() + self.n_controls()
    }

    /// Coefficients per signal: `N_S (M+1)`.
    pub fn per_signal(&self) -> usize {
        self.sections * (self.order + 1)
    }

    /// `N_predict = N_S (M+1) (N_x + N_u)`.
    pub fn len(&self) -> usize {
        self.per_signal() * self.n_signals()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn signal_names(&self) -> impl Iterator<Item = &str> {
        self.state_names
            .iter()
            .chain(self.control_names.iter())
            .map(String::as_str)
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.signal_names().position(|n| n == name)
    }

    /// Flat index of `α_{section, j}` of `signal`.
    pub fn index(&self, signal: usize, section: usize, j: usize) -> usize {
        (signal * self.sections + section) * (self.order + 1) + j
    }

    /// Column names `alpha_<signal>_s<section>_<j>`, sections counted from 1.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        for sig in self.signal_names() {
            for s in 0..self.sections {
                for j in 0..=self.order {
                    names.push(format!("alpha_{}_s{}_{}", sig, s + 1, j));
                }
            }
        }
        names
    }

    pub fn validate(&self) -> Result<()> {
        validate_breakpoints(&self.breakpoints)?;
        if self.breakpoints.len() != self.sections + 1 {
            return Err(Error::Shape("breakpoints do not match section count".into()));
        }
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(Error::OrderLimit {
                order: self.order,
                max: MAX_ORDER,
            });
        }
        Ok(())
    }
}

/// State and control splines of one open-loop solution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle<T: Real> {
    states: Vec<LegendreSpline<T>>,
    controls: Vec<LegendreSpline<T>>,
}

impl<T: Real> TrajectoryBundle<T> {
    pub fn new(states: Vec<LegendreSpline<T>>, controls: Vec<LegendreSpline<T>>) -> Result<Self> {
        let bundle = Self { states, controls };
        let mut all = bundle.splines();
        if let Some(first) = all.next() {
            for s in all.by_ref() {
                if s.sections() != first.sections()
                    || s.order() != first.order()
                    || s.breakpoints() != first.breakpoints()
                    || s.horizon_s() != first.horizon_s()
                {
                    return Err(Error::Shape(format!(
                        "spline `{}` does not share the bundle's sections/order/horizon",
                        s.signal()
                    )));
                }
            }
        }
        drop(all);
        Ok(bundle)
    }

    /// Splits a flat coefficient vector laid out as `layout`.
    pub fn from_vector(layout: &CoefficientLayout, coeffs: &[T]) -> Result<Self> {
        if coeffs.len() != layout.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for layout of {}",
                coeffs.len(),
                layout.len()
            )));
        }
        let per = layout.per_signal();
        let bp: Vec<T> = layout.breakpoints.iter().map(|&b| T::lit(b)).collect();
        let h = T::lit(layout.horizon_s);
        let mk = |i: usize, name: &str| {
            LegendreSpline::new(
                name,
                layout.order,
                bp.clone(),
                coeffs[i * per..(i + 1) * per].to_vec(),
                h,
            )
        };
        let nx = layout.n_states();
        let states = layout
            .state_names
            .iter()
            .enumerate()
            .map(|(i, n)| mk(i, n))
            .collect::<Result<Vec<_>>>()?;
        let controls = layout
            .control_names
            .iter()
            .enumerate()
            .map(|(i, n)| mk(nx + i, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(states, controls)
    }

    pub fn states(&self) -> &[LegendreSpline<T>] {
        &self.states
    }

    pub fn controls(&self) -> &[LegendreSpline<T>] {
        &self.controls
    }

    /// States first, then controls.
    pub fn splines(&self) -> impl Iterator<Item = &LegendreSpline<T>> {
        self.states.iter().chain(self.controls.iter())
    }

    pub fn signal(&self, name: &str) -> Result<&LegendreSpline<T>> {
        self.splines()
            .find(|s| s.signal() == name)
            .ok_or_else(|| Error::UnknownSignal(name.to_string()))
    }

    pub fn to_vector(&self) -> Vec<T> {
        self.splines().flat_map(|s| s.coeffs().iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_normalization_endpoints() {
        assert_eq!(normalize_time(0.0, 0.0, 7.0).unwrap(), -1.0);
        assert_eq!(normalize_time(7.0, 0.0, 7.0).unwrap(), 1.0);
        assert_eq!(normalize_time(3.5, 0.0, 7.0).unwrap(), 0.0);
        assert!(normalize_time(7.1, 0.0, 7.0).is_err());
        assert!(normalize_time(1.0, 2.0, 2.0).is_err());
        let t: f64 = denormalize_time(normalize_time(2.2, 1.0, 5.0).unwrap(), 1.0, 5.0).unwrap();
        assert!((t - 2.2).abs() < 1e-15);
    }

    #[test]
    fn truncated_series_examples() {
        let b = build_basis::<f64>(2).unwrap();
        assert_eq!(eval_tls(&[4.0, 0.0, 0.0], &b, 0.3).unwrap(), 4.0);
        assert_eq!(eval_tls(&[0.0, 1.0, 0.0], &b, 0.5).unwrap(), 0.5);
        let v = eval_tls(&[1.0 / 3.0, 0.0, 2.0 / 3.0], &b, -1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(matches!(eval_tls(&[1.0, 2.0], &b, 0.0), Err(Error::Shape(_))));
        assert!(matches!(eval_tls(&[1.0, 0.0, 0.0], &b, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn section_lookup_and_closure() {
        let s = LegendreSpline::new("x", 1, vec![-1.0, 0.0, 1.0], vec![0.0, 0.0, 1.0, 0.0], 2.0).unwrap();
        assert_eq!(s.eval(0.5).unwrap(), 1.0);
        assert_eq!(s.eval(-0.5).unwrap(), 0.0);
        assert_eq!(s.section_of(0.0).unwrap(), 1);
        assert_eq!(s.section_of(1.0).unwrap(), 1);
        assert_eq!(s.eval(1.0).unwrap(), 1.0);
        assert!(s.eval(1.0 + 1e-12).is_err());
    }

    #[test]
    fn single_section_equals_series() {
        let alpha = vec![0.3, -1.2, 0.7, 0.05];
        let s = LegendreSpline::single("x", alpha.clone(), 1.0).unwrap();
        let b = build_basis::<f64>(3).unwrap();
        for i in 0..=40 {
            let t = -1.0 + i as f64 / 20.0;
            assert_eq!(s.eval(t).unwrap(), eval_tls(&alpha, &b, t).unwrap());
        }
    }

    #[test]
    fn invalid_breakpoints_rejected() {
        assert!(LegendreSpline::new("x", 1, vec![-1.0, 0.5, 0.2, 1.0], vec![0.0; 6], 1.0).is_err());
        assert!(LegendreSpline::new("x", 1, vec![-0.9, 1.0], vec![0.0; 2], 1.0).is_err());
        assert!(LegendreSpline::new("x", 1, vec![-1.0, 1.0], vec![0.0; 3], 1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let lin = LegendreSpline::single("x", vec![0.0, 1.0, 0.0], 1.0).unwrap();
        let d = spline_derivative(&lin).unwrap();
        assert_eq!(d.coeffs(), &[1.0, 0.0, 0.0]);

        let c = LegendreSpline::single("x", vec![2.5, 0.0], 1.0).unwrap();
        assert_eq!(spline_derivative(&c).unwrap().coeffs(), &[0.0, 0.0]);

        let sq = LegendreSpline::single("x", vec![1.0 / 3.0, 0.0, 2.0 / 3.0], 1.0).unwrap();
        let d = spline_derivative(&sq).unwrap();
        for i in 0..=10 {
            let t = -1.0 + i as f64 / 5.0;
            assert!((d.eval(t).unwrap() - 2.0 * t).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_matches_central_differences_on_sections() {
        let s = LegendreSpline::new(
            "x",
            4,
            vec![-1.0, -0.2, 0.4, 1.0],
            vec![
                0.3, 0.1, -0.4, 0.2, 0.05, -0.1, 0.6, 0.2, -0.3, 0.1, 0.4, -0.2, 0.1, 0.3, -0.05,
            ],
            3.0,
        )
        .unwrap();
        let d = spline_derivative(&s).unwrap();
        let h = 1e-6;
        for i in 1..200 {
            let t = -1.0 + i as f64 / 100.0;
            let sec = s.section_of(t).unwrap();
            if s.section_of(t - h).unwrap() != sec || s.section_of(t + h).unwrap() != sec {
                continue;
            }
            let fd = (s.eval(t + h).unwrap() - s.eval(t - h).unwrap()) / (2.0 * h);
            assert!((fd - d.eval(t).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn layout_indexing() {
        let l = CoefficientLayout::equidistant(3, 4, 7.0, &["a", "b"], &["u"]);
        assert_eq!(l.len(), 45);
        assert_eq!(l.per_signal(), 15);
        assert_eq!(l.index(1, 2, 3), 15 + 10 + 3);
        assert_eq!(l.column_names()[16], "alpha_b_s1_1");
        let v: Vec<f64> = (0..45).map(|i| i as f64).collect();
        let b = TrajectoryBundle::from_vector(&l, &v).unwrap();
        assert_eq!(b.signal("u").unwrap().section_coeffs(0)[0], 30.0);
        assert_eq!(b.to_vector(), v);
        assert!(matches!(b.signal("zz"), Err(Error::UnknownSignal(_))));
    }

    #[test]
    fn spline_json_round_trip() {
        let s = LegendreSpline::new("vx", 2, vec![-1.0, 0.0, 1.0], vec![1.0, 0.5, -0.25, 2.0, 0.0, 0.1], 7.0).unwrap();
        let json = serde_json::to_string(&s.to_record()).unwrap();
        assert!(json.contains("\"horizon_s\":7.0") && json.contains("\"signal\":\"vx\""));
        let back: SplineRecord<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(LegendreSpline::from_record(back).unwrap(), s);
    }

    #[test]
    fn bundle_rejects_mismatched_members() {
        let a = LegendreSpline::single("a", vec![0.0, 1.0], 1.0).unwrap();
        let b = LegendreSpline::single("b", vec![0.0, 1.0, 0.0], 1.0).unwrap();
        assert!(TrajectoryBundle::new(vec![a], vec![b]).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let s = LegendreSpline::<f32>::single("x", vec![1.0 / 3.0, 0.0, 2.0 / 3.0], 1.0).unwrap();
        assert!((s.eval(0.5).unwrap() - 0.25).abs() < 1e-6);
    }
}
