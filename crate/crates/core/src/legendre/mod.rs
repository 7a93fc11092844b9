//! Legendre polynomial algebra and Legendre-Spline trajectories.
//!
//! A signal over the normalized horizon τ ∈ [-1, 1] is split into `N_S`
//! sections; on each section it is a degree-`M` series
//! `x(τ*) = Σ_j α_j P_j(τ*) = αᵀ L_M v(τ*)` in the local coordinate τ*.

mod basis;
mod fit;
mod quadrature;
mod spline;

pub use basis::{build_basis, legendre_derivatives, legendre_values, BasisMatrix, MAX_ORDER};
pub use fit::{fit_spline, FitOptions, SplineFit};
pub use quadrature::gauss_legendre;
pub use spline::{
    denormalize_time, equidistant_breakpoints, eval_spline, eval_tls, normalize_time, spline_derivative,
    CoefficientLayout, LegendreSpline, SplineRecord, TrajectoryBundle,
};

/// Size of a spline encoding against a sampled trajectory of the same horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalityReport {
    pub coefficients: usize,
    pub samples: usize,
    pub reduction: f64,
}

impl DimensionalityReport {
    /// `N_S (M+1)` coefficients per signal against `T_H / T_s` samples.
    pub fn new(sections: usize, order: usize, horizon_s: f64, step_s: f64) -> Self {
        let coefficients = sections * (order + 1);
        let samples = (horizon_s / step_s).round() as usize;
        let reduction = 1.0 - coefficients as f64 / samples as f64;
        Self {
            coefficients,
            samples,
            reduction,
        }
    }

    /// Reduction as a percentage with two decimals, e.g. `95.71%`.
    pub fn percent(&self) -> String {
        format!("{:.2}%", 100.0 * self.reduction)
    }
}
