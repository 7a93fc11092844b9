//! Legendre-Spline encoding of continuous-time NMPC trajectories, hull-based
//! constraint checks, a collocation NMPC data generator, and explainable
//! learning tools (approximate NMPC, KPI forest monitor, TreeSHAP, symbolic
//! regression).

pub mod approx_nmpc;
pub mod dataset;
pub mod envelope;
pub mod error;
pub mod explain;
pub mod legendre;
pub mod linalg;
pub mod ocp;
pub mod scalar;
pub mod symreg;
pub mod tree_monitor;

pub use error::{Error, Result};
pub use scalar::{Coefficient, Rational, Real};

pub type Basis = legendre::BasisMatrix<f64>;
pub type ExactBasis = legendre::BasisMatrix<Rational>;
pub type Spline = legendre::LegendreSpline<f64>;
pub type SplineF32 = legendre::LegendreSpline<f32>;
pub type Bundle = legendre::TrajectoryBundle<f64>;
pub type Hull = envelope::HullMaps<f64>;
pub type HullF32 = envelope::HullMaps<f32>;
pub type Constraint = envelope::ConstraintSpec<f64>;
