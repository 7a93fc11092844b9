//! Scalar abstractions shared by the spectral and hull layers.
//!
//! The Legendre basis is built in exact rational arithmetic and can be
//! materialized in any [`Coefficient`] type; evaluation, fitting and hull
//! computations are generic over [`Real`] (`f32` or `f64`).

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use std::fmt::Debug;

/// Exact rational used for the monomial form of the Legendre basis.
pub type Rational = num_rational::Ratio<i128>;

/// A number type that can hold Legendre monomial coefficients.
pub trait Coefficient: Num + Clone + Debug {
    fn from_ratio(numer: i128, denom: i128) -> Self;
}

impl Coefficient for Rational {
    fn from_ratio(numer: i128, denom: i128) -> Self {
        Rational::new(numer, denom)
    }
}

impl Coefficient for f64 {
    fn from_ratio(numer: i128, denom: i128) -> Self {
        numer as f64 / denom as f64
    }
}

impl Coefficient for f32 {
    fn from_ratio(numer: i128, denom: i128) -> Self {
        (numer as f64 / denom as f64) as f32
    }
}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + ToPrimitive + Coefficient + Debug + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`; used for literals.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
