use crate::error::{Error, Result};
use crate::scalar::Real;
use std::fmt::Debug;
use std::sync::Arc;

/// Scalar path constraint `g(s_1, …, s_n) ≤ 0` over named signals.
///
/// Hull checks evaluate `g` on the vertex tuples of the signals' hull boxes,
/// which bounds `g` on the box whenever the maximum over the box sits on a
/// vertex (e.g. `g` convex in each argument separately).
pub trait VertexConstraint<T>: Send + Sync + Debug {
    fn signals(&self) -> &[String];
    fn eval(&self, values: &[T]) -> T;
    fn gradient(&self, values: &[T], out: &mut [T]);
}

#[derive(Debug, Clone)]
pub enum ConstraintKind<T> {
    Box { signal: String, lower: T, upper: T },
    Vertex(Arc<dyn VertexConstraint<T>>),
}

#[derive(Debug, Clone)]
pub struct ConstraintSpec<T> {
    pub name: String,
    pub kind: ConstraintKind<T>,
    /// Slack added to the vertex maximum of non-multi-affine constraints.
    pub epsilon: T,
}

impl<T: Real> ConstraintSpec<T> {
    pub fn bounds(name: impl Into<String>, signal: impl Into<String>, lower: T, upper: T) -> Result<Self> {
        let name = name.into();
        if !(lower <= upper) {
            return Err(Error::Domain(format!(
                "constraint `{name}`: lower {lower:?} above upper {upper:?}"
            )));
        }
        Ok(Self {
            name,
            kind: ConstraintKind::Box {
                signal: signal.into(),
                lower,
                upper,
            },
            epsilon: T::zero(),
        })
    }

    pub fn vertex(name: impl Into<String>, g: Arc<dyn VertexConstraint<T>>, epsilon: T) -> Self {
        Self {
            name: name.into(),
            kind: ConstraintKind::Vertex(g),
            epsilon,
        }
    }

    pub fn signals(&self) -> Vec<&str> {
        match &self.kind {
            ConstraintKind::Box { signal, .. } => vec![signal.as_str()],
            ConstraintKind::Vertex(g) => g.signals().iter().map(String::as_str).collect(),
        }
    }
}

/// Lateral-slip surrogate `v² |δ| - c ≤ 0`.
///
/// Convex in `v` and in `δ` separately, so its maximum over a hull box is
/// attained at a vertex.
#[derive(Debug, Clone)]
pub struct LateralSlip<T> {
    signals: [String; 2],
    pub limit: T,
}

impl<T: Real> LateralSlip<T> {
    pub fn new(speed: impl Into<String>, steer: impl Into<String>, limit: T) -> Self {
        Self {
            signals: [speed.into(), steer.into()],
            limit,
        }
    }
}

impl<T: Real> VertexConstraint<T> for LateralSlip<T> {
    fn signals(&self) -> &[String] {
        &self.signals
    }

    fn eval(&self, v: &[T]) -> T {
        v[0] * v[0] * v[1].abs() - self.limit
    }

    fn gradient(&self, v: &[T], out: &mut [T]) {
        let two = T::lit(2.0);
        out[0] = two * v[0] * v[1].abs();
        out[1] = v[0] * v[0] * v[1].signum();
        if v[1] == T::zero() {
            out[1] = T::zero();
        }
    }
}
