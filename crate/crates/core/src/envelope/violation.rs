use super::constraint::{ConstraintKind, ConstraintSpec};
use super::hull::{HullMaps, Interval};
use crate::error::{Error, Result};
use crate::legendre::TrajectoryBundle;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEntry {
    pub instance_id: u64,
    pub constraint: String,
    pub section: usize,
    pub region: usize,
    pub magnitude: f64,
}

/// Per constraint, section and region hinge magnitudes for one instance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ViolationReport {
    pub instance_id: u64,
    pub entries: Vec<ViolationEntry>,
}

impl ViolationReport {
    pub fn violates(&self) -> bool {
        self.entries.iter().any(|e| e.magnitude > 0.0)
    }

    pub fn total_magnitude(&self) -> f64 {
        self.entries.iter().map(|e| e.magnitude).sum()
    }

    /// JSON lines of the positive entries.
    pub fn write_json_rows<W: Write>(&self, mut w: W) -> Result<()> {
        for e in self.entries.iter().filter(|e| e.magnitude > 0.0) {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Worst value of `g` over the vertex tuples of per-signal hull intervals.
pub(crate) fn vertex_max(g: &dyn super::VertexConstraint<f64>, hulls: &[Interval<f64>]) -> (f64, usize) {
    let n = hulls.len();
    let mut vals = vec![0.0; n];
    let mut best = f64::NEG_INFINITY;
    let mut best_mask = 0;
    for mask in 0..(1usize << n) {
        for (i, h) in hulls.iter().enumerate() {
            vals[i] = if mask & (1 << i) != 0 { h.max } else { h.min };
        }
        let v = g.eval(&vals);
        if v > best {
            best = v;
            best_mask = mask;
        }
    }
    (best, best_mask)
}

/// Checks every constraint on every section and region of `bundle`.
///
/// Box constraints contribute `max(0, max P - upper - ε_tol) + max(0, lower - min P - ε_tol)`;
/// vertex constraints `max(0, max_vertices g + ε - ε_tol)`.
pub fn check_violations(
    bundle: &TrajectoryBundle<f64>,
    constraints: &[ConstraintSpec<f64>],
    maps: &HullMaps<f64>,
    eps_tol: f64,
    instance_id: u64,
) -> Result<ViolationReport> {
    let mut entries = Vec::new();
    for c in constraints {
        let splines = c
            .signals()
            .iter()
            .map(|s| bundle.signal(s))
            .collect::<Result<Vec<_>>>()?;
        let first = splines
            .first()
            .ok_or_else(|| Error::Domain(format!("constraint `{}` has no signals", c.name)))?;
        if first.order() != maps.order() {
            return Err(Error::Shape(format!(
                "spline order {} but hull maps of order {}",
                first.order(),
                maps.order()
            )));
        }
        for section in 0..first.sections() {
            for region in 0..maps.regions() {
                let hulls: Vec<Interval<f64>> = splines
                    .iter()
                    .map(|s| maps.hull(region, s.section_coeffs(section)))
                    .collect();
                let magnitude = match &c.kind {
                    ConstraintKind::Box { lower, upper, .. } => {
                        let h = hulls[0];
                        (h.max - upper - eps_tol).max(0.0) + (lower - h.min - eps_tol).max(0.0)
                    }
                    ConstraintKind::Vertex(g) => {
                        let (worst, _) = vertex_max(g.as_ref(), &hulls);
                        (worst + c.epsilon - eps_tol).max(0.0)
                    }
                };
                if magnitude.is_nan() {
                    return Err(Error::NumericalFailure(format!("NaN violation for `{}`", c.name)));
                }
                entries.push(ViolationEntry {
                    instance_id,
                    constraint: c.name.clone(),
                    section,
                    region,
                    magnitude,
                });
            }
        }
    }
    Ok(ViolationReport { instance_id, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationStats {
    /// Instances with at least one positive magnitude.
    pub count: usize,
    pub total_magnitude: f64,
    pub rate: f64,
    /// Denominator of `rate`.
    pub instances: usize,
}

impl ViolationStats {
    pub fn from_counts(count: usize, instances: usize, total_magnitude: f64) -> Self {
        Self {
            count,
            total_magnitude,
            rate: count as f64 / instances as f64,
            instances,
        }
    }

    /// `1 - self/baseline` for the count and for the magnitude.
    pub fn reduction_vs(&self, baseline: &ViolationStats) -> (f64, f64) {
        let frac = |a: f64, b: f64| if b > 0.0 { 1.0 - a / b } else { 0.0 };
        (
            frac(self.count as f64, baseline.count as f64),
            frac(self.total_magnitude, baseline.total_magnitude),
        )
    }

    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "count,total_magnitude,rate")?;
        writeln!(w, "{},{:.16e},{:.16e}", self.count, self.total_magnitude, self.rate)?;
        Ok(())
    }
}

pub fn violation_statistics(reports: &[ViolationReport]) -> Result<ViolationStats> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("no violation reports".into()));
    }
    let count = reports.iter().filter(|r| r.violates()).count();
    let total: f64 = reports.iter().map(ViolationReport::total_magnitude).sum();
    Ok(ViolationStats::from_counts(count, reports.len(), total))
}
