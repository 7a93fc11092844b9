//! Genetic-programming symbolic regression over a small operator set, with
//! a complexity/accuracy Pareto front and grid inversion of formulas.

mod expr;
mod gp;

pub use expr::{BinaryOp, Evaluated, Expr, UnaryOp, BINARY, SATURATION, UNARY};
pub use gp::{evolve, FrontMember, GpConfig, GpResult};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Evaluates `expr` on `features`, whose names must cover every referenced variable.
pub fn eval_expression(expr: &Expr, features: &[f64]) -> Result<Evaluated> {
    expr.eval(features)
}

/// Grid classification of a feature box by `expr ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub bounds: Vec<(f64, f64)>,
    pub resolution: usize,
    /// Row-major cells, first feature varying slowest.
    pub feasible: Vec<bool>,
}

impl FeasibleRegion {
    pub fn fraction(&self) -> f64 {
        self.feasible.iter().filter(|&&f| f).count() as f64 / self.feasible.len().max(1) as f64
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let n = self.resolution;
        let d = self.bounds.len();
        let mut idx = vec![0; d];
        let mut c = cell;
        for k in (0..d).rev() {
            idx[k] = c % n;
            c /= n;
        }
        idx.iter()
            .zip(&self.bounds)
            .map(|(&i, &(lo, hi))| lo + (i as f64 + 0.5) * (hi - lo) / n as f64)
            .collect()
    }

    /// `cell,<feature centers…>,feasible`.
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[String]) -> Result<()> {
        write!(w, "cell")?;
        for n in names.iter().take(self.bounds.len()) {
            write!(w, ",{n}")?;
        }
        writeln!(w, ",feasible")?;
        for (i, f) in self.feasible.iter().enumerate() {
            write!(w, "{i}")?;
            for c in self.cell_center(i) {
                write!(w, ",{c:.16e}")?;
            }
            writeln!(w, ",{}", *f as u8)?;
        }
        Ok(())
    }
}

/// Scans a `resolution^d` grid of cell centres; `expr` may use at most 3 features.
pub fn invert_threshold(expr: &Expr, bound: f64, bounds: &[(f64, f64)], resolution: usize) -> Result<FeasibleRegion> {
    let vars = expr.variables();
    if vars.len() > 3 || bounds.len() > 3 {
        return Err(Error::Dimensionality {
            features: vars.len().max(bounds.len()),
            max: 3,
        });
    }
    if vars.last().is_some_and(|&m| m >= bounds.len()) {
        return Err(Error::Schema("expression references a feature outside the box".into()));
    }
    if resolution == 0 || bounds.iter().any(|(lo, hi)| !(hi >= lo)) {
        return Err(Error::Domain("invalid grid".into()));
    }
    let mut region = FeasibleRegion {
        bounds: bounds.to_vec(),
        resolution,
        feasible: Vec::new(),
    };
    let cells = resolution.pow(bounds.len() as u32);
    region.feasible = (0..cells)
        .map(|c| {
            let e = expr.eval(&region.cell_center(c))?;
            Ok(!e.saturated && e.value <= bound)
        })
        .collect::<Result<_>>()?;
    Ok(region)
}

/// Writes the front as a JSON list.
pub fn write_front<W: Write>(w: W, front: &[FrontMember]) -> Result<()> {
    serde_json::to_writer_pretty(w, front)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_feature_threshold() {
        let e = Expr::parse("x0", &[]).unwrap();
        let r = invert_threshold(&e, 0.5, &[(0.0, 1.0)], 100).unwrap();
        assert_eq!(r.feasible.iter().filter(|&&f| f).count(), 50);
        assert!(r.feasible[..50].iter().all(|&f| f));
        let all = invert_threshold(&e, 2.0, &[(0.0, 1.0)], 100).unwrap();
        assert_eq!(all.fraction(), 1.0);
    }

    #[test]
    fn four_features_rejected() {
        let e = Expr::parse("x0 + x1 + x2 + x3", &[]).unwrap();
        assert!(matches!(
            invert_threshold(&e, 0.0, &[(0.0, 1.0); 4], 4),
            Err(Error::Dimensionality { features: 4, max: 3 })
        ));
    }
}
