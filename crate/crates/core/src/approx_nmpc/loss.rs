use crate::envelope::{vertex_max, ConstraintKind, ConstraintSpec, HullMaps, Interval};
use crate::error::{Error, Result};
use crate::legendre::CoefficientLayout;

/// `Σᵢ ‖ᾱᵢ − αᵢ‖² / N`.
pub fn loss_mse(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    let mut s = 0.0;
    for (p, t) in pred.iter().zip(target) {
        if p.len() != t.len() {
            return Err(Error::Shape(format!(
                "prediction of length {} for target of length {}",
                p.len(),
                t.len()
            )));
        }
        s += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(s / pred.len() as f64)
}

enum Term {
    Box { signal: usize, lower: f64, upper: f64 },
    Vertex { spec: usize, signals: Vec<usize> },
}

/// Differentiable hull-hinge penalty on physical coefficient vectors.
///
/// Uses the raw control-point extrema, without the outward rounding slack of
/// [`HullMaps::hull`], so the value is piecewise linear in the coefficients.
pub struct ResafeLoss {
    layout: CoefficientLayout,
    constraints: Vec<ConstraintSpec<f64>>,
    maps: HullMaps<f64>,
    terms: Vec<Term>,
    pub eps_tol: f64,
}

impl std::fmt::Debug for ResafeLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResafeLoss")
            .field("constraints", &self.constraints.len())
            .field("regions", &self.maps.regions())
            .field("eps_tol", &self.eps_tol)
            .finish()
    }
}

impl ResafeLoss {
    pub fn new(
        layout: CoefficientLayout,
        constraints: Vec<ConstraintSpec<f64>>,
        maps: HullMaps<f64>,
        eps_tol: f64,
    ) -> Result<Self> {
        if maps.order() != layout.order {
            return Err(Error::Shape(format!(
                "hull maps of order {} for layout of order {}",
                maps.order(),
                layout.order
            )));
        }
        let idx = |name: &str| {
            layout
                .signal_index(name)
                .ok_or_else(|| Error::UnknownSignal(name.to_string()))
        };
        let terms = constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(match &c.kind {
                    ConstraintKind::Box { signal, lower, upper } => Term::Box {
                        signal: idx(signal)?,
                        lower: *lower,
                        upper: *upper,
                    },
                    ConstraintKind::Vertex(g) => Term::Vertex {
                        spec: i,
                        signals: g.signals().iter().map(|s| idx(s)).collect::<Result<_>>()?,
                    },
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            layout,
            constraints,
            maps,
            terms,
            eps_tol,
        })
    }

    pub fn layout(&self) -> &CoefficientLayout {
        &self.layout
    }

    pub fn constraints(&self) -> &[ConstraintSpec<f64>] {
        &self.constraints
    }

    pub fn maps(&self) -> &HullMaps<f64> {
        &self.maps
    }

    fn section(&self, signal: usize, section: usize) -> std::ops::Range<usize> {
        let start = self.layout.index(signal, section, 0);
        start..start + self.layout.order + 1
    }

    /// Penalty of one coefficient vector; adds its subgradient into `grad`.
    pub fn instance(&self, alpha: &[f64], mut grad: Option<&mut [f64]>) -> Result<f64> {
        if alpha.len() != self.layout.len() {
            return Err(Error::Shape(format!(
                "coefficient vector of length {}, layout needs {}",
                alpha.len(),
                self.layout.len()
            )));
        }
        let n = self.layout.order + 1;
        let mut total = 0.0;
        let add_row = |grad: &mut Option<&mut [f64]>, k: usize, range: std::ops::Range<usize>, row: usize, w: f64| {
            if let Some(g) = grad.as_deref_mut() {
                let c = &self.maps.map(k)[row * n..(row + 1) * n];
                for (gi, ci) in g[range].iter_mut().zip(c) {
                    *gi += w * ci;
                }
            }
        };
        for section in 0..self.layout.sections {
            for k in 0..self.maps.regions() {
                for term in &self.terms {
                    match term {
                        Term::Box { signal, lower, upper } => {
                            let r = self.section(*signal, section);
                            let (lo, ilo, hi, ihi) = self.maps.hull_with_argext(k, &alpha[r.clone()]);
                            let up = hi - upper - self.eps_tol;
                            if up > 0.0 {
                                total += up;
                                add_row(&mut grad, k, r.clone(), ihi, 1.0);
                            }
                            let down = lower - lo - self.eps_tol;
                            if down > 0.0 {
                                total += down;
                                add_row(&mut grad, k, r, ilo, -1.0);
                            }
                        }
                        Term::Vertex { spec, signals } => {
                            let c = &self.constraints[*spec];
                            let ConstraintKind::Vertex(g) = &c.kind else {
                                unreachable!()
                            };
                            let ext: Vec<_> = signals
                                .iter()
                                .map(|&s| self.maps.hull_with_argext(k, &alpha[self.section(s, section)]))
                                .collect();
                            let m = ext.len();
                            let boxes: Vec<Interval<f64>> =
                                ext.iter().map(|e| Interval { min: e.0, max: e.2 }).collect();
                            let (best, mask_best) = vertex_max(g.as_ref(), &boxes);
                            let mut vals = vec![0.0; m];
                            let h = best + c.epsilon - self.eps_tol;
                            if h > 0.0 {
                                total += h;
                                if grad.is_some() {
                                    for (i, e) in ext.iter().enumerate() {
                                        vals[i] = if mask_best & (1 << i) != 0 { e.2 } else { e.0 };
                                    }
                                    let mut dg = vec![0.0; m];
                                    g.gradient(&vals, &mut dg);
                                    for (i, e) in ext.iter().enumerate() {
                                        let row = if mask_best & (1 << i) != 0 { e.3 } else { e.1 };
                                        add_row(&mut grad, k, self.section(signals[i], section), row, dg[i]);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(total)
    }

    /// Sum over the batch.
    pub fn batch(&self, pred: &[Vec<f64>]) -> Result<f64> {
        pred.iter().map(|a| self.instance(a, None)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::equidistant_hull_maps;

    fn speed_loss() -> ResafeLoss {
        let layout = CoefficientLayout::equidistant(2, 3, 1.0, &["v"], &[]);
        let c = vec![ConstraintSpec::bounds("v_box", "v", 0.0, 10.0).unwrap()];
        ResafeLoss::new(layout, c, equidistant_hull_maps(3, 2).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn mse_of_unit_difference() {
        let p = vec![vec![1.0; 15]];
        let t = vec![vec![0.0; 15]];
        assert_eq!(loss_mse(&p, &t).unwrap(), 15.0);
        let p2 = vec![p[0].clone(), p[0].clone()];
        assert_eq!(loss_mse(&p2, &[t[0].clone(), t[0].clone()]).unwrap(), 15.0);
        assert!(loss_mse(&p, &[]).is_err());
    }

    #[test]
    fn single_region_overshoot_is_reported_exactly() {
        let l = speed_loss();
        // section 1 constant at 10.2, section 0 inside the box
        let mut a = vec![0.0; 8];
        a[0] = 5.0;
        a[4] = 10.2;
        let v = l.instance(&a, None).unwrap();
        // two regions of section 1 each exceed by 0.2
        assert!((v - 0.4).abs() < 1e-12);
        a[4] = 5.2;
        a[5] = 5.0; // linear on [0.2, 10.2]: the peak only clears the right region
        let v = l.instance(&a, None).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn feasible_vector_has_zero_penalty() {
        let l = speed_loss();
        assert_eq!(
            l.instance(&[5.0, 1.0, 0.5, 0.1, 2.0, 0.0, 0.0, 0.0], None).unwrap(),
            0.0
        );
    }
}
