use super::model::OcpModel;
use crate::envelope::{equidistant_hull_maps, ConstraintKind, ConstraintSpec, HullMaps, VertexConstraint};
use crate::error::{Error, Result};
use crate::legendre::{gauss_legendre, legendre_derivatives, legendre_values, CoefficientLayout};
use std::sync::Arc;

/// Local collocation nodes per section.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CollocationNodes {
    /// `M` Gauss-Legendre nodes.
    #[default]
    Gauss,
    /// `M` user nodes in the open interval (-1, 1).
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptionOptions {
    pub sections: usize,
    pub order: usize,
    /// Hull regions per section for the path constraints.
    pub regions: usize,
    pub nodes: CollocationNodes,
}

impl Default for TranscriptionOptions {
    fn default() -> Self {
        Self {
            sections: 3,
            order: 4,
            regions: 4,
            nodes: CollocationNodes::Gauss,
        }
    }
}

/// Sparse row of a linear map over the decision vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i]).sum()
    }
}

#[derive(Debug, Clone)]
struct VertexBlock {
    constraint: Arc<dyn VertexConstraint<f64>>,
    epsilon: f64,
    signals: Vec<usize>,
    section: usize,
    region: usize,
}

/// Nonlinear program over the flat Legendre-Spline coefficient vector.
///
/// Equalities: collocated dynamics `D α - (h/2) f` at every node of every
/// section, C⁰ continuity of the states between sections, the initial
/// condition and optional terminal conditions. Inequalities: the Bernstein
/// control points of every region stay inside the box bounds, and every
/// control-point tuple of a vertex constraint satisfies `g + ε ≤ 0`.
#[derive(Debug, Clone)]
pub struct NlpProblem {
    layout: CoefficientLayout,
    model: Arc<dyn OcpModel>,
    constraints: Vec<ConstraintSpec<f64>>,
    maps: HullMaps<f64>,
    x0: Vec<f64>,
    node_tau: Vec<f64>,
    node_p: Vec<Vec<f64>>,
    node_dp: Vec<Vec<f64>>,
    cost_rows: Vec<SparseRow>,
    cost_offset: Vec<f64>,
    gn_hessian: Vec<f64>,
    box_rows: Vec<SparseRow>,
    box_rhs: Vec<f64>,
    vertex_blocks: Vec<VertexBlock>,
    terminal: Vec<(usize, f64)>,
}

/// Region-local control-point indices for box rows, skipping the point
/// shared with the previous region.
fn region_points(order: usize, region: usize) -> std::ops::RangeInclusive<usize> {
    if region == 0 {
        0..=order
    } else {
        1..=order
    }
}

pub fn transcribe(model: Arc<dyn OcpModel>, options: &TranscriptionOptions) -> Result<NlpProblem> {
    let (ns, m) = (options.sections, options.order);
    if ns == 0 {
        return Err(Error::Domain("need at least one section".into()));
    }
    if m < 2 {
        return Err(Error::Domain(format!("order {m} below 2")));
    }
    let states = model.state_names();
    let controls = model.control_names();
    let layout = CoefficientLayout {
        sections: ns,
        order: m,
        breakpoints: crate::legendre::equidistant_breakpoints(ns),
        horizon_s: model.horizon_s(),
        state_names: states.clone(),
        control_names: controls.clone(),
    };
    layout.validate()?;
    if !(layout.horizon_s > 0.0) {
        return Err(Error::Domain("horizon must be positive".into()));
    }
    let x0 = model.initial_state();
    if x0.len() != states.len() {
        return Err(Error::Shape(format!(
            "initial state of length {} for {} states",
            x0.len(),
            states.len()
        )));
    }
    let node_tau = match &options.nodes {
        CollocationNodes::Gauss => gauss_legendre::<f64>(m).0,
        CollocationNodes::Custom(v) => {
            if v.len() != m || v.iter().any(|t| !(*t > -1.0 && *t < 1.0)) {
                return Err(Error::Shape(format!("need {m} collocation nodes inside (-1, 1)")));
            }
            v.clone()
        }
    };
    let node_p = node_tau.iter().map(|&t| legendre_values(m, t)).collect();
    let node_dp = node_tau.iter().map(|&t| legendre_derivatives(m, t)).collect();

    let n_sig = layout.n_signals();
    let n = layout.len();
    let bp = &layout.breakpoints;

    // least-squares cost rows: Gauss quadrature with M+1 nodes per section
    let (qt, qw) = gauss_legendre::<f64>(m + 1);
    let mut cost_rows = Vec::new();
    let mut cost_offset = Vec::new();
    for term in model.stage_cost() {
        if term.signal >= n_sig {
            return Err(Error::Shape(format!("cost term on signal {}", term.signal)));
        }
        if term.weight == 0.0 {
            continue;
        }
        for i in 0..ns {
            let half = 0.5 * layout.horizon_s * (bp[i + 1] - bp[i]) / 2.0;
            for (&t, &w) in qt.iter().zip(&qw) {
                let s = (term.weight * w * half).sqrt();
                let p = legendre_values(m, t);
                cost_rows.push(SparseRow {
                    idx: (0..=m).map(|j| layout.index(term.signal, i, j)).collect(),
                    val: p.iter().map(|v| s * v).collect(),
                });
                cost_offset.push(s * term.reference);
            }
        }
    }
    for term in model.terminal_cost() {
        if term.weight == 0.0 {
            continue;
        }
        let s = term.weight.sqrt();
        cost_rows.push(SparseRow {
            idx: (0..=m).map(|j| layout.index(term.signal, ns - 1, j)).collect(),
            val: vec![s; m + 1],
        });
        cost_offset.push(s * term.reference);
    }
    let mut gn_hessian = vec![0.0; n * n];
    for row in &cost_rows {
        for (&a, &va) in row.idx.iter().zip(&row.val) {
            for (&b, &vb) in row.idx.iter().zip(&row.val) {
                gn_hessian[a * n + b] += 2.0 * va * vb;
            }
        }
    }

    let constraints = model.constraints()?;
    let maps = equidistant_hull_maps::<f64>(m, options.regions)?;
    let mut box_rows = Vec::new();
    let mut box_rhs = Vec::new();
    let mut vertex_blocks = Vec::new();
    let lookup = |name: &str| {
        layout
            .signal_index(name)
            .ok_or_else(|| Error::UnknownSignal(name.to_string()))
    };
    for c in &constraints {
        match &c.kind {
            ConstraintKind::Box { signal, lower, upper } => {
                let sig = lookup(signal)?;
                for i in 0..ns {
                    let idx: Vec<usize> = (0..=m).map(|j| layout.index(sig, i, j)).collect();
                    for k in 0..maps.regions() {
                        let cm = maps.map(k);
                        for p in region_points(m, k) {
                            let coef = &cm[p * (m + 1)..(p + 1) * (m + 1)];
                            if upper.is_finite() {
                                box_rows.push(SparseRow {
                                    idx: idx.clone(),
                                    val: coef.to_vec(),
                                });
                                box_rhs.push(*upper);
                            }
                            if lower.is_finite() {
                                box_rows.push(SparseRow {
                                    idx: idx.clone(),
                                    val: coef.iter().map(|v| -v).collect(),
                                });
                                box_rhs.push(-*lower);
                            }
                        }
                    }
                }
            }
            ConstraintKind::Vertex(g) => {
                let signals = g.signals().iter().map(|s| lookup(s)).collect::<Result<Vec<_>>>()?;
                for section in 0..ns {
                    for region in 0..maps.regions() {
                        vertex_blocks.push(VertexBlock {
                            constraint: g.clone(),
                            epsilon: c.epsilon,
                            signals: signals.clone(),
                            section,
                            region,
                        });
                    }
                }
            }
        }
    }
    let terminal = model.terminal_equalities();
    if terminal.iter().any(|(s, _)| *s >= states.len()) {
        return Err(Error::Shape("terminal condition on a non-state signal".into()));
    }
    Ok(NlpProblem {
        layout,
        model,
        constraints,
        maps,
        x0,
        node_tau,
        node_p,
        node_dp,
        cost_rows,
        cost_offset,
        gn_hessian,
        box_rows,
        box_rhs,
        vertex_blocks,
        terminal,
    })
}

impl NlpProblem {
    pub fn layout(&self) -> &CoefficientLayout {
        &self.layout
    }

    pub fn model(&self) -> &Arc<dyn OcpModel> {
        &self.model
    }

    /// Path constraints as specified by the model (for continuous-time checks).
    pub fn constraints(&self) -> &[ConstraintSpec<f64>] {
        &self.constraints
    }

    pub fn hull_maps(&self) -> &HullMaps<f64> {
        &self.maps
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    pub fn n_vars(&self) -> usize {
        self.layout.len()
    }

    pub fn n_equalities(&self) -> usize {
        let nx = self.layout.n_states();
        let ns = self.layout.sections;
        ns * self.node_tau.len() * nx + (ns - 1) * nx + nx + self.terminal.len()
    }

    pub fn n_inequalities(&self) -> usize {
        let m = self.layout.order;
        let per_block: usize = self
            .vertex_blocks
            .iter()
            .map(|b| (m + 1).pow(b.signals.len() as u32))
            .sum();
        self.box_rows.len() + per_block
    }

    /// Local collocation nodes in τ*.
    pub fn collocation_nodes(&self) -> &[f64] {
        &self.node_tau
    }

    /// Gradient-free cost value `Σ r²`.
    pub fn cost(&self, alpha: &[f64]) -> f64 {
        self.cost_rows
            .iter()
            .zip(&self.cost_offset)
            .map(|(r, b)| {
                let e = r.dot(alpha) - b;
                e * e
            })
            .sum()
    }

    /// Cost gradient `2 Jᵀ r`.
    pub fn cost_gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; alpha.len()];
        for (r, b) in self.cost_rows.iter().zip(&self.cost_offset) {
            let e = 2.0 * (r.dot(alpha) - b);
            for (&i, &v) in r.idx.iter().zip(&r.val) {
                g[i] += e * v;
            }
        }
        g
    }

    /// Row-major Gauss-Newton Hessian `2 JᵀJ` of the cost.
    pub fn gn_hessian(&self) -> &[f64] {
        &self.gn_hessian
    }

    /// Equality residuals and (optionally) their row-major Jacobian.
    pub fn equalities(&self, alpha: &[f64], mut jac: Option<&mut [f64]>) -> Vec<f64> {
        let l = &self.layout;
        let (nx, nu, ns, m) = (l.n_states(), l.n_controls(), l.sections, l.order);
        let n = l.len();
        let bp = &l.breakpoints;
        let mut c = Vec::with_capacity(self.n_equalities());
        if let Some(j) = jac.as_deref_mut() {
            j.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut x = vec![0.0; nx];
        let mut u = vec![0.0; nu];
        let mut f = vec![0.0; nx];
        let mut fx = vec![0.0; nx * nx];
        let mut fu = vec![0.0; nx * nu];
        for i in 0..ns {
            let half = 0.5 * l.horizon_s * (bp[i + 1] - bp[i]) / 2.0;
            for (q, &t) in self.node_tau.iter().enumerate() {
                let p = &self.node_p[q];
                let dp = &self.node_dp[q];
                for s in 0..nx {
                    x[s] = (0..=m).map(|j| alpha[l.index(s, i, j)] * p[j]).sum();
                }
                for s in 0..nu {
                    u[s] = (0..=m).map(|j| alpha[l.index(nx + s, i, j)] * p[j]).sum();
                }
                let tau = bp[i] + (t + 1.0) * 0.5 * (bp[i + 1] - bp[i]);
                self.model.dynamics(tau, &x, &u, &mut f, &mut fx, &mut fu);
                for s in 0..nx {
                    let row = c.len();
                    let d: f64 = (0..=m).map(|j| alpha[l.index(s, i, j)] * dp[j]).sum();
                    c.push(d - half * f[s]);
                    if let Some(jm) = jac.as_deref_mut() {
                        let r = &mut jm[row * n..(row + 1) * n];
                        for j in 0..=m {
                            r[l.index(s, i, j)] += dp[j];
                        }
                        for s2 in 0..nx {
                            let a = fx[s * nx + s2];
                            if a != 0.0 {
                                for j in 0..=m {
                                    r[l.index(s2, i, j)] -= half * a * p[j];
                                }
                            }
                        }
                        for c2 in 0..nu {
                            let a = fu[s * nu + c2];
                            if a != 0.0 {
                                for j in 0..=m {
                                    r[l.index(nx + c2, i, j)] -= half * a * p[j];
                                }
                            }
                        }
                    }
                }
            }
        }
        let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..ns.saturating_sub(1) {
            for s in 0..nx {
                let row = c.len();
                let mut v = 0.0;
                for j in 0..=m {
                    v += alpha[l.index(s, i, j)] - sign(j) * alpha[l.index(s, i + 1, j)];
                }
                c.push(v);
                if let Some(jm) = jac.as_deref_mut() {
                    for j in 0..=m {
                        jm[row * n + l.index(s, i, j)] = 1.0;
                        jm[row * n + l.index(s, i + 1, j)] = -sign(j);
                    }
                }
            }
        }
        for s in 0..nx {
            let row = c.len();
            let v: f64 = (0..=m).map(|j| sign(j) * alpha[l.index(s, 0, j)]).sum();
            c.push(v - self.x0[s]);
            if let Some(jm) = jac.as_deref_mut() {
                for j in 0..=m {
                    jm[row * n + l.index(s, 0, j)] = sign(j);
                }
            }
        }
        for &(s, value) in &self.terminal {
            let row = c.len();
            let v: f64 = (0..=m).map(|j| alpha[l.index(s, ns - 1, j)]).sum();
            c.push(v - value);
            if let Some(jm) = jac.as_deref_mut() {
                for j in 0..=m {
                    jm[row * n + l.index(s, ns - 1, j)] = 1.0;
                }
            }
        }
        c
    }

    /// Inequality values `g(α) ≤ 0`; with `rows`, also their linearizations.
    pub fn inequalities(&self, alpha: &[f64], mut rows: Option<&mut Vec<SparseRow>>) -> Vec<f64> {
        let l = &self.layout;
        let m = l.order;
        let mut g: Vec<f64> = self
            .box_rows
            .iter()
            .zip(&self.box_rhs)
            .map(|(r, b)| r.dot(alpha) - b)
            .collect();
        if let Some(out) = rows.as_deref_mut() {
            out.clear();
            out.extend(self.box_rows.iter().cloned());
        }
        let mut vals = Vec::new();
        let mut grad = Vec::new();
        for b in &self.vertex_blocks {
            let cm = self.maps.map(b.region);
            let pts: Vec<Vec<f64>> = b
                .signals
                .iter()
                .map(|&s| {
                    let a: Vec<f64> = (0..=m).map(|j| alpha[l.index(s, b.section, j)]).collect();
                    self.maps.control_points(b.region, &a)
                })
                .collect();
            // a shared endpoint still pairs with this region's other signals
            let range: Vec<usize> = (0..=m).collect();
            let k = b.signals.len();
            vals.resize(k, 0.0);
            grad.resize(k, 0.0);
            let total = range.len().pow(k as u32);
            for combo in 0..total {
                let mut rem = combo;
                let mut chosen = Vec::with_capacity(k);
                for (d, p) in pts.iter().enumerate() {
                    let pi = range[rem % range.len()];
                    rem /= range.len();
                    vals[d] = p[pi];
                    chosen.push(pi);
                }
                g.push(b.constraint.eval(&vals) + b.epsilon);
                if let Some(out) = rows.as_deref_mut() {
                    b.constraint.gradient(&vals, &mut grad);
                    let mut row = SparseRow::default();
                    for (d, &sig) in b.signals.iter().enumerate() {
                        let coef = &cm[chosen[d] * (m + 1)..(chosen[d] + 1) * (m + 1)];
                        for j in 0..=m {
                            row.idx.push(l.index(sig, b.section, j));
                            row.val.push(grad[d] * coef[j]);
                        }
                    }
                    out.push(row);
                }
            }
        }
        g
    }

    /// Cold start: states held at `x̄₀`, controls zero.
    pub fn cold_start(&self) -> Vec<f64> {
        let l = &self.layout;
        let mut a = vec![0.0; l.len()];
        for (s, &v) in self.x0.iter().enumerate() {
            for i in 0..l.sections {
                a[l.index(s, i, 0)] = v;
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocp::{DoubleIntegrator, OcpDefinition, ScenarioParams};

    fn bicycle() -> NlpProblem {
        let def = OcpDefinition {
            x0: [0.0, 0.0, 10.0, 0.0, 0.125],
            params: ScenarioParams {
                v_ref: 10.0,
                curvature: [0.0; 3],
            },
            ..Default::default()
        };
        transcribe(Arc::new(def), &TranscriptionOptions::default()).unwrap()
    }

    #[test]
    fn decision_vector_has_105_entries() {
        assert_eq!(bicycle().n_vars(), 105);
    }

    #[test]
    fn straight_cruise_is_feasible() {
        // v̇ = 4 t_r - 0.05 v = 0 at v = 10, t_r = 0.125
        let nlp = bicycle();
        let a = nlp.cold_start();
        let c = nlp.equalities(&a, None);
        assert!(c.iter().all(|v| v.abs() < 1e-9));
        let g = nlp.inequalities(&a, None);
        assert!(g.iter().all(|v| *v <= 0.0));
        assert_eq!(g.len(), nlp.n_inequalities());
    }

    #[test]
    fn equality_jacobian_matches_finite_differences() {
        let def = OcpDefinition {
            x0: [0.2, 0.05, 9.0, 0.02, 0.1],
            params: ScenarioParams {
                v_ref: 11.0,
                curvature: [0.01, 0.02, -0.01],
            },
            ..Default::default()
        };
        let nlp = transcribe(Arc::new(def), &TranscriptionOptions::default()).unwrap();
        let n = nlp.n_vars();
        let me = nlp.n_equalities();
        let a: Vec<f64> = (0..n).map(|i| 0.05 * ((i * 7) % 11) as f64 - 0.2).collect();
        let mut jac = vec![0.0; me * n];
        nlp.equalities(&a, Some(&mut jac));
        let h = 1e-6;
        for k in 0..n {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[k] += h;
            am[k] -= h;
            let cp = nlp.equalities(&ap, None);
            let cm = nlp.equalities(&am, None);
            for r in 0..me {
                let fd = (cp[r] - cm[r]) / (2.0 * h);
                assert!((fd - jac[r * n + k]).abs() < 1e-6 * (1.0 + fd.abs()), "row {r} col {k}");
            }
        }
    }

    #[test]
    fn inequality_rows_match_finite_differences() {
        let nlp = bicycle();
        let n = nlp.n_vars();
        // generic point, away from the |δ| kink
        let a: Vec<f64> = (0..n).map(|i| 0.3 * (1.7 * i as f64 + 0.3).sin() + 0.05).collect();
        let mut rows = Vec::new();
        let g = nlp.inequalities(&a, Some(&mut rows));
        assert_eq!(rows.len(), g.len());
        let h = 1e-6;
        for k in (0..n).step_by(3) {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[k] += h;
            am[k] -= h;
            let gp = nlp.inequalities(&ap, None);
            let gm = nlp.inequalities(&am, None);
            for (r, row) in rows.iter().enumerate() {
                let fd = (gp[r] - gm[r]) / (2.0 * h);
                let an: f64 = row
                    .idx
                    .iter()
                    .zip(&row.val)
                    .filter(|(i, _)| **i == k)
                    .map(|(_, v)| *v)
                    .sum();
                assert!((fd - an).abs() < 1e-5 * (1.0 + fd.abs()), "row {r} col {k}");
            }
        }
    }

    #[test]
    fn double_integrator_dimensions() {
        let di = DoubleIntegrator {
            horizon_s: 2.0,
            distance: 1.0,
        };
        let opts = TranscriptionOptions {
            sections: 1,
            order: 4,
            ..Default::default()
        };
        let nlp = transcribe(Arc::new(di), &opts).unwrap();
        assert_eq!(nlp.n_vars(), 15);
        assert_eq!(nlp.n_equalities(), 4 * 2 + 2 + 2);
    }

    #[test]
    fn low_order_rejected() {
        let opts = TranscriptionOptions {
            order: 1,
            ..Default::default()
        };
        assert!(transcribe(Arc::new(OcpDefinition::default()), &opts).is_err());
    }
}
