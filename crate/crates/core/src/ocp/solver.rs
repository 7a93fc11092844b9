use super::qp::{solve_qp, QpFailure};
use super::transcribe::{NlpProblem, SparseRow};
use crate::error::{Error, Result};
use crate::legendre::TrajectoryBundle;
use crate::linalg::HouseholderQr;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// What the K₂ (solve time) KPI reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    /// Deterministic cost model over solver work (iterations, active-set
    /// changes, merit evaluations), in nominal milliseconds.
    #[default]
    Modeled,
    /// Measured wall-clock time.
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Threshold on the KKT residual.
    pub tolerance: f64,
    /// Initial Levenberg damping.
    pub damping: f64,
    pub timing: TimingMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            damping: 1e-8,
            timing: TimingMode::Modeled,
        }
    }
}

/// Nominal cost per unit of solver work for [`TimingMode::Modeled`].
const MS_PER_ITERATION: f64 = 0.6;
const MS_PER_ACTIVE_CHANGE: f64 = 0.02;
const MS_PER_MERIT_EVAL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Optimal cost K₁.
    pub cost: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub modeled_ms: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    pub active_set_changes: usize,
    pub merit_evaluations: usize,
    /// QPs whose linearized constraints were inconsistent and got relaxed.
    pub relaxed_qps: usize,
}

impl SolveStats {
    /// K₂ in milliseconds under `mode`.
    pub fn k2_ms(&self, mode: TimingMode) -> f64 {
        match mode {
            TimingMode::Modeled => self.modeled_ms,
            TimingMode::Wall => self.wall_ms,
        }
    }
}

struct Point {
    c: Vec<f64>,
    g: Vec<f64>,
    f: f64,
}

impl Point {
    fn violation(&self) -> f64 {
        self.c.iter().map(|v| v.abs()).sum::<f64>() + self.g.iter().map(|v| v.max(0.0)).sum::<f64>()
    }

    fn merit(&self, nu: f64) -> f64 {
        self.f + nu * self.violation()
    }
}

fn evaluate(nlp: &NlpProblem, a: &[f64]) -> Point {
    Point {
        c: nlp.equalities(a, None),
        g: nlp.inequalities(a, None),
        f: nlp.cost(a),
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Damped Gauss-Newton SQP with an ℓ₁ merit line search.
///
/// Each iteration linearizes the equalities and inequalities, eliminates the
/// equalities with a QR null-space basis, solves the reduced inequality QP
/// and backtracks on `f + ν (‖c‖₁ + Σ max(0, g))`. Converged when
/// `max(‖Zᵀ(∇f + Gᵀλ)‖∞, primal infeasibility, |λ ∘ g|∞)` drops below the
/// tolerance; the iterate at which this holds is returned.
pub fn solve(
    nlp: &NlpProblem,
    warm_start: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<(TrajectoryBundle<f64>, SolveStats)> {
    let start = Instant::now();
    let n = nlp.n_vars();
    let mut alpha = match warm_start {
        Some(w) => {
            if w.len() != n {
                return Err(Error::Shape(format!(
                    "warm start of length {} for {} variables",
                    w.len(),
                    n
                )));
            }
            w.to_vec()
        }
        None => nlp.cold_start(),
    };
    let me = nlp.n_equalities();
    let nz = n - me;
    let hess = nlp.gn_hessian();
    let mut jac = vec![0.0; me * n];
    let mut rows: Vec<SparseRow> = Vec::new();
    let mut mu = options.damping;
    let mut nu = 1.0;
    let mut stats = SolveStats {
        cost: f64::NAN,
        iterations: 0,
        wall_ms: 0.0,
        modeled_ms: 0.0,
        kkt_residual: f64::INFINITY,
        converged: false,
        active_set_changes: 0,
        merit_evaluations: 0,
        relaxed_qps: 0,
    };

    for _ in 0..options.max_iterations {
        stats.iterations += 1;
        let c = nlp.equalities(&alpha, Some(&mut jac));
        let g = nlp.inequalities(&alpha, Some(&mut rows));
        let f = nlp.cost(&alpha);
        let grad = nlp.cost_gradient(&alpha);
        if !f.is_finite() || !all_finite(&c) || !all_finite(&g) || !all_finite(&jac) {
            return Err(Error::NumericalFailure("non-finite residuals".into()));
        }
        stats.cost = f;

        // row-major A_e is column-major A_eᵀ
        let qr = HouseholderQr::new(jac.clone(), n, me)?;
        if qr.diagonal_ratio() < 1e-13 {
            return Err(Error::NumericalFailure("equality Jacobian is rank deficient".into()));
        }
        let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
        let dp = qr.expand(&qr.solve_upper_transposed(&neg_c));
        let z = qr.complement_basis();
        let zcol = |k: usize| &z[k * n..(k + 1) * n];

        let mut hz = vec![0.0; n * nz];
        for k in 0..nz {
            let col = zcol(k);
            for i in 0..n {
                let row = &hess[i * n..(i + 1) * n];
                hz[k * n + i] = row.iter().zip(col).map(|(a, b)| a * b).sum::<f64>() + mu * col[i];
            }
        }
        let mut h_red = vec![0.0; nz * nz];
        for a in 0..nz {
            for b in 0..nz {
                h_red[a * nz + b] = zcol(a).iter().zip(&hz[b * n..(b + 1) * n]).map(|(x, y)| x * y).sum();
            }
        }
        let hdp: Vec<f64> = (0..n)
            .map(|i| {
                hess[i * n..(i + 1) * n]
                    .iter()
                    .zip(&dp)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + mu * dp[i]
            })
            .collect();
        let lin: Vec<f64> = grad.iter().zip(&hdp).map(|(a, b)| a + b).collect();
        let c_red: Vec<f64> = (0..nz)
            .map(|k| zcol(k).iter().zip(&lin).map(|(x, y)| x * y).sum())
            .collect();

        let m = rows.len();
        let mut a_qp = vec![0.0; m * nz];
        let mut b_qp = vec![0.0; m];
        for (r, row) in rows.iter().enumerate() {
            for k in 0..nz {
                let col = zcol(k);
                a_qp[r * nz + k] = -row.idx.iter().zip(&row.val).map(|(&i, &v)| v * col[i]).sum::<f64>();
            }
            b_qp[r] = g[r] + row.dot(&dp);
        }
        let qp = match solve_qp(&h_red, &c_red, &a_qp, &b_qp) {
            Ok(s) => s,
            Err(QpFailure::Infeasible) | Err(QpFailure::IterationLimit) => {
                stats.relaxed_qps += 1;
                let relaxed: Vec<f64> = b_qp.iter().map(|v| v.min(0.0)).collect();
                solve_qp(&h_red, &c_red, &a_qp, &relaxed)
                    .map_err(|e| Error::NumericalFailure(format!("relaxed QP failed: {e:?}")))?
            }
            Err(QpFailure::NotConvex) => {
                return Err(Error::NumericalFailure("reduced Hessian not positive definite".into()))
            }
        };
        stats.active_set_changes += qp.changes;
        let lambda = &qp.multipliers;

        let mut d = dp.clone();
        for k in 0..nz {
            let col = zcol(k);
            for i in 0..n {
                d[i] += qp.x[k] * col[i];
            }
        }

        // KKT residual at the current iterate
        let mut sg = grad.clone();
        for (row, &l) in rows.iter().zip(lambda) {
            if l != 0.0 {
                for (&i, &v) in row.idx.iter().zip(&row.val) {
                    sg[i] += l * v;
                }
            }
        }
        let stationarity = (0..nz)
            .map(|k| zcol(k).iter().zip(&sg).map(|(x, y)| x * y).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let primal = c
            .iter()
            .map(|v| v.abs())
            .chain(g.iter().map(|v| v.max(0.0)))
            .fold(0.0, f64::max);
        let compl = lambda.iter().zip(&g).map(|(l, v)| (l * v).abs()).fold(0.0, f64::max);
        stats.kkt_residual = stationarity.max(primal).max(compl);
        if stats.kkt_residual < options.tolerance {
            stats.converged = true;
            break;
        }

        // equality multipliers for the penalty parameter
        let hd: Vec<f64> = (0..n)
            .map(|i| hess[i * n..(i + 1) * n].iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() + mu * d[i])
            .collect();
        let mut v: Vec<f64> = sg.iter().zip(&hd).map(|(a, b)| -(a + b)).collect();
        qr.apply_qt(&mut v);
        let y = qr.solve_upper(&v[..me]);
        let dual_max = y.iter().chain(lambda.iter()).fold(0.0f64, |s, v| s.max(v.abs()));
        if nu < 1.1 * dual_max {
            nu = 1.5 * dual_max + 1e-3;
        }

        let here = Point { c, g, f };
        let phi0 = here.merit(nu);
        let slope = grad.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() - nu * here.violation();
        let mut t = 1.0;
        let mut accepted = None;
        for attempt in 0..30 {
            let trial: Vec<f64> = alpha.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let p = evaluate(nlp, &trial);
            stats.merit_evaluations += 1;
            let phi = p.merit(nu);
            if phi.is_finite() && phi <= phi0 + 1e-4 * t * slope.min(0.0) {
                accepted = Some(trial);
                break;
            }
            if attempt == 0 && phi.is_finite() {
                // second-order correction against constraint curvature
                let neg: Vec<f64> = p.c.iter().map(|v| -v).collect();
                let soc = qr.expand(&qr.solve_upper_transposed(&neg));
                let corrected: Vec<f64> = trial.iter().zip(&soc).map(|(a, b)| a + b).collect();
                let pc = evaluate(nlp, &corrected);
                stats.merit_evaluations += 1;
                let phic = pc.merit(nu);
                if phic.is_finite() && phic <= phi0 + 1e-4 * slope.min(0.0) {
                    accepted = Some(corrected);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => {
                alpha = next;
                mu = if t == 1.0 {
                    (mu * 0.1).max(1e-10)
                } else {
                    (mu * 10.0).min(1e2)
                };
            }
            None => mu = (mu * 100.0).max(1e-4).min(1e4),
        }
    }
    stats.cost = nlp.cost(&alpha);
    stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    stats.modeled_ms = MS_PER_ITERATION * stats.iterations as f64
        + MS_PER_ACTIVE_CHANGE * stats.active_set_changes as f64
        + MS_PER_MERIT_EVAL * stats.merit_evaluations as f64;
    let bundle = TrajectoryBundle::from_vector(nlp.layout(), &alpha)?;
    Ok((bundle, stats))
}
