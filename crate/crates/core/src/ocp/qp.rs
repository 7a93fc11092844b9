//! Dense strictly convex QP `min ½ zᵀHz + cᵀz  s.t.  A z ≥ b` by the
//! Goldfarb–Idnani dual active-set method.

use crate::linalg::Cholesky;

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One multiplier per constraint row (zero when inactive).
    pub multipliers: Vec<f64>,
    pub active: Vec<usize>,
    /// Active-set additions and removals.
    pub changes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpFailure {
    Infeasible,
    NotConvex,
    IterationLimit,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(m: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], x)).collect()
}

/// `h` is row-major `n × n`, `a` row-major `m × n`.
pub fn solve_qp(h: &[f64], c: &[f64], a: &[f64], b: &[f64]) -> Result<QpSolution, QpFailure> {
    let n = c.len();
    let m = b.len();
    let hinv = Cholesky::new(h, n).map_err(|_| QpFailure::NotConvex)?.inverse();
    let mut x: Vec<f64> = matvec(&hinv, n, c).iter().map(|v| -v).collect();
    let norms: Vec<f64> = (0..m)
        .map(|i| dot(&a[i * n..(i + 1) * n], &a[i * n..(i + 1) * n]).sqrt())
        .collect();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; m];
    let mut changes = 0;
    let tol = 1e-11;
    let hn_of = |i: usize| matvec(&hinv, n, &a[i * n..(i + 1) * n]);
    let mut hn_cache: Vec<Vec<f64>> = Vec::new();
    let limit = 10 * (m + n) + 100;

    for _ in 0..limit {
        // most violated constraint, scaled by row norm
        let mut p = usize::MAX;
        let mut worst = 0.0;
        for i in 0..m {
            if is_active[i] || norms[i] == 0.0 {
                continue;
            }
            let s = (dot(&a[i * n..(i + 1) * n], &x) - b[i]) / norms[i];
            if s < -tol * (1.0 + b[i].abs() / norms[i]) && s < worst {
                worst = s;
                p = i;
            }
        }
        if p == usize::MAX {
            let mut multipliers = vec![0.0; m];
            for (&i, &v) in active.iter().zip(&u) {
                multipliers[i] = v;
            }
            return Ok(QpSolution {
                x,
                multipliers,
                active,
                changes,
            });
        }
        let np = &a[p * n..(p + 1) * n];
        let w = hn_of(p);
        let mut u_new = 0.0;
        loop {
            let q = active.len();
            let mut r = vec![0.0; q];
            let mut d = w.clone();
            if q > 0 {
                let mut mq = vec![0.0; q * q];
                for (ii, &i) in active.iter().enumerate() {
                    for jj in 0..q {
                        mq[ii * q + jj] = dot(&a[i * n..(i + 1) * n], &hn_cache[jj]);
                    }
                }
                let rhs: Vec<f64> = active.iter().map(|&i| dot(&a[i * n..(i + 1) * n], &w)).collect();
                let chol = match Cholesky::new(&mq, q) {
                    Ok(ch) => ch,
                    Err(_) => {
                        for k in 0..q {
                            mq[k * q + k] += 1e-12 * (1.0 + mq[k * q + k].abs());
                        }
                        Cholesky::new(&mq, q).map_err(|_| QpFailure::NotConvex)?
                    }
                };
                r = chol.solve(&rhs);
                for (jj, hn) in hn_cache.iter().enumerate() {
                    for (dk, hk) in d.iter_mut().zip(hn) {
                        *dk -= r[jj] * hk;
                    }
                }
            }
            let scale = w.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            let dn = dot(&d, np);
            let d_zero = d.iter().fold(0.0f64, |s, v| s.max(v.abs())) <= 1e-12 * scale.max(1e-300);
            let mut t1 = f64::INFINITY;
            let mut k = usize::MAX;
            for (jj, &rj) in r.iter().enumerate() {
                if rj > 0.0 {
                    let t = u[jj] / rj;
                    if t < t1 {
                        t1 = t;
                        k = jj;
                    }
                }
            }
            let sp = dot(np, &x) - b[p];
            let t2 = if d_zero || dn <= 0.0 { f64::INFINITY } else { -sp / dn };
            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpFailure::Infeasible);
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                for (xi, di) in x.iter_mut().zip(&d) {
                    *xi += t * di;
                }
            }
            for (uj, rj) in u.iter_mut().zip(&r) {
                *uj -= t * rj;
            }
            u_new += t;
            changes += 1;
            if t2 <= t1 {
                active.push(p);
                u.push(u_new);
                is_active[p] = true;
                hn_cache.push(w);
                break;
            }
            let drop = active.remove(k);
            u.remove(k);
            hn_cache.remove(k);
            is_active[drop] = false;
        }
    }
    Err(QpFailure::IterationLimit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimum() {
        let s = solve_qp(&[2.0, 0.0, 0.0, 4.0], &[-2.0, -4.0], &[], &[]).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && (s.x[1] - 1.0).abs() < 1e-14);
        assert!(s.active.is_empty());
    }

    #[test]
    fn single_active_bound() {
        // min (x-2)² + (y-1)² s.t. x ≤ 1  →  x = 1, multiplier 2
        let s = solve_qp(&[2.0, 0.0, 0.0, 2.0], &[-4.0, -2.0], &[-1.0, 0.0], &[-1.0]).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        assert!((s.multipliers[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_small_problems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = 3;
            let m = 5;
            let l: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] =
                        (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
                }
            }
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..0.0)).collect();
            let s = solve_qp(&h, &c, &a, &b).unwrap();
            // KKT oracle: stationarity, primal and dual feasibility, complementarity
            for i in 0..n {
                let mut g = c[i] + (0..n).map(|j| h[i * n + j] * s.x[j]).sum::<f64>();
                for r in 0..m {
                    g -= s.multipliers[r] * a[r * n + i];
                }
                assert!(g.abs() < 1e-10);
            }
            for r in 0..m {
                let slack = (0..n).map(|j| a[r * n + j] * s.x[j]).sum::<f64>() - b[r];
                assert!(slack > -1e-10);
                assert!(s.multipliers[r] >= -1e-12);
                assert!((s.multipliers[r] * slack).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        // x ≥ 1 and -x ≥ 0
        let r = solve_qp(&[1.0], &[0.0], &[1.0, -1.0], &[1.0, 0.0]);
        assert_eq!(r, Err(QpFailure::Infeasible));
    }

    #[test]
    fn duplicate_rows_are_tolerated() {
        let s = solve_qp(
            &[2.0, 0.0, 0.0, 2.0],
            &[-4.0, -4.0],
            &[-1.0, 0.0, -1.0, 0.0, 0.0, -1.0],
            &[-1.0, -1.0, -1.5],
        )
        .unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.5).abs() < 1e-12);
    }
}
