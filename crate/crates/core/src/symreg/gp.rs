use super::expr::{BinaryOp, Expr, BINARY, UNARY};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpConfig {
    pub population: usize,
    /// At most 200.
    pub iterations: usize,
    pub cycles_per_iteration: usize,
    pub tournament: usize,
    pub max_size: usize,
    /// Fitness penalty per node.
    pub parsimony: f64,
    pub crossover_rate: f64,
    /// Hill-climbing steps on each of the best few expressions per iteration.
    pub constant_steps: usize,
    /// Stops once a front member reaches this training MSE.
    pub target_mse: f64,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            population: 200,
            iterations: 200,
            cycles_per_iteration: 500,
            tournament: 5,
            max_size: 25,
            parsimony: 1e-4,
            crossover_rate: 0.4,
            constant_steps: 40,
            target_mse: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub expression: String,
    pub complexity: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    #[serde(skip)]
    pub expr: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpResult {
    pub front: Vec<FrontMember>,
    /// Best training MSE in the population after each iteration.
    pub best_mse_history: Vec<f64>,
}

impl GpResult {
    pub fn best_val(&self) -> Option<&FrontMember> {
        self.front.iter().min_by(|a, b| a.val_mse.total_cmp(&b.val_mse))
    }
}

/// Column-major copy of a row matrix.
fn columns(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = x.first().map_or(0, |r| r.len());
    (0..d).map(|j| x.iter().map(|r| r[j]).collect()).collect()
}

fn mse_of(e: &Expr, cols: &[Vec<f64>], y: &[f64]) -> f64 {
    match e.eval_columns(cols, y.len()) {
        Some(p) => p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64,
        None => f64::INFINITY,
    }
}

#[derive(Clone)]
struct Individual {
    expr: Expr,
    mse: f64,
    fitness: f64,
}

struct Ctx<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [f64],
    d: usize,
    cfg: &'a GpConfig,
}

impl Ctx<'_> {
    fn score(&self, expr: Expr) -> Individual {
        let mse = mse_of(&expr, self.cols, self.y);
        let fitness = mse + self.cfg.parsimony * expr.complexity() as f64;
        Individual {
            expr,
            mse,
            fitness: if fitness.is_finite() { fitness } else { f64::INFINITY },
        }
    }

    fn leaf(&self, rng: &mut ChaCha8Rng) -> Expr {
        if rng.random_bool(0.7) {
            Expr::Var(rng.random_range(0..self.d))
        } else {
            Expr::Const((rng.random_range(-2.0..2.0f64) * 100.0).round() / 100.0)
        }
    }

    fn random_tree(&self, rng: &mut ChaCha8Rng, depth: usize) -> Expr {
        if depth <= 1 || rng.random_bool(0.3) {
            return self.leaf(rng);
        }
        if rng.random_bool(0.4) {
            let op = UNARY[rng.random_range(0..UNARY.len())];
            Expr::unary(op, self.random_tree(rng, depth - 1))
        } else {
            let op = BINARY[rng.random_range(0..BINARY.len())];
            Expr::binary(op, self.random_tree(rng, depth - 1), self.random_tree(rng, depth - 1))
        }
    }

    fn mutate(&self, e: &Expr, rng: &mut ChaCha8Rng) -> Expr {
        let mut c = e.clone();
        let k = rng.random_range(0..c.complexity());
        match rng.random_range(0..3) {
            0 => {
                let node = c.node_mut(k);
                *node = match node.clone() {
                    Expr::Const(v) => Expr::Const(v + Normal::new(0.0, 0.5).expect("valid").sample(rng)),
                    Expr::Var(_) => self.leaf(rng),
                    Expr::Unary(_, a) => Expr::Unary(UNARY[rng.random_range(0..UNARY.len())], a),
                    Expr::Binary(_, a, b) => Expr::Binary(BINARY[rng.random_range(0..BINARY.len())], a, b),
                };
            }
            1 => *c.node_mut(k) = self.random_tree(rng, 3),
            _ => {
                let mut consts = c.constants_mut();
                if consts.is_empty() {
                    // wrap the subtree in a scaled copy
                    let sub = c.node(k).clone();
                    *c.node_mut(k) = Expr::binary(BinaryOp::Mul, Expr::Const(1.0), sub);
                } else {
                    let i = rng.random_range(0..consts.len());
                    *consts[i] *= 1.0 + Normal::new(0.0, 0.1).expect("valid").sample(rng);
                }
            }
        }
        c
    }

    fn crossover(&self, a: &Expr, b: &Expr, rng: &mut ChaCha8Rng) -> Expr {
        let mut c = a.clone();
        let ka = rng.random_range(0..c.complexity());
        let kb = rng.random_range(0..b.complexity());
        *c.node_mut(ka) = b.node(kb).clone();
        c
    }

    /// Multiplicative and additive perturbations with a shrinking step.
    fn tune_constants(&self, ind: &Individual, rng: &mut ChaCha8Rng) -> Individual {
        let mut best = ind.clone();
        if best.expr.constants_mut().is_empty() {
            return best;
        }
        let mut step = 0.1;
        for _ in 0..self.cfg.constant_steps {
            let mut cand = best.expr.clone();
            {
                let mut cs = cand.constants_mut();
                let i = rng.random_range(0..cs.len());
                let n: f64 = Normal::new(0.0, 1.0).expect("valid").sample(rng);
                *cs[i] += step * n * (1.0 + cs[i].abs());
            }
            let s = self.score(cand);
            if s.fitness < best.fitness {
                best = s;
            } else {
                step *= 0.7;
                if step < 1e-9 {
                    step = 0.1;
                }
            }
        }
        best
    }
}

fn tournament<'a>(pop: &'a [Individual], k: usize, rng: &mut ChaCha8Rng) -> &'a Individual {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..k {
        let c = &pop[rng.random_range(0..pop.len())];
        if c.fitness < best.fitness {
            best = c;
        }
    }
    best
}

/// Tournament GP returning the (complexity, validation MSE) Pareto front.
pub fn evolve(
    x_train: &[Vec<f64>],
    y_train: &[f64],
    x_val: &[Vec<f64>],
    y_val: &[f64],
    names: &[String],
    cfg: &GpConfig,
) -> Result<GpResult> {
    if x_train.len() < 100 || x_train.len() != y_train.len() || x_val.len() != y_val.len() || x_val.is_empty() {
        return Err(Error::Size(format!(
            "{} training rows, need at least 100 and matching targets",
            x_train.len()
        )));
    }
    let d = x_train[0].len();
    if d == 0 {
        return Err(Error::Size("no features".into()));
    }
    if cfg.iterations > 200 {
        return Err(Error::Domain(format!(
            "{} iterations exceeds the budget of 200",
            cfg.iterations
        )));
    }
    let cols = columns(x_train);
    let vcols = columns(x_val);
    let ctx = Ctx {
        cols: &cols,
        y: y_train,
        d,
        cfg,
    };
    let member = |e: &Expr, mse: f64| FrontMember {
        expression: e.to_infix(names),
        complexity: e.complexity(),
        train_mse: mse,
        val_mse: mse_of(e, &vcols, y_val),
        expr: Some(e.clone()),
    };
    let y0 = y_train[0];
    if y_train.iter().all(|&v| v == y0) {
        let e = Expr::Const(y0);
        return Ok(GpResult {
            front: vec![member(&e, 0.0)],
            best_mse_history: vec![],
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Individual> = (0..cfg.population.max(2))
        .map(|i| {
            let e = ctx.random_tree(&mut rng, 2 + i % 3);
            ctx.score(e)
        })
        .collect();
    let mut hall: BTreeMap<usize, (f64, Expr)> = BTreeMap::new();
    let record = |hall: &mut BTreeMap<usize, (f64, Expr)>, ind: &Individual| {
        if !ind.mse.is_finite() {
            return;
        }
        let e = ind.expr.simplify();
        let c = e.complexity();
        if hall.get(&c).is_none_or(|(m, _)| ind.mse < *m) {
            hall.insert(c, (ind.mse, e));
        }
    };
    pop.iter().for_each(|ind| record(&mut hall, ind));
    let mut history = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        let seeds: Vec<u64> = (0..cfg.cycles_per_iteration).map(|_| rng.random()).collect();
        let snapshot = &pop;
        let children: Vec<Individual> = seeds
            .par_iter()
            .map(|&s| {
                let mut r = ChaCha8Rng::seed_from_u64(s);
                let a = tournament(snapshot, cfg.tournament, &mut r);
                let child = if r.random_bool(cfg.crossover_rate) {
                    let b = tournament(snapshot, cfg.tournament, &mut r);
                    ctx.crossover(&a.expr, &b.expr, &mut r)
                } else {
                    ctx.mutate(&a.expr, &mut r)
                };
                if child.complexity() > cfg.max_size {
                    a.clone()
                } else {
                    ctx.score(child)
                }
            })
            .collect();
        for child in children {
            record(&mut hall, &child);
            let best_i = (0..pop.len())
                .min_by(|&a, &b| pop[a].mse.total_cmp(&pop[b].mse))
                .expect("population");
            // replace the worst of a random tournament, keeping the best-MSE individual
            let mut worst = usize::MAX;
            for _ in 0..cfg.tournament {
                let i = rng.random_range(0..pop.len());
                if i != best_i && (worst == usize::MAX || pop[i].fitness > pop[worst].fitness) {
                    worst = i;
                }
            }
            if worst != usize::MAX && child.fitness < pop[worst].fitness {
                pop[worst] = child;
            }
        }
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness));
        let tune_seeds: Vec<u64> = (0..5.min(pop.len())).map(|_| rng.random()).collect();
        let tuned: Vec<(usize, Individual)> = order
            .iter()
            .zip(&tune_seeds)
            .map(|(&i, &s)| (i, ctx.tune_constants(&pop[i], &mut ChaCha8Rng::seed_from_u64(s))))
            .collect();
        for (i, t) in tuned {
            record(&mut hall, &t);
            if t.mse <= pop[i].mse {
                pop[i] = t;
            }
        }
        let best = pop.iter().map(|p| p.mse).fold(f64::INFINITY, f64::min);
        history.push(best);
        if best <= cfg.target_mse {
            break;
        }
    }

    let candidates: Vec<FrontMember> = hall.values().map(|(m, e)| member(e, *m)).collect();
    let front = candidates
        .iter()
        .filter(|a| {
            !candidates.iter().any(|b| {
                b.complexity <= a.complexity
                    && b.val_mse <= a.val_mse
                    && (b.complexity < a.complexity || b.val_mse < a.val_mse)
            })
        })
        .cloned()
        .collect();
    Ok(GpResult {
        front,
        best_mse_history: history,
    })
}
