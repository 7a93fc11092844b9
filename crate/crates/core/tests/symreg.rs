use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splinempc::symreg::{evolve, invert_threshold, BinaryOp, Expr, GpConfig, UnaryOp, BINARY, UNARY};

fn sample(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

fn quick(seed: u64) -> GpConfig {
    GpConfig {
        population: 60,
        iterations: 20,
        cycles_per_iteration: 80,
        seed,
        ..Default::default()
    }
}

#[test]
fn identity_target_is_found_exactly() {
    let x = sample(300, 3, 1);
    let y: Vec<f64> = x.iter().map(|r| r[1]).collect();
    let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let cfg = GpConfig {
        target_mse: 1e-12,
        ..quick(2)
    };
    let r = evolve(&x[..200], &y[..200], &x[200..], &y[200..], &names, &cfg).unwrap();
    let b = r.best_val().unwrap();
    assert!(b.val_mse <= 1e-12, "{} {}", b.expression, b.val_mse);
}

#[test]
fn same_seed_same_front() {
    let x = sample(200, 2, 3);
    let y: Vec<f64> = x.iter().map(|r| r[0] * r[1] + 1.0).collect();
    let names: Vec<String> = vec!["p".into(), "q".into()];
    let a = evolve(&x[..150], &y[..150], &x[150..], &y[150..], &names, &quick(5)).unwrap();
    let b = evolve(&x[..150], &y[..150], &x[150..], &y[150..], &names, &quick(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn front_is_non_dominated_and_history_monotone() {
    let x = sample(300, 2, 4);
    let y: Vec<f64> = x.iter().map(|r| (r[0]).cos() * 2.0 - r[1] * r[1]).collect();
    let names: Vec<String> = vec!["p".into(), "q".into()];
    let r = evolve(&x[..200], &y[..200], &x[200..], &y[200..], &names, &quick(6)).unwrap();
    for a in &r.front {
        for b in &r.front {
            let dominates = b.complexity <= a.complexity
                && b.val_mse <= a.val_mse
                && (b.complexity < a.complexity || b.val_mse < a.val_mse);
            assert!(!dominates, "{} dominates {}", b.expression, a.expression);
        }
    }
    assert!(r.best_mse_history.windows(2).all(|w| w[1] <= w[0]));
    for m in &r.front {
        let back = Expr::parse(&m.expression, &names).unwrap();
        assert_eq!(back.complexity(), m.complexity);
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let x = sample(50, 2, 5);
    let y = vec![0.0; 50];
    let names: Vec<String> = vec!["p".into(), "q".into()];
    assert!(evolve(&x, &y, &x, &y, &names, &quick(0)).is_err());
    let x = sample(150, 2, 5);
    let y = vec![1.0; 150];
    let over = GpConfig {
        iterations: 201,
        ..quick(0)
    };
    assert!(evolve(&x, &y, &x, &y, &names, &over).is_err());
}

#[test]
fn disc_threshold_matches_the_analytic_region() {
    let e = Expr::parse("square(x0) + square(x1)", &[]).unwrap();
    let r = invert_threshold(&e, 1.0, &[(-2.0, 2.0), (-2.0, 2.0)], 200).unwrap();
    let agree = (0..r.feasible.len())
        .filter(|&c| {
            let p = r.cell_center(c);
            (p[0] * p[0] + p[1] * p[1] <= 1.0) == r.feasible[c]
        })
        .count();
    assert!(agree as f64 >= 0.999 * r.feasible.len() as f64);
    assert!((r.fraction() - std::f64::consts::PI / 16.0).abs() < 0.01);
}

#[test]
fn exponential_towers_saturate() {
    let e = Expr::parse("exp(exp(exp(x0)))", &[]).unwrap();
    let v = e.eval(&[10.0]).unwrap();
    assert!(v.saturated);
    assert!(v.value.is_finite());
    assert!(!e.eval(&[-10.0]).unwrap().saturated);
}

fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.6) {
            Expr::var(rng.random_range(0..2))
        } else {
            Expr::Const([0.0, 1.0, -1.0, 2.5][rng.random_range(0..4)])
        };
    }
    if rng.random_bool(0.4) {
        let op: UnaryOp = UNARY[rng.random_range(0..UNARY.len())];
        Expr::unary(op, random_expr(rng, depth - 1))
    } else {
        let op: BinaryOp = BINARY[rng.random_range(0..BINARY.len())];
        Expr::binary(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))
    }
}

proptest! {
    #[test]
    fn simplify_preserves_values(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expr(&mut rng, 4);
        let s = e.simplify();
        prop_assert!(s.complexity() <= e.complexity());
        for p in sample(100, 2, seed) {
            let (a, b) = (e.eval(&p).unwrap(), s.eval(&p).unwrap());
            if a.saturated || b.saturated {
                continue;
            }
            prop_assert!((a.value - b.value).abs() <= 1e-9 * (1.0 + a.value.abs()), "{:?} vs {:?}", e, s);
        }
    }

    #[test]
    fn infix_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expr(&mut rng, 4);
        let names: Vec<String> = vec!["u".into(), "v".into()];
        let back = Expr::parse(&e.to_infix(&names), &names).unwrap();
        for p in sample(10, 2, seed) {
            let (a, b) = (e.eval(&p).unwrap(), back.eval(&p).unwrap());
            prop_assert!(a.value == b.value || (a.value - b.value).abs() <= 1e-12 * (1.0 + a.value.abs()));
        }
    }
}
