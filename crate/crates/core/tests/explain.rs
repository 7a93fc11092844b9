use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splinempc::explain::{brute_force_shap, permutation_importance, shap_summary, spearman, TreeExplainer};
use splinempc::tree_monitor::{DecisionTree, ForestParams, MaxFeatures, Node, RegressionForest, TreeParams};

fn names(k: usize, p: &str) -> Vec<String> {
    (0..k).map(|i| format!("{p}{i}")).collect()
}

fn leaf(v: f64) -> Node {
    Node {
        feature: None,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: vec![v],
        samples: 1,
    }
}

fn split(f: usize, left: usize, right: usize) -> Node {
    Node {
        feature: Some(f),
        threshold: 0.0,
        left,
        right,
        value: vec![0.0],
        samples: 2,
    }
}

fn forest_of(trees: Vec<DecisionTree>, d: usize) -> RegressionForest {
    let n = trees.len();
    RegressionForest {
        trees,
        seeds: vec![0; n],
        feature_names: names(d, "x"),
        output_names: vec!["y".into()],
        params: ForestParams::default(),
    }
}

#[test]
fn stump_puts_everything_on_its_feature() {
    let t = DecisionTree {
        nodes: vec![split(1, 1, 2), leaf(-1.0), leaf(3.0)],
        n_features: 3,
    };
    let f = forest_of(vec![t], 3);
    let bg = vec![vec![0.0, -1.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, -2.0, 5.0]];
    let ex = TreeExplainer::new(&f, bg).unwrap();
    let phi = ex.shap_values(&[9.0, 1.0, -4.0]).unwrap();
    let base = (-1.0 + 3.0 - 1.0) / 3.0;
    assert!((phi[0][1] - (3.0 - base)).abs() < 1e-12);
    assert_eq!(phi[0][0], 0.0);
    assert_eq!(phi[0][2], 0.0);
}

#[test]
fn constant_model_has_zero_attributions() {
    let t = DecisionTree {
        nodes: vec![leaf(4.0)],
        n_features: 2,
    };
    let f = forest_of(vec![t], 2);
    let ex = TreeExplainer::new(&f, vec![vec![1.0, 2.0], vec![-1.0, 0.0]]).unwrap();
    let a = &ex.explain(0, &[0.3, 0.4]).unwrap()[0];
    assert!(a.values.iter().all(|&v| v == 0.0));
    assert_eq!(a.base_value, 4.0);
}

#[test]
fn symmetric_features_share_credit() {
    // y = [x0 > 0] + [x1 > 0]
    let t = DecisionTree {
        nodes: vec![
            split(0, 1, 2),
            split(1, 3, 4),
            split(1, 5, 6),
            leaf(0.0),
            leaf(1.0),
            leaf(1.0),
            leaf(2.0),
        ],
        n_features: 2,
    };
    let f = forest_of(vec![t], 2);
    let ex = TreeExplainer::new(&f, vec![vec![-1.0, -1.0]]).unwrap();
    let phi = ex.shap_values(&[1.0, 1.0]).unwrap();
    assert!((phi[0][0] - 1.0).abs() < 1e-12);
    assert!((phi[0][0] - phi[0][1]).abs() < 1e-12);
}

fn random_forest(seed: u64, d: usize, depth: usize) -> (RegressionForest, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..120)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|r| vec![r[0] * r[d - 1] + (3.0 * r[1]).sin(), r.iter().sum::<f64>().abs()])
        .collect();
    let p = ForestParams {
        n_trees: 3,
        tree: TreeParams {
            max_depth: Some(depth),
            min_leaf: 2,
            max_features: MaxFeatures::All,
        },
        bootstrap: true,
        seed,
    };
    (
        RegressionForest::fit(&x, &y, names(d, "x"), names(2, "y"), p).unwrap(),
        x,
    )
}

#[test]
fn unused_feature_gets_zero_and_ranks_last() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<Vec<f64>> = (0..300)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0])
        .collect();
    let y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] + r[1] * r[1]]).collect();
    let f = RegressionForest::fit(&x, &y, names(3, "x"), vec!["y".into()], ForestParams::default()).unwrap();
    let ex = TreeExplainer::new(&f, x[..50].to_vec()).unwrap();
    let rows: Vec<(u64, Vec<f64>)> = x[200..260]
        .iter()
        .enumerate()
        .map(|(i, r)| (i as u64, r.clone()))
        .collect();
    let s = shap_summary(&ex, "forest", &rows, "y").unwrap();
    let last = s.rows.last().unwrap();
    assert_eq!(last.feature, "x2");
    assert_eq!(last.mean_abs_shap, 0.0);
    assert_eq!(s.rows.iter().map(|r| r.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
}

#[test]
fn permutation_importance_tracks_the_signal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<Vec<f64>> = (0..400)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0])
        .collect();
    let y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[1]]).collect();
    let f = RegressionForest::fit(&x, &y, names(3, "x"), vec!["y".into()], ForestParams::default()).unwrap();
    let truth: Vec<f64> = y.iter().map(|r| r[0]).collect();
    let imp = permutation_importance(&f, &x, &truth, 0, 5, 0).unwrap();
    assert_eq!(imp.mean[2], 0.0);
    assert!(imp.mean[1] > 10.0 * imp.mean[0].abs());
    assert!(permutation_importance(&f, &x[..50], &truth[..50], 0, 5, 0).is_err());
    // mean |phi| and permutation importance agree on the ordering
    let ex = TreeExplainer::new(&f, x[..100].to_vec()).unwrap();
    let rows: Vec<(u64, Vec<f64>)> = x[300..]
        .iter()
        .enumerate()
        .map(|(i, r)| (i as u64, r.clone()))
        .collect();
    let s = shap_summary(&ex, "forest", &rows, "y").unwrap();
    let by: Vec<f64> = (0..3)
        .map(|j| {
            s.rows
                .iter()
                .find(|r| r.feature == format!("x{j}"))
                .unwrap()
                .mean_abs_shap
        })
        .collect();
    assert!(spearman(&by, &imp.mean) > 0.9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matches_exhaustive_coalitions(seed in any::<u64>(), d in 2usize..=4, depth in 1usize..6) {
        let (f, x) = random_forest(seed, d, depth);
        let bg = x[..15].to_vec();
        let ex = TreeExplainer::new(&f, bg.clone()).unwrap();
        let players: Vec<usize> = (0..d).collect();
        for inst in &x[60..64] {
            let fast = ex.shap_values(inst).unwrap();
            let slow = brute_force_shap(&|z| f.predict(z), inst, &bg, &players);
            for (a, b) in fast.iter().flatten().zip(slow.iter().flatten()) {
                prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn attributions_add_up(seed in any::<u64>(), d in 2usize..9) {
        let (f, x) = random_forest(seed, d, 8);
        let ex = TreeExplainer::new(&f, x[..30].to_vec()).unwrap();
        for inst in &x[90..95] {
            for a in ex.explain(1, inst).unwrap() {
                prop_assert!(a.efficiency_gap().abs() <= 1e-9);
            }
        }
    }
}
