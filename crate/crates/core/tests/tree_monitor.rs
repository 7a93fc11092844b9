use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splinempc::tree_monitor::{
    quantile, DecisionTree, ForestParams, MaxFeatures, Node, RegressionForest, TreeParams, WorstCaseMonitor,
};

fn names(k: usize, p: &str) -> Vec<String> {
    (0..k).map(|i| format!("{p}{i}")).collect()
}

fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // column 3 is constant, so no tree can split on it
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..3.0),
                0.5,
            ]
        })
        .collect();
    let y = x
        .iter()
        .map(|r| vec![r[0].exp() + r[2], 10.0 * (r[1] * r[2]).sin()])
        .collect();
    (x, y)
}

fn interpolating() -> ForestParams {
    ForestParams {
        n_trees: 1,
        bootstrap: false,
        tree: TreeParams {
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::All,
        },
        seed: 0,
    }
}

#[test]
fn identical_stumps_average_to_their_leaf() {
    let leaf = |v: Vec<f64>| Node {
        feature: None,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: v,
        samples: 1,
    };
    let stump = DecisionTree {
        nodes: vec![
            Node {
                feature: Some(0),
                threshold: 0.0,
                left: 1,
                right: 2,
                value: vec![1.0, 2.0],
                samples: 2,
            },
            leaf(vec![1.0, 2.0]),
            leaf(vec![1.0, 2.0]),
        ],
        n_features: 1,
    };
    let f = RegressionForest {
        trees: vec![stump; 4],
        seeds: vec![0; 4],
        feature_names: names(1, "x"),
        output_names: names(2, "y"),
        params: ForestParams::default(),
    };
    assert_eq!(f.predict(&[-3.0]), vec![1.0, 2.0]);
    assert_eq!(f.predict(&[3.0]), vec![1.0, 2.0]);
}

#[test]
fn unused_columns_do_not_move_predictions() {
    let (x, y) = toy(300, 1);
    let f = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), ForestParams::default()).unwrap();
    assert!(f.trees.iter().all(|t| !t.split_features().contains(&3)));
    for r in x.iter().take(50) {
        let mut moved = r.clone();
        moved[3] = -1e6;
        assert_eq!(f.predict(r), f.predict(&moved));
    }
}

#[test]
fn same_seed_same_forest() {
    let (x, y) = toy(200, 2);
    let p = ForestParams {
        seed: 9,
        ..Default::default()
    };
    let a = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), p).unwrap();
    let b = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn prediction_is_the_mean_of_trees() {
    let (x, y) = toy(200, 3);
    let f = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), ForestParams::default()).unwrap();
    for r in x.iter().take(20) {
        let p = f.predict(r);
        for o in 0..2 {
            let m = f.trees.iter().map(|t| t.predict(r)[o]).sum::<f64>() / f.trees.len() as f64;
            assert!((p[o] - m).abs() <= 1e-12 * (1.0 + m.abs()));
        }
    }
}

#[test]
fn leaf_counts_sum_to_the_sample_count() {
    let (x, y) = toy(150, 4);
    let f = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), ForestParams::default()).unwrap();
    for t in &f.trees {
        assert_eq!(t.leaf_sample_total(), 150);
        assert!(t.nodes.iter().all(|n| n.threshold.is_finite()));
    }
}

#[test]
fn quantile_one_flags_nothing_on_training_data() {
    let (x, y) = toy(200, 5);
    let f = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), ForestParams::default()).unwrap();
    let train: Vec<f64> = y.iter().map(|r| r[1]).collect();
    let m = WorstCaseMonitor::fit(&f, "y1", &train, 1.0).unwrap();
    assert!(m.flag(&f, &x).is_empty());
}

#[test]
fn replayed_worst_record_is_flagged() {
    let (x, mut y) = toy(200, 6);
    y[17][1] = 1e3;
    let f = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), interpolating()).unwrap();
    let train: Vec<f64> = y.iter().map(|r| r[1]).collect();
    let m = WorstCaseMonitor::fit(&f, "y1", &train, 0.99).unwrap();
    let flags = m.flag(&f, &[x[17].clone()]);
    assert_eq!(flags.len(), 1);
    assert!(flags[0].predicted > m.threshold);
}

#[test]
fn median_stream_is_not_flagged() {
    let (x, y) = toy(400, 7);
    let f = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), ForestParams::default()).unwrap();
    let train: Vec<f64> = y.iter().map(|r| r[0]).collect();
    let m = WorstCaseMonitor::fit(&f, "y0", &train, 0.99).unwrap();
    let mid = vec![0.0, 0.0, 1.5, 0.5];
    assert!(m.flag(&f, &vec![mid; 10]).is_empty());
    assert!((quantile(&[3.0, 1.0, 2.0], 0.5) - 2.0).abs() < 1e-15);
}

#[test]
fn too_few_rows_is_a_size_error() {
    let (x, y) = toy(9, 8);
    assert!(RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), ForestParams::default()).is_err());
    assert!(RegressionForest::fit(&[], &[], names(4, "x"), names(2, "y"), ForestParams::default()).is_err());
}

#[test]
fn named_prediction_rejects_unknown_features() {
    let (x, y) = toy(60, 9);
    let f = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), ForestParams::default()).unwrap();
    assert!(f.predict_named(&names(4, "z"), &x[0]).is_err());
    let mut rev = names(4, "x");
    rev.reverse();
    assert!(f.predict_named(&rev, &x[0]).is_err());
    assert_eq!(f.predict_named(&names(4, "x"), &x[0]).unwrap(), f.predict(&x[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn predictions_stay_within_training_range(seed in any::<u64>(), probe in prop::collection::vec(-5.0f64..5.0, 4)) {
        let (x, y) = toy(80, seed);
        let p = ForestParams { seed, n_trees: 5, ..Default::default() };
        let f = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), p).unwrap();
        let pred = f.predict(&probe);
        for o in 0..2 {
            let lo = y.iter().map(|r| r[o]).fold(f64::INFINITY, f64::min);
            let hi = y.iter().map(|r| r[o]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo - 1e-9 <= pred[o] && pred[o] <= hi + 1e-9);
        }
    }

    #[test]
    fn interpolating_tree_reproduces_training_targets(seed in any::<u64>()) {
        let (x, y) = toy(60, seed);
        let f = RegressionForest::fit(&x, &y, names(4, "x"), names(2, "y"), interpolating()).unwrap();
        for (r, t) in x.iter().zip(&y) {
            prop_assert_eq!(&f.predict(r), t);
        }
    }
}
