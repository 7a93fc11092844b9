use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splinempc::approx_nmpc::{batch_objective, evaluate, export_warm_start, resafe_for, ApproxNmpc, Mlp, TrainConfig};
use splinempc::dataset::{split, Dataset, NormalizationSpec};
use splinempc::envelope::{check_violations, equidistant_hull_maps};
use splinempc::legendre::TrajectoryBundle;
use splinempc::ocp::{
    generate_dataset, problem_for_record, randomize_scenarios, solve, ClosedLoopOptions, OcpDefinition, OcpModel,
    ScenarioRanges,
};
use std::sync::OnceLock;

fn data() -> &'static Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| {
        let ranges = ScenarioRanges {
            duration_s: 4.0,
            ..Default::default()
        };
        let sc = randomize_scenarios(6, 21, &ranges);
        generate_dataset(&sc, &OcpDefinition::default(), &ClosedLoopOptions::default())
            .unwrap()
            .0
    })
}

fn parts() -> (Dataset, Dataset, Dataset) {
    let d = data();
    let s = split(d, 0).unwrap();
    (d.subset(&s.train), d.subset(&s.validation), d.subset(&s.test))
}

fn small(gamma: f64) -> TrainConfig {
    TrainConfig {
        gamma,
        epochs: 4,
        hidden: vec![24, 24],
        batch_size: 32,
        ..Default::default()
    }
}

fn fit(gamma: f64) -> ApproxNmpc {
    let (tr, va, _) = parts();
    let norm = NormalizationSpec::fit(&tr).unwrap();
    ApproxNmpc::fit(&tr, &va, &norm, &OcpDefinition::default(), 4, &small(gamma)).unwrap()
}

fn matrices(d: &Dataset, spec: &NormalizationSpec) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
    let nf = d.schema.feature_names.len();
    let np = d.schema.n_predict();
    let mut x = nalgebra::DMatrix::zeros(nf, d.len());
    let mut t = nalgebra::DMatrix::zeros(np, d.len());
    for (c, r) in d.records.iter().enumerate() {
        x.set_column(c, &nalgebra::DVector::from_vec(spec.normalize_features(&r.features)));
        t.set_column(c, &nalgebra::DVector::from_vec(spec.normalize_targets(&r.target)));
    }
    (x, t)
}

#[test]
fn zero_gamma_is_plain_mse() {
    let (tr, _, _) = parts();
    let spec = NormalizationSpec::fit(&tr).unwrap();
    let resafe = resafe_for(&OcpDefinition::default(), &tr.schema, 4, 1e-3).unwrap();
    let (x, t) = matrices(&tr, &spec);
    let net = Mlp::new(&[13, 8, tr.schema.n_predict()], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let (p, _) = batch_objective(&net, &x, &t, &spec, &resafe, 0.0, false).unwrap();
    assert_eq!(p.resafe, None);
    assert_eq!(p.total, p.mse);
    let m = fit(0.0);
    assert!(m
        .curve
        .iter()
        .all(|e| e.train.resafe.is_none() && e.validation.resafe.is_none()));
}

#[test]
fn total_is_mse_plus_weighted_hinge() {
    let (tr, _, _) = parts();
    let spec = NormalizationSpec::fit(&tr).unwrap();
    let resafe = resafe_for(&OcpDefinition::default(), &tr.schema, 4, 1e-3).unwrap();
    let (x, t) = matrices(&tr, &spec);
    let net = Mlp::new(&[13, 8, tr.schema.n_predict()], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let gamma = 0.7;
    let (p, _) = batch_objective(&net, &x, &t, &spec, &resafe, gamma, false).unwrap();
    let h = p.resafe.unwrap();
    assert!(h > 0.0);
    assert!((p.total - (p.mse + gamma * h)).abs() <= 1e-12 * p.total.abs().max(1.0));
}

#[test]
fn training_is_deterministic() {
    assert_eq!(fit(1.0).network, fit(1.0).network);
}

#[test]
fn looser_tolerance_never_adds_violations() {
    let m = fit(0.0);
    let (_, _, te) = parts();
    let counts: Vec<usize> = [0.0, 1e-4, 1e-3, 1e-2, 1e-1]
        .iter()
        .map(|&e| evaluate(&m, &te, e).unwrap().violations.count)
        .collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
}

#[test]
fn solved_targets_have_no_violations() {
    let def = OcpDefinition::default();
    let d = data();
    let constraints = def.constraints().unwrap();
    let maps = equidistant_hull_maps(d.schema.layout.order, 4).unwrap();
    for r in d.records.iter().filter(|r| r.converged) {
        let b = TrajectoryBundle::from_vector(&d.schema.layout, &r.target).unwrap();
        let rep = check_violations(&b, &constraints, &maps, 1e-6, r.instance_id).unwrap();
        assert!(!rep.violates(), "instance {}", r.instance_id);
        assert!(!r.violation);
    }
}

#[test]
fn saved_model_reproduces_its_test_error() {
    let m = fit(1.0);
    let (_, _, te) = parts();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let back = ApproxNmpc::load(&path).unwrap();
    let (a, b) = (evaluate(&m, &te, 1e-3).unwrap(), evaluate(&back, &te, 1e-3).unwrap());
    assert!((a.mse - b.mse).abs() <= 1e-12);
    assert_eq!(a.violations, b.violations);
}

#[test]
fn predicted_bundle_has_the_layout_shape() {
    let m = fit(1.0);
    let r = &data().records[0];
    let b = m.predict_trajectory(&r.features).unwrap();
    let layout = &data().schema.layout;
    assert!(b.splines().map(|s| s.signal()).eq(layout.signal_names()));
    assert!(b
        .splines()
        .all(|s| s.sections() == layout.sections && s.order() == layout.order));
    assert!(m.predict_coefficients(&r.features[..5]).is_err());
}

#[test]
fn exact_solution_warm_start_needs_at_most_two_iterations() {
    let def = OcpDefinition::default();
    let opts = ClosedLoopOptions::default();
    for r in data().records.iter().step_by(37).take(5) {
        let nlp = problem_for_record(&def, r, &opts).unwrap();
        let b = TrajectoryBundle::from_vector(nlp.layout(), &r.target).unwrap();
        let guess = export_warm_start(&b, &nlp).unwrap();
        let (_, s) = solve(&nlp, Some(&guess), &opts.solver).unwrap();
        assert!(s.converged && s.iterations <= 2, "{s:?}");
        let zero = vec![0.0; nlp.n_vars()];
        let (_, z) = solve(&nlp, Some(&zero), &opts.solver).unwrap();
        assert!(z.converged, "{z:?}");
    }
}

#[test]
fn mismatched_bundle_is_rejected() {
    let def = OcpDefinition::default();
    let opts = ClosedLoopOptions::default();
    let r = &data().records[0];
    let nlp = problem_for_record(&def, r, &opts).unwrap();
    let other = splinempc::legendre::CoefficientLayout::equidistant(
        2,
        3,
        def.horizon_s,
        &splinempc::ocp::STATE_NAMES,
        &splinempc::ocp::CONTROL_NAMES,
    );
    let b = TrajectoryBundle::from_vector(&other, &vec![0.0; other.len()]).unwrap();
    assert!(export_warm_start(&b, &nlp).is_err());
}
