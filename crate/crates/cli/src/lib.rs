//! Pipeline orchestration behind the `splinempc` binary: dataset generation,
//! approximate-NMPC training, KPI monitors, explanations and formula search.
//!
//! Every command writes the resolved configuration next to its outputs.

pub mod config;

pub use config::RunConfig;

use serde::{Deserialize, Serialize};
use splinempc::approx_nmpc::{evaluate, ApproxNmpc, Comparison, EvalReport};
use splinempc::dataset::{read_dataset, split, write_dataset, Dataset, DatasetSplit, NormalizationSpec};
use splinempc::explain::{
    background_sample, distill, permutation_importance, shap_summary, spearman, Predictor, ShapSummary, TreeExplainer,
};
use splinempc::legendre::DimensionalityReport;
use splinempc::ocp::{generate_dataset, randomize_scenarios};
use splinempc::symreg::{evolve, write_front, GpResult};
use splinempc::tree_monitor::{
    mean_predictor_mse, write_monitor_report, ForestParams, RegressionForest, WorstCaseMonitor,
};
use splinempc::Error;
use std::fmt;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Overrides the root against which relative output paths resolve.
pub const OUT_ROOT_ENV: &str = "SPLINEMPC_OUT_ROOT";

/// File name of the resolved configuration in every artifact directory.
pub const RESOLVED_CONFIG: &str = "config.toml";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(m: impl fmt::Display) -> Self {
        Self {
            code: 2,
            message: m.to_string(),
        }
    }
    pub fn data(m: impl fmt::Display) -> Self {
        Self {
            code: 3,
            message: m.to_string(),
        }
    }
    pub fn training(m: impl fmt::Display) -> Self {
        Self {
            code: 4,
            message: m.to_string(),
        }
    }
    pub fn internal(m: impl fmt::Display) -> Self {
        Self {
            code: 5,
            message: m.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(e: std::io::Error) -> CliError {
    CliError::internal(e)
}

/// Resolves an output path: relative paths go under `$SPLINEMPC_OUT_ROOT` when set.
pub fn output_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) if p.is_relative() => Path::new(&root).join(p),
        _ => p.to_path_buf(),
    }
}

pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p).map_err(CliError::config)?,
        None => RunConfig::default(),
    };
    cfg.ocp.validate().map_err(CliError::config)?;
    cfg.approx.train.validate().map_err(CliError::config)?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path, cfg: &RunConfig) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err)?;
    std::fs::write(dir.join(RESOLVED_CONFIG), cfg.to_toml()).map_err(io_err)
}

fn parent_dir(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn create(path: &Path) -> CliResult<BufWriter<std::fs::File>> {
    Ok(BufWriter::new(std::fs::File::create(path).map_err(io_err)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(CliError::internal)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    require(path)?;
    let text = std::fs::read_to_string(path).map_err(CliError::data)?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn require(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!("input file {} not found", path.display())))
    }
}

pub fn load_data(path: &Path) -> CliResult<Dataset> {
    require(path)?;
    read_dataset(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Train/validation/test subsets under the configured split seed.
pub fn split_data(data: &Dataset, cfg: &RunConfig) -> CliResult<(Dataset, Dataset, Dataset)> {
    let DatasetSplit {
        train,
        validation,
        test,
    } = split(data, cfg.split_seed).map_err(CliError::data)?;
    Ok((data.subset(&train), data.subset(&validation), data.subset(&test)))
}

/// Accepts `K2` as the effort KPI in milliseconds.
pub fn canonical_output(name: &str) -> &str {
    if name == "K2" {
        "K2_ms"
    } else {
        name
    }
}

#[derive(Debug, Clone, Default)]
pub struct GenDataArgs {
    pub scenarios: Option<usize>,
    pub duration_s: Option<f64>,
    pub step_s: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSummary {
    pub records: usize,
    pub convergence_rate: f64,
    pub failures: usize,
}

/// Writes `dataset.csv`, its schema sidecar and `failures.jsonl` into `out`.
pub fn gen_data(cfg: &mut RunConfig, args: &GenDataArgs, out: &Path) -> CliResult<GenSummary> {
    if let Some(n) = args.scenarios {
        cfg.scenarios.count = n;
    }
    if let Some(d) = args.duration_s {
        cfg.scenarios.ranges.duration_s = d;
    }
    if let Some(t) = args.step_s {
        cfg.scenarios.ranges.step_s = t;
    }
    if let Some(s) = args.seed {
        cfg.scenarios.seed = s;
    }
    if cfg.scenarios.count == 0 {
        return Err(CliError::config("scenarios.count must be positive"));
    }
    let scenarios = randomize_scenarios(cfg.scenarios.count, cfg.scenarios.seed, &cfg.scenarios.ranges);
    for s in &scenarios {
        s.validate(cfg.ocp.horizon_s).map_err(CliError::config)?;
    }
    let (data, failures) = generate_dataset(&scenarios, &cfg.ocp, &cfg.closed_loop()).map_err(CliError::data)?;
    ensure_dir(out, cfg)?;
    write_dataset(&data, &out.join("dataset.csv")).map_err(CliError::internal)?;
    let mut w = create(&out.join("failures.jsonl"))?;
    for (scenario, step, message) in &failures {
        let line = serde_json::json!({"scenario": scenario, "step": step, "message": message});
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    let converged = data.records.iter().filter(|r| r.converged).count();
    let summary = GenSummary {
        records: data.len(),
        convergence_rate: converged as f64 / data.len().max(1) as f64,
        failures: failures.len(),
    };
    println!(
        "generated {} records from {} scenarios, convergence rate {:.4}, {} solver failures",
        summary.records, cfg.scenarios.count, summary.convergence_rate, summary.failures
    );
    Ok(summary)
}

#[derive(Debug, Clone, Default)]
pub struct TrainApproxArgs {
    pub gamma: Option<f64>,
    pub epochs: Option<usize>,
}

/// Eval report path stored beside a model file.
pub fn eval_path(model: &Path) -> PathBuf {
    model.with_extension("eval.json")
}

/// Trains on the train split, selects on validation and evaluates on test.
pub fn train_approx(
    cfg: &mut RunConfig,
    data_path: &Path,
    args: &TrainApproxArgs,
    out: &Path,
) -> CliResult<EvalReport> {
    if let Some(g) = args.gamma {
        cfg.approx.train.gamma = g;
    }
    if let Some(e) = args.epochs {
        cfg.approx.train.epochs = e;
    }
    cfg.approx.train.validate().map_err(CliError::config)?;
    let data = load_data(data_path)?;
    let (train, val, test) = split_data(&data, cfg)?;
    let norm = NormalizationSpec::fit(&train).map_err(CliError::data)?;
    let model = ApproxNmpc::fit(
        &train,
        &val,
        &norm,
        &cfg.ocp,
        cfg.transcription.regions,
        &cfg.approx.train,
    )
    .map_err(|e| match e {
        Error::TrainingDiverged { .. } => CliError::training(e),
        Error::Size(_) | Error::Schema(_) | Error::Shape(_) => CliError::data(e),
        e => CliError::training(e),
    })?;
    let report = evaluate(&model, &test, cfg.approx.eval_eps_tol).map_err(CliError::data)?;
    ensure_dir(&parent_dir(out), cfg)?;
    model.save(out).map_err(CliError::internal)?;
    write_json(&eval_path(out), &report)?;
    let mut w = create(&out.with_extension("curve.csv"))?;
    writeln!(
        w,
        "epoch,learning_rate,train_total,train_mse,train_resafe,val_total,val_mse,val_resafe"
    )
    .map_err(io_err)?;
    for s in &model.curve {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{:.6e},{:.16e},{:.16e},{},{:.16e},{:.16e},{}",
            s.epoch,
            s.learning_rate,
            s.train.total,
            s.train.mse,
            opt(s.train.resafe),
            s.validation.total,
            s.validation.mse,
            opt(s.validation.resafe)
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    println!(
        "gamma {}: test mse {:.4e}, ctcp {:.4e}, violations count {} rate {:.4e} magnitude {:.4e}",
        cfg.approx.train.gamma,
        report.mse,
        report.ctcp,
        report.violations.count,
        report.violations.rate,
        report.violations.total_magnitude
    );
    Ok(report)
}

/// Compares two eval reports and writes the comparison table.
pub fn compare(baseline: &Path, penalized: &Path, out: &Path) -> CliResult<Comparison> {
    let c = Comparison::new(read_json(baseline)?, read_json(penalized)?);
    let mut w = create(out)?;
    c.write_csv(&mut w).map_err(CliError::internal)?;
    w.flush().map_err(io_err)?;
    let pct = |base: f64, r: f64| {
        if base > 0.0 {
            format!("{:.1}% reduction", 100.0 * (1.0 - r))
        } else {
            "baseline has none".to_string()
        }
    };
    println!(
        "violating instances {} -> {} ({}), magnitude {:.4e} -> {:.4e} ({})",
        c.baseline.violations.count,
        c.penalized.violations.count,
        pct(c.baseline.violations.count as f64, c.count_ratio),
        c.baseline.violations.total_magnitude,
        c.penalized.violations.total_magnitude,
        pct(c.baseline.violations.total_magnitude, c.magnitude_ratio)
    );
    Ok(c)
}

/// Forest monitor with its worst-case threshold and validation figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorArtifact {
    pub forest: RegressionForest,
    pub worst_case_output: String,
    pub worst_case: WorstCaseMonitor,
    pub validation_mse: Vec<(String, f64)>,
    pub mean_predictor_mse: Vec<(String, f64)>,
}

impl MonitorArtifact {
    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }
}

fn kpi_matrix(data: &Dataset, outputs: &[String]) -> CliResult<Vec<Vec<f64>>> {
    data.records
        .iter()
        .map(|r| {
            outputs
                .iter()
                .map(|o| r.kpi(o).ok_or_else(|| CliError::config(format!("unknown KPI `{o}`"))))
                .collect()
        })
        .collect()
}

pub fn train_monitor(cfg: &RunConfig, data_path: &Path, out: &Path) -> CliResult<MonitorArtifact> {
    let outputs: Vec<String> = cfg
        .monitor
        .outputs
        .iter()
        .map(|o| canonical_output(o).to_string())
        .collect();
    let wc = canonical_output(&cfg.monitor.worst_case_output).to_string();
    if !outputs.iter().any(|o| o == "K1") || !outputs.contains(&wc) {
        return Err(CliError::config(
            "monitor.outputs must include K1 and the worst-case output",
        ));
    }
    if !(0.0..=1.0).contains(&cfg.monitor.quantile) {
        return Err(CliError::config("monitor.quantile must lie in [0, 1]"));
    }
    let data = load_data(data_path)?;
    let (train, val, _) = split_data(&data, cfg)?;
    let names: Vec<&str> = outputs.iter().map(String::as_str).collect();
    let forest = RegressionForest::fit_dataset(&train, &names, cfg.monitor.forest).map_err(CliError::training)?;
    let ty = kpi_matrix(&train, &outputs)?;
    let vy = kpi_matrix(&val, &outputs)?;
    let vmse = forest.mse(&val.feature_matrix(), &vy);
    let mmse = mean_predictor_mse(&ty, &vy);
    let wi = outputs.iter().position(|o| *o == wc).expect("checked above");
    let train_wc: Vec<f64> = ty.iter().map(|r| r[wi]).collect();
    let worst_case = WorstCaseMonitor::fit(&forest, &wc, &train_wc, cfg.monitor.quantile).map_err(CliError::data)?;
    let artifact = MonitorArtifact {
        validation_mse: outputs.iter().cloned().zip(vmse).collect(),
        mean_predictor_mse: outputs.iter().cloned().zip(mmse).collect(),
        forest,
        worst_case_output: wc.clone(),
        worst_case,
    };
    let dir = parent_dir(out);
    ensure_dir(&dir, cfg)?;
    write_json(out, &artifact)?;
    let mut w = create(&out.with_extension("report.csv"))?;
    write_monitor_report(&mut w, &artifact.forest, &artifact.worst_case, &val, &wc).map_err(CliError::internal)?;
    w.flush().map_err(io_err)?;
    for ((name, m), (_, b)) in artifact.validation_mse.iter().zip(&artifact.mean_predictor_mse) {
        println!("val mse {name}: {m:.4e} (mean predictor {b:.4e})");
    }
    println!(
        "worst-case threshold {} > {:.4e} (q = {})",
        wc, artifact.worst_case.threshold, artifact.worst_case.quantile
    );
    Ok(artifact)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainSummary {
    pub model: String,
    pub output: String,
    pub top: Vec<String>,
    /// Rank agreement of mean |φ| with permutation importance.
    pub spearman: f64,
    pub max_efficiency_gap: f64,
}

enum Explained {
    Monitor(MonitorArtifact),
    Approx(ApproxNmpc),
}

fn load_explained(path: &Path) -> CliResult<Explained> {
    require(path)?;
    let text = std::fs::read_to_string(path).map_err(CliError::data)?;
    if let Ok(m) = serde_json::from_str::<MonitorArtifact>(&text) {
        return Ok(Explained::Monitor(m));
    }
    drop(text);
    ApproxNmpc::load(path).map(Explained::Approx).map_err(|e| {
        CliError::data(format!(
            "{}: neither a monitor nor an approximate NMPC model ({e})",
            path.display()
        ))
    })
}

/// Attributions for one output of a monitor (or of a distilled approximate NMPC).
///
/// Writes `summary_<output>.csv`, `attributions_<output>.jsonl` and
/// `importance_<output>.csv` into `out`.
pub fn explain(
    cfg: &RunConfig,
    model_path: &Path,
    data_path: &Path,
    output: &str,
    out: &Path,
) -> CliResult<ExplainSummary> {
    let output = canonical_output(output).to_string();
    let data = load_data(data_path)?;
    let (train, val, _) = split_data(&data, cfg)?;
    let train_x = train.feature_matrix();
    let e = &cfg.explain;
    let (forest, predictor, label, o_model): (RegressionForest, Box<dyn Predictor>, String, usize) =
        match load_explained(model_path)? {
            Explained::Monitor(m) => {
                let o = m.forest.output_index(&output).map_err(CliError::config)?;
                (m.forest.clone(), Box::new(m.forest), "forest".into(), o)
            }
            Explained::Approx(m) => {
                let o = m
                    .schema
                    .target_names()
                    .iter()
                    .position(|n| *n == output)
                    .ok_or_else(|| CliError::config(format!("model has no output `{output}`")))?;
                let rows = background_sample(&train_x, 5000, e.seed);
                let names = m.schema.feature_names.clone();
                let f = distill(&m, &rows, &[o], names, vec![output.clone()], ForestParams::default())
                    .map_err(CliError::training)?;
                (f, Box::new(m), "approx_nmpc_distilled".into(), o)
            }
        };
    if forest.feature_names != data.schema.feature_names {
        return Err(CliError::data("model features differ from the dataset's"));
    }
    let background = background_sample(&train_x, e.background, e.seed);
    let explainer = TreeExplainer::new(&forest, background).map_err(CliError::internal)?;
    let val_rows: Vec<(u64, Vec<f64>)> = val
        .records
        .iter()
        .map(|r| (r.instance_id, r.features.clone()))
        .collect();
    let picks = background_sample(
        &(0..val_rows.len()).map(|i| vec![i as f64]).collect::<Vec<_>>(),
        e.instances,
        e.seed,
    );
    let rows: Vec<(u64, Vec<f64>)> = picks.iter().map(|p| val_rows[p[0] as usize].clone()).collect();
    let summary: ShapSummary = shap_summary(&explainer, &label, &rows, &output).map_err(CliError::internal)?;
    let o_forest = forest.output_index(&output).map_err(CliError::internal)?;
    let attrs = explainer.explain_many(&rows).map_err(CliError::internal)?;
    ensure_dir(out, cfg)?;
    let mut w = create(&out.join(format!("summary_{output}.csv")))?;
    summary.write_csv(&mut w).map_err(CliError::internal)?;
    w.flush().map_err(io_err)?;
    let mut w = create(&out.join(format!("attributions_{output}.jsonl")))?;
    let mut gap: f64 = 0.0;
    for a in attrs.iter().map(|a| &a[o_forest]) {
        gap = gap.max(a.efficiency_gap().abs());
        writeln!(w, "{}", serde_json::to_string(a).map_err(CliError::internal)?).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;

    let imp_rows: Vec<Vec<f64>> = val.feature_matrix().into_iter().take(1000).collect();
    let truth: Vec<f64> = if label == "forest" {
        val.records
            .iter()
            .take(imp_rows.len())
            .map(|r| r.kpi(&output).unwrap_or(f64::NAN))
            .collect()
    } else {
        val.records
            .iter()
            .take(imp_rows.len())
            .map(|r| r.target[o_model])
            .collect()
    };
    let imp =
        permutation_importance(predictor.as_ref(), &imp_rows, &truth, o_model, 5, e.seed).map_err(CliError::data)?;
    let mut w = create(&out.join(format!("importance_{output}.csv")))?;
    writeln!(w, "feature,mean_mse_increase,std").map_err(io_err)?;
    for (f, (m, s)) in forest.feature_names.iter().zip(imp.mean.iter().zip(&imp.std)) {
        writeln!(w, "{f},{m:.16e},{s:.16e}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    let mean_abs: Vec<f64> = forest
        .feature_names
        .iter()
        .map(|f| {
            summary
                .rows
                .iter()
                .find(|r| r.feature == *f)
                .map_or(0.0, |r| r.mean_abs_shap)
        })
        .collect();
    let result = ExplainSummary {
        model: label,
        output,
        top: summary.top(4).into_iter().map(String::from).collect(),
        spearman: spearman(&imp.mean, &mean_abs),
        max_efficiency_gap: gap,
    };
    println!(
        "{} {}: top features {:?}, spearman vs permutation importance {:.3}",
        result.model, result.output, result.top, result.spearman
    );
    Ok(result)
}

/// Symbolic regression of a KPI on all features; writes the Pareto front JSON.
pub fn symreg(
    cfg: &mut RunConfig,
    data_path: &Path,
    target: Option<&str>,
    seed: Option<u64>,
    out: &Path,
) -> CliResult<GpResult> {
    if let Some(t) = target {
        cfg.symreg.target = t.to_string();
    }
    if let Some(s) = seed {
        cfg.symreg.gp.seed = s;
    }
    let target = canonical_output(&cfg.symreg.target).to_string();
    let data = load_data(data_path)?;
    let (train, val, _) = split_data(&data, cfg)?;
    let col = |d: &Dataset| -> CliResult<Vec<f64>> {
        d.records
            .iter()
            .map(|r| {
                r.kpi(&target)
                    .ok_or_else(|| CliError::config(format!("unknown KPI `{target}`")))
            })
            .collect()
    };
    let (ty, vy) = (col(&train)?, col(&val)?);
    let picks = background_sample(
        &(0..train.len()).map(|i| vec![i as f64]).collect::<Vec<_>>(),
        cfg.symreg.max_rows,
        cfg.symreg.gp.seed,
    );
    let mut idx: Vec<usize> = picks.iter().map(|p| p[0] as usize).collect();
    idx.sort_unstable();
    let tx = train.feature_matrix();
    let xs: Vec<Vec<f64>> = idx.iter().map(|&i| tx[i].clone()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| ty[i]).collect();
    let result = evolve(
        &xs,
        &ys,
        &val.feature_matrix(),
        &vy,
        &data.schema.feature_names,
        &cfg.symreg.gp,
    )
    .map_err(|e| match e {
        Error::Domain(_) => CliError::config(e),
        e => CliError::data(e),
    })?;
    ensure_dir(&parent_dir(out), cfg)?;
    let mut w = create(out)?;
    write_front(&mut w, &result.front).map_err(CliError::internal)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err)?;
    if let Some(b) = result.best_val() {
        println!(
            "{target}: {} front members, best val mse {:.4e} at complexity {}: {}",
            result.front.len(),
            b.val_mse,
            b.complexity,
            b.expression
        );
    }
    Ok(result)
}

pub fn dimensionality(cfg: &RunConfig) -> DimensionalityReport {
    let r = DimensionalityReport::new(
        cfg.transcription.sections,
        cfg.transcription.order,
        cfg.ocp.horizon_s,
        cfg.scenarios.ranges.step_s,
    );
    println!(
        "{} coefficients per signal against {} samples: {} reduction",
        r.coefficients,
        r.samples,
        r.percent()
    );
    r
}

/// Artifact paths of a pipeline run, relative to its root.
pub mod layout {
    pub const DATA: &str = "data/dataset.csv";
    pub const BASELINE: &str = "approx/baseline.json";
    pub const PENALIZED: &str = "approx/penalized.json";
    pub const COMPARISON: &str = "approx/comparison.csv";
    pub const MONITOR: &str = "monitor/monitor.json";
    pub const EXPLAIN: &str = "explain";
    pub const FRONT: &str = "symreg/front.json";
}

/// gen-data, both approximate-NMPC variants, monitor, explanations and
/// symbolic regression under one configuration.
pub fn pipeline(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    ensure_dir(out, cfg)?;
    let mut c = cfg.clone();
    gen_data(&mut c, &GenDataArgs::default(), &out.join("data"))?;
    let data = out.join(layout::DATA);
    let base = out.join(layout::BASELINE);
    let pen = out.join(layout::PENALIZED);
    let gamma = cfg.approx.train.gamma;
    let mut c0 = cfg.clone();
    train_approx(
        &mut c0,
        &data,
        &TrainApproxArgs {
            gamma: Some(0.0),
            epochs: None,
        },
        &base,
    )?;
    let mut c1 = cfg.clone();
    let g = if gamma > 0.0 { gamma } else { 1.0 };
    train_approx(
        &mut c1,
        &data,
        &TrainApproxArgs {
            gamma: Some(g),
            epochs: None,
        },
        &pen,
    )?;
    // the approx directory holds both runs; record the shared base config
    ensure_dir(&out.join("approx"), cfg)?;
    compare(&eval_path(&base), &eval_path(&pen), &out.join(layout::COMPARISON))?;
    let monitor = out.join(layout::MONITOR);
    train_monitor(cfg, &data, &monitor)?;
    for o in &cfg.explain.outputs {
        explain(cfg, &monitor, &data, o, &out.join(layout::EXPLAIN))?;
    }
    symreg(&mut cfg.clone(), &data, None, None, &out.join(layout::FRONT))?;
    Ok(())
}
