use super::model::{OcpDefinition, ScenarioParams};
use super::model::{CONTROL_NAMES, STATE_NAMES};
use super::solver::{solve, SolverOptions};
use super::transcribe::{transcribe, NlpProblem, TranscriptionOptions};
use crate::dataset::{ClosedLoopRecord, Dataset, DatasetSchema, FEATURE_NAMES};
use crate::envelope::check_violations;
use crate::error::{Error, Result};
use crate::legendre::{equidistant_breakpoints, fit_spline, CoefficientLayout, FitOptions, TrajectoryBundle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Plant-model mismatch ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantMismatch {
    /// Plant wheelbase relative to the model's.
    pub wheelbase_scale: f64,
    /// Plant acceleration per unit throttle relative to the model's.
    pub accel_gain: f64,
    /// First-order throttle actuator lag (0 disables).
    pub throttle_lag_s: f64,
    /// Measurement noise std on `[w, θ_e, v]`.
    pub noise_std: [f64; 3],
}

impl Default for PlantMismatch {
    fn default() -> Self {
        Self {
            wheelbase_scale: 1.03,
            accel_gain: 0.95,
            throttle_lag_s: 0.1,
            noise_std: [0.005, 0.001, 0.02],
        }
    }
}

impl PlantMismatch {
    pub fn none() -> Self {
        Self {
            wheelbase_scale: 1.0,
            accel_gain: 1.0,
            throttle_lag_s: 0.0,
            noise_std: [0.0; 3],
        }
    }
}

/// Path curvature `κ(s) = Σ a sin(2π s / λ + φ)` over arc length.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Track {
    /// `(amplitude [1/m], wavelength [m], phase [rad])`.
    pub harmonics: Vec<(f64, f64, f64)>,
}

impl Track {
    pub fn curvature(&self, s: f64) -> f64 {
        self.harmonics
            .iter()
            .map(|&(a, l, p)| a * (2.0 * PI * s / l + p).sin())
            .sum()
    }
}

/// Obstacle appearing `distance_m` ahead at `time_s`, `lateral_m` off the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleEvent {
    pub time_s: f64,
    pub distance_m: f64,
    pub lateral_m: f64,
}

/// Sensor range reported when no obstacle is ahead.
pub const OBSTACLE_RANGE_M: f64 = 60.0;
/// Distance below which an obstacle slows the reference speed.
pub const OBSTACLE_SLOWDOWN_M: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopScenario {
    pub id: u64,
    pub duration_s: f64,
    pub step_s: f64,
    pub seed: u64,
    pub mismatch: PlantMismatch,
    pub track: Track,
    /// Piecewise-constant reference speed: `(start time, v_ref)`, ascending.
    pub speed_profile: Vec<(f64, f64)>,
    pub obstacles: Vec<ObstacleEvent>,
    /// Initial `[w, θ_e, v]`.
    pub start: [f64; 3],
}

impl ClosedLoopScenario {
    pub fn validate(&self, horizon_s: f64) -> Result<()> {
        if !(self.step_s > 0.0 && self.step_s < horizon_s) {
            return Err(Error::Domain(format!(
                "control step {} outside (0, {horizon_s})",
                self.step_s
            )));
        }
        if !(self.duration_s >= self.step_s) {
            return Err(Error::Domain("duration shorter than one control step".into()));
        }
        if self.speed_profile.is_empty() {
            return Err(Error::Domain("empty reference speed profile".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration_s / self.step_s + 1e-9).floor() as usize
    }

    pub fn v_ref(&self, t: f64) -> f64 {
        self.speed_profile
            .iter()
            .rev()
            .find(|(t0, _)| *t0 <= t)
            .unwrap_or(&self.speed_profile[0])
            .1
    }
}

/// Sampling ranges of [`randomize_scenarios`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioRanges {
    pub duration_s: f64,
    pub step_s: f64,
    pub v_ref: (f64, f64),
    pub curvature_amplitude: (f64, f64),
    pub wavelength_m: (f64, f64),
    /// Mean time between reference speed changes.
    pub speed_change_interval_s: (f64, f64),
    pub obstacles_per_minute: f64,
    pub start_lateral_m: f64,
    pub start_heading_rad: f64,
    pub start_speed_offset: f64,
    pub wheelbase_scale: (f64, f64),
    pub accel_gain: (f64, f64),
    pub throttle_lag_s: (f64, f64),
    pub noise_std: [f64; 3],
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            step_s: 0.05,
            v_ref: (8.0, 16.0),
            curvature_amplitude: (0.0, 0.02),
            wavelength_m: (80.0, 240.0),
            speed_change_interval_s: (3.0, 8.0),
            obstacles_per_minute: 3.0,
            start_lateral_m: 0.5,
            start_heading_rad: 0.05,
            start_speed_offset: 3.0,
            wheelbase_scale: (0.95, 1.05),
            accel_gain: (0.9, 1.1),
            throttle_lag_s: (0.05, 0.2),
            noise_std: [0.005, 0.001, 0.02],
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Deterministic scenario sampling under `seed`.
pub fn randomize_scenarios(n: usize, seed: u64, ranges: &ScenarioRanges) -> Vec<ClosedLoopScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|id| {
            let harmonics = (0..2)
                .map(|_| {
                    (
                        uniform(&mut rng, ranges.curvature_amplitude) / 2.0_f64.sqrt(),
                        uniform(&mut rng, ranges.wavelength_m),
                        uniform(&mut rng, (0.0, 2.0 * PI)),
                    )
                })
                .collect();
            let mut speed_profile = vec![(0.0, uniform(&mut rng, ranges.v_ref))];
            let mut t = 0.0;
            loop {
                t += uniform(&mut rng, ranges.speed_change_interval_s);
                if t >= ranges.duration_s {
                    break;
                }
                speed_profile.push((t, uniform(&mut rng, ranges.v_ref)));
            }
            let mut obstacles = Vec::new();
            let rate = ranges.obstacles_per_minute / 60.0;
            if rate > 0.0 {
                let mut t = 0.0;
                loop {
                    let u: f64 = rng.random_range(1e-9..1.0);
                    t += -u.ln() / rate;
                    if t >= ranges.duration_s {
                        break;
                    }
                    obstacles.push(ObstacleEvent {
                        time_s: t,
                        distance_m: uniform(&mut rng, (20.0, 45.0)),
                        lateral_m: uniform(&mut rng, (-3.0, 3.0)),
                    });
                }
            }
            let v0 = speed_profile[0].1;
            let start = [
                uniform(&mut rng, (-ranges.start_lateral_m, ranges.start_lateral_m)),
                uniform(&mut rng, (-ranges.start_heading_rad, ranges.start_heading_rad)),
                (v0 + uniform(&mut rng, (-ranges.start_speed_offset, ranges.start_speed_offset))).max(1.0),
            ];
            let mismatch = PlantMismatch {
                wheelbase_scale: uniform(&mut rng, ranges.wheelbase_scale),
                accel_gain: uniform(&mut rng, ranges.accel_gain),
                throttle_lag_s: uniform(&mut rng, ranges.throttle_lag_s),
                noise_std: ranges.noise_std,
            };
            ClosedLoopScenario {
                id: id as u64,
                duration_s: ranges.duration_s,
                step_s: ranges.step_s,
                seed: rng.random(),
                mismatch,
                track: Track { harmonics },
                speed_profile,
                obstacles,
                start,
            }
        })
        .collect()
}

/// Plant state: `[w, θ_e, v, δ, t_r, lagged throttle, arc length]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState(pub [f64; 7]);

#[derive(Debug, Clone)]
pub struct Plant<'a> {
    pub def: &'a OcpDefinition,
    pub mismatch: PlantMismatch,
    pub track: &'a Track,
}

impl Plant<'_> {
    fn rhs(&self, x: &[f64; 7], u: [f64; 2]) -> [f64; 7] {
        let [w, th, v, d, tr, a, s] = *x;
        let k = self.track.curvature(s);
        let den = 1.0 - k * w;
        let l = self.def.vehicle.wheelbase_m * self.mismatch.wheelbase_scale;
        let lag = self.mismatch.throttle_lag_s;
        let eff = if lag > 0.0 { a } else { tr };
        [
            v * th.sin(),
            v * d.tan() / l - k * v * th.cos() / den,
            self.def.vehicle.accel_max * self.mismatch.accel_gain * eff - self.def.vehicle.drag * v,
            u[0],
            u[1],
            if lag > 0.0 { (tr - a) / lag } else { 0.0 },
            v * th.cos() / den,
        ]
    }

    /// Integrates over `[0, step]` with RK4 at `substeps`, applying `u(t)`.
    pub fn advance(&self, x: PlantState, step: f64, substeps: usize, u: impl Fn(f64) -> [f64; 2]) -> PlantState {
        let h = step / substeps as f64;
        let mut y = x.0;
        let axpy = |y: &[f64; 7], k: &[f64; 7], c: f64| {
            let mut o = *y;
            for i in 0..7 {
                o[i] += c * k[i];
            }
            o
        };
        for i in 0..substeps {
            let t = i as f64 * h;
            let k1 = self.rhs(&y, u(t));
            let k2 = self.rhs(&axpy(&y, &k1, h / 2.0), u(t + h / 2.0));
            let k3 = self.rhs(&axpy(&y, &k2, h / 2.0), u(t + h / 2.0));
            let k4 = self.rhs(&axpy(&y, &k3, h), u(t + h));
            for j in 0..7 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        PlantState(y)
    }
}

/// Shifts a solution forward by `dt` and refits it on the same sections.
pub fn shift_solution(bundle: &TrajectoryBundle<f64>, dt: f64) -> Result<Vec<f64>> {
    let first = bundle
        .states()
        .first()
        .ok_or_else(|| Error::EmptyInput("empty bundle".into()))?;
    let (ns, m, h) = (first.sections(), first.order(), first.horizon_s());
    let bp = equidistant_breakpoints::<f64>(ns);
    let per = 4 * (m + 1);
    let taus: Vec<f64> = (0..ns * per)
        .map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / (ns * per) as f64)
        .collect();
    let mut out = Vec::with_capacity(bundle.to_vector().len());
    for s in bundle.splines() {
        let samples = taus
            .iter()
            .map(|&tau| {
                let t = ((tau + 1.0) * 0.5 * h + dt).min(h);
                Ok((tau, s.eval_time(t)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_spline(
            s.signal(),
            &samples,
            m,
            &bp,
            FitOptions {
                continuity_weight: None,
                horizon_s: h,
            },
        )?;
        out.extend_from_slice(fit.spline.coeffs());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopOptions {
    pub transcription: (usize, usize, usize),
    pub solver: SolverOptions,
    /// RK4 substeps per control step.
    pub substeps: usize,
    /// Tolerance of the continuous-time check on each solved trajectory.
    pub check_tolerance: f64,
}

impl Default for ClosedLoopOptions {
    fn default() -> Self {
        Self {
            transcription: (3, 4, 4),
            solver: SolverOptions::default(),
            substeps: 10,
            check_tolerance: 1e-6,
        }
    }
}

impl ClosedLoopOptions {
    pub fn transcription_options(&self) -> TranscriptionOptions {
        let (sections, order, regions) = self.transcription;
        TranscriptionOptions {
            sections,
            order,
            regions,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    pub records: Vec<ClosedLoopRecord>,
    /// `(step, message)` of solver failures where the previous plan was reused.
    pub failures: Vec<(usize, String)>,
}

impl ClosedLoopRun {
    pub fn convergence_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.converged).count() as f64 / self.records.len() as f64
    }
}

/// Obstacle distance and bearing at arc length `s` and time `t`.
fn obstacle_features(scenario: &ClosedLoopScenario, starts: &[Option<f64>], s: f64, w: f64) -> (f64, f64) {
    let mut best = (OBSTACLE_RANGE_M, 0.0);
    for (ev, start) in scenario.obstacles.iter().zip(starts) {
        if let Some(s0) = start {
            let d = s0 + ev.distance_m - s;
            if d > 0.0 && d < best.0 {
                best = (d, (ev.lateral_m - w).atan2(d));
            }
        }
    }
    best
}

/// Assembles the feature vector in [`FEATURE_NAMES`] order.
pub fn features(x: &[f64; 5], v_ref: f64, curvature: [f64; 3], obstacle: (f64, f64), wheelbase: f64) -> Vec<f64> {
    let yaw_rate = x[2] * x[3].tan() / wheelbase;
    let f = vec![
        x[0],
        x[1],
        x[2],
        x[3],
        x[4],
        yaw_rate,
        v_ref,
        v_ref - x[2],
        curvature[0],
        curvature[1],
        curvature[2],
        obstacle.0,
        obstacle.1,
    ];
    debug_assert_eq!(f.len(), FEATURE_NAMES.len());
    f
}

/// Reconstructs the OCP instance behind a feature vector.
pub fn definition_from_features(base: &OcpDefinition, features: &[f64]) -> Result<OcpDefinition> {
    if features.len() != FEATURE_NAMES.len() {
        return Err(Error::Shape(format!(
            "{} features, expected {}",
            features.len(),
            FEATURE_NAMES.len()
        )));
    }
    let mut def = base.clone();
    def.x0 = [features[0], features[1], features[2], features[3], features[4]];
    def.params = ScenarioParams {
        v_ref: features[6],
        curvature: [features[8], features[9], features[10]],
    };
    Ok(def)
}

/// Receding-horizon run of `scenario` with OCP weights and limits from `base`.
pub fn run_closed_loop(
    scenario: &ClosedLoopScenario,
    base: &OcpDefinition,
    options: &ClosedLoopOptions,
) -> Result<ClosedLoopRun> {
    base.validate()?;
    scenario.validate(base.horizon_s)?;
    let topts = options.transcription_options();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise: Vec<Normal<f64>> = scenario
        .mismatch
        .noise_std
        .iter()
        .map(|&s| Normal::new(0.0, s.max(0.0)).map_err(|e| Error::Domain(e.to_string())))
        .collect::<Result<_>>()?;
    let plant = Plant {
        def: base,
        mismatch: scenario.mismatch,
        track: &scenario.track,
    };
    let [w0, th0, v0] = scenario.start;
    let tr0 = (base.vehicle.drag * v0 / base.vehicle.accel_max).clamp(-1.0, 1.0);
    let mut x = PlantState([w0, th0, v0, 0.0, tr0, tr0, 0.0]);
    let mut obstacle_start: Vec<Option<f64>> = vec![None; scenario.obstacles.len()];
    let mut warm: Option<Vec<f64>> = None;
    let mut records = Vec::with_capacity(scenario.steps());
    let mut failures = Vec::new();
    let lookahead = [0.0, 0.5 * base.horizon_s, base.horizon_s];

    for step in 0..scenario.steps() {
        let t = step as f64 * scenario.step_s;
        for (ev, start) in scenario.obstacles.iter().zip(obstacle_start.iter_mut()) {
            if start.is_none() && ev.time_s <= t {
                *start = Some(x.0[6]);
            }
        }
        let mut meas = [x.0[0], x.0[1], x.0[2], x.0[3], x.0[4]];
        for (i, n) in noise.iter().enumerate() {
            meas[i] += n.sample(&mut rng);
        }
        let meas = base.project_state(meas);
        let obstacle = obstacle_features(scenario, &obstacle_start, x.0[6], meas[0]);
        let mut v_ref = scenario.v_ref(t);
        if obstacle.0 < OBSTACLE_SLOWDOWN_M {
            v_ref *= 0.5 + 0.5 * obstacle.0 / OBSTACLE_SLOWDOWN_M;
        }
        let ds = meas[2].max(1.0);
        let curvature = lookahead.map(|dt| scenario.track.curvature(x.0[6] + ds * dt));
        let feats = features(&meas, v_ref, curvature, obstacle, base.vehicle.wheelbase_m);
        let def = definition_from_features(base, &feats)?;
        let nlp = transcribe(Arc::new(def), &topts)?;

        let outcome = solve(&nlp, warm.as_deref(), &options.solver);
        let (bundle, record) = match outcome {
            Ok((bundle, stats)) => {
                let report = check_violations(&bundle, nlp.constraints(), nlp.hull_maps(), options.check_tolerance, 0)?;
                let rec = ClosedLoopRecord {
                    instance_id: scenario.id * 1_000_000 + step as u64,
                    scenario_id: scenario.id,
                    timestamp: t,
                    features: feats,
                    target: bundle.to_vector(),
                    k1: stats.cost,
                    k2_ms: stats.k2_ms(options.solver.timing),
                    k2_iters: stats.iterations as f64,
                    converged: stats.converged,
                    violation: report.violates(),
                };
                (bundle, rec)
            }
            Err(e) => {
                failures.push((step, e.to_string()));
                let fallback = warm.clone().unwrap_or_else(|| nlp.cold_start());
                let bundle = TrajectoryBundle::from_vector(nlp.layout(), &fallback)?;
                let rec = ClosedLoopRecord {
                    instance_id: scenario.id * 1_000_000 + step as u64,
                    scenario_id: scenario.id,
                    timestamp: t,
                    features: feats,
                    target: bundle.to_vector(),
                    k1: nlp.cost(&bundle.to_vector()),
                    k2_ms: options.solver.max_iterations as f64 * 0.6,
                    k2_iters: options.solver.max_iterations as f64,
                    converged: false,
                    violation: true,
                };
                (bundle, rec)
            }
        };
        records.push(record);

        let controls: Vec<_> = bundle.controls().to_vec();
        let h = base.horizon_s;
        x = plant.advance(x, scenario.step_s, options.substeps, |tt| {
            let tt = tt.min(h);
            [
                controls[0].eval_time(tt).unwrap_or(0.0),
                controls[1].eval_time(tt).unwrap_or(0.0),
            ]
        });
        if !x.0.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure(format!("plant state diverged at step {step}")));
        }
        warm = Some(shift_solution(&bundle, scenario.step_s)?);
    }
    Ok(ClosedLoopRun { records, failures })
}

/// Convenience wrapper: the problem behind a recorded instance.
pub fn problem_for_record(
    base: &OcpDefinition,
    record: &ClosedLoopRecord,
    options: &ClosedLoopOptions,
) -> Result<NlpProblem> {
    let def = definition_from_features(base, &record.features)?;
    transcribe(Arc::new(def), &options.transcription_options())
}

/// Runs every scenario (in parallel) and collects the finite records in scenario order.
pub fn generate_dataset(
    scenarios: &[ClosedLoopScenario],
    base: &OcpDefinition,
    options: &ClosedLoopOptions,
) -> Result<(Dataset, Vec<(u64, usize, String)>)> {
    let runs = scenarios
        .par_iter()
        .map(|s| run_closed_loop(s, base, options).map(|r| (s.id, r)))
        .collect::<Result<Vec<_>>>()?;
    let (ns, m, _) = options.transcription;
    let layout = CoefficientLayout::equidistant(ns, m, base.horizon_s, &STATE_NAMES, &CONTROL_NAMES);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, run) in runs {
        failures.extend(run.failures.into_iter().map(|(step, msg)| (id, step, msg)));
        records.extend(run.records.into_iter().filter(ClosedLoopRecord::is_finite));
    }
    Ok((Dataset::new(DatasetSchema::new(layout), records)?, failures))
}
