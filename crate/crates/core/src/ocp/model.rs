use crate::envelope::{ConstraintSpec, LateralSlip};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::sync::Arc;

/// Quadratic tracking term `weight · (s - reference)²` on signal `signal`
/// (index into states followed by controls).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingTerm {
    pub signal: usize,
    pub weight: f64,
    pub reference: f64,
}

/// Continuous-time optimal control problem with least-squares Bolza cost:
/// `J = Σ_terminal w (x(T_H) - r)² + ∫ Σ_stage w (s(t) - r)² dt`,
/// subject to `ẋ = f(τ, x, u)`, `x(0) = x̄₀` and path constraints.
pub trait OcpModel: Send + Sync + Debug {
    fn state_names(&self) -> Vec<String>;
    fn control_names(&self) -> Vec<String>;
    fn horizon_s(&self) -> f64;
    fn initial_state(&self) -> Vec<f64>;

    /// Writes `f` and its row-major Jacobians `∂f/∂x` (`N_x × N_x`) and
    /// `∂f/∂u` (`N_x × N_u`). `tau` is the global normalized time.
    fn dynamics(&self, tau: f64, x: &[f64], u: &[f64], f: &mut [f64], fx: &mut [f64], fu: &mut [f64]);

    fn stage_cost(&self) -> Vec<TrackingTerm>;
    fn terminal_cost(&self) -> Vec<TrackingTerm>;

    /// Hard terminal conditions `x_i(T_H) = value`.
    fn terminal_equalities(&self) -> Vec<(usize, f64)> {
        Vec::new()
    }

    /// Box and vertex path constraints over the named signals.
    fn constraints(&self) -> Result<Vec<ConstraintSpec<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    pub wheelbase_m: f64,
    /// Acceleration at full throttle.
    pub accel_max: f64,
    /// Linear drag coefficient.
    pub drag: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase_m: 2.7,
            accel_max: 4.0,
            drag: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    pub speed: f64,
    pub lateral: f64,
    pub heading: f64,
    pub steer_rate: f64,
    pub throttle_rate: f64,
    pub steer: f64,
    pub throttle: f64,
    /// Multiplier of the tracking weights at the end of the horizon.
    pub terminal: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            speed: 3.1,
            lateral: 1.0,
            heading: 1.0,
            steer_rate: 1.0,
            throttle_rate: 0.1,
            steer: 1e-3,
            throttle: 1e-3,
            terminal: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub lateral_m: f64,
    pub heading_rad: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub steer_rad: f64,
    pub throttle: f64,
    pub steer_rate: f64,
    pub throttle_rate: f64,
    /// Bound `c` of the lateral-slip surrogate `v² |δ| ≤ c`.
    pub slip: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            lateral_m: 2.0,
            heading_rad: 0.6,
            speed_min: 0.0,
            speed_max: 18.0,
            steer_rad: 0.4,
            throttle: 1.0,
            steer_rate: 0.3,
            throttle_rate: 1.5,
            slip: 13.5,
        }
    }
}

impl Limits {
    /// `(lower, upper)` per signal in [`STATE_NAMES`] then [`CONTROL_NAMES`] order.
    pub fn bounds(&self) -> [(f64, f64); 7] {
        [
            (-self.lateral_m, self.lateral_m),
            (-self.heading_rad, self.heading_rad),
            (self.speed_min, self.speed_max),
            (-self.steer_rad, self.steer_rad),
            (-self.throttle, self.throttle),
            (-self.steer_rate, self.steer_rate),
            (-self.throttle_rate, self.throttle_rate),
        ]
    }
}

/// Per-instance parameters: reference speed and a three-point curvature
/// preview at `t = 0, T_H/2, T_H`, interpolated quadratically in time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    pub v_ref: f64,
    pub curvature: [f64; 3],
}

impl ScenarioParams {
    pub fn curvature_at(&self, tau: f64) -> f64 {
        let [k0, k1, k2] = self.curvature;
        k1 + 0.5 * (k2 - k0) * tau + 0.5 * (k0 - 2.0 * k1 + k2) * tau * tau
    }
}

pub const STATE_NAMES: [&str; 5] = ["w", "theta", "vx", "steer", "throttle"];
pub const CONTROL_NAMES: [&str; 2] = ["steer_rate", "throttle_rate"];

/// Path-tracking problem for a kinematic bicycle in Frenet coordinates.
///
/// States `[w, θ_e, v, δ, t_r]`, controls `[δ̇, ṫ_r]`:
/// `ẇ = v sin θ`, `θ̇ = v tan δ / L - κ v cos θ / (1 - κ w)`,
/// `v̇ = a_max t_r - c_d v`, `δ̇ = u₀`, `ṫ_r = u₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcpDefinition {
    pub horizon_s: f64,
    pub vehicle: VehicleParams,
    pub weights: CostWeights,
    pub limits: Limits,
    pub x0: [f64; 5],
    pub params: ScenarioParams,
}

impl Default for OcpDefinition {
    fn default() -> Self {
        Self {
            horizon_s: 3.0,
            vehicle: VehicleParams::default(),
            weights: CostWeights::default(),
            limits: Limits::default(),
            x0: [0.0; 5],
            params: ScenarioParams::default(),
        }
    }
}

impl OcpDefinition {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_s > 0.0) {
            return Err(Error::Domain("horizon must be positive".into()));
        }
        let w = &self.weights;
        let all = [
            w.speed,
            w.lateral,
            w.heading,
            w.steer_rate,
            w.throttle_rate,
            w.steer,
            w.throttle,
            w.terminal,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("cost weights must be non-negative".into()));
        }
        if !(self.vehicle.wheelbase_m > 0.0) {
            return Err(Error::Domain("wheelbase must be positive".into()));
        }
        Ok(())
    }

    /// Clamps a measured state into the box bounds and the slip region.
    pub fn project_state(&self, x: [f64; 5]) -> [f64; 5] {
        let b = self.limits.bounds();
        let mut y = x;
        for i in 0..5 {
            let (lo, hi) = b[i];
            y[i] = y[i].clamp(lo, hi);
        }
        let v2 = y[2] * y[2];
        if v2 > 0.0 {
            let cap = 0.999 * self.limits.slip / v2;
            y[3] = y[3].clamp(-cap, cap);
        }
        y
    }
}

impl OcpModel for OcpDefinition {
    fn state_names(&self) -> Vec<String> {
        STATE_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn control_names(&self) -> Vec<String> {
        CONTROL_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn horizon_s(&self) -> f64 {
        self.horizon_s
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.to_vec()
    }

    fn dynamics(&self, tau: f64, x: &[f64], u: &[f64], f: &mut [f64], fx: &mut [f64], fu: &mut [f64]) {
        let (w, th, v, d, tr) = (x[0], x[1], x[2], x[3], x[4]);
        let l = self.vehicle.wheelbase_m;
        let k = self.params.curvature_at(tau);
        let den = 1.0 - k * w;
        let (s, c) = th.sin_cos();
        let t = d.tan();
        f[0] = v * s;
        f[1] = v * t / l - k * v * c / den;
        f[2] = self.vehicle.accel_max * tr - self.vehicle.drag * v;
        f[3] = u[0];
        f[4] = u[1];

        fx.iter_mut().for_each(|e| *e = 0.0);
        fu.iter_mut().for_each(|e| *e = 0.0);
        fx[1] = v * c;
        fx[2] = s;
        fx[5] = -k * k * v * c / (den * den);
        fx[5 + 1] = k * v * s / den;
        fx[5 + 2] = t / l - k * c / den;
        fx[5 + 3] = v * (1.0 + t * t) / l;
        fx[10 + 2] = -self.vehicle.drag;
        fx[10 + 4] = self.vehicle.accel_max;
        fu[3 * 2] = 1.0;
        fu[4 * 2 + 1] = 1.0;
    }

    fn stage_cost(&self) -> Vec<TrackingTerm> {
        let w = &self.weights;
        let term = |signal, weight, reference| TrackingTerm {
            signal,
            weight,
            reference,
        };
        vec![
            term(0, w.lateral, 0.0),
            term(1, w.heading, 0.0),
            term(2, w.speed, self.params.v_ref),
            term(3, w.steer, 0.0),
            term(4, w.throttle, 0.0),
            term(5, w.steer_rate, 0.0),
            term(6, w.throttle_rate, 0.0),
        ]
    }

    fn terminal_cost(&self) -> Vec<TrackingTerm> {
        let w = &self.weights;
        let m = w.terminal;
        vec![
            TrackingTerm {
                signal: 0,
                weight: m * w.lateral,
                reference: 0.0,
            },
            TrackingTerm {
                signal: 1,
                weight: m * w.heading,
                reference: 0.0,
            },
            TrackingTerm {
                signal: 2,
                weight: m * w.speed,
                reference: self.params.v_ref,
            },
        ]
    }

    fn constraints(&self) -> Result<Vec<ConstraintSpec<f64>>> {
        let names = STATE_NAMES.iter().chain(CONTROL_NAMES.iter());
        let mut out = names
            .zip(self.limits.bounds())
            .map(|(n, (lo, hi))| ConstraintSpec::bounds(format!("{n}_box"), *n, lo, hi))
            .collect::<Result<Vec<_>>>()?;
        if !(self.limits.slip > 0.0) {
            return Err(Error::Domain("slip limit must be positive".into()));
        }
        // convex in each argument, so the vertex maximum is exact: no slack
        out.push(ConstraintSpec::vertex(
            "lateral_slip",
            Arc::new(LateralSlip::new("vx", "steer", self.limits.slip)),
            0.0,
        ));
        Ok(out)
    }
}

/// Rest-to-rest double integrator `ẋ₁ = x₂, ẋ₂ = u` with cost `∫ u² dt`.
///
/// Moving from 0 to `distance` over `T`, the minimum-energy control is
/// `u(t) = 6d/T² - 12dt/T³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleIntegrator {
    pub horizon_s: f64,
    pub distance: f64,
}

impl DoubleIntegrator {
    pub fn analytic(&self, t: f64) -> [f64; 3] {
        let (d, h) = (self.distance, self.horizon_s);
        let s = t / h;
        [
            d * (3.0 * s * s - 2.0 * s * s * s),
            d * (6.0 * s - 6.0 * s * s) / h,
            d * (6.0 - 12.0 * s) / (h * h),
        ]
    }
}

impl OcpModel for DoubleIntegrator {
    fn state_names(&self) -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    fn control_names(&self) -> Vec<String> {
        vec!["u".into()]
    }

    fn horizon_s(&self) -> f64 {
        self.horizon_s
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn dynamics(&self, _tau: f64, x: &[f64], u: &[f64], f: &mut [f64], fx: &mut [f64], fu: &mut [f64]) {
        f[0] = x[1];
        f[1] = u[0];
        fx.copy_from_slice(&[0.0, 1.0, 0.0, 0.0]);
        fu.copy_from_slice(&[0.0, 1.0]);
    }

    fn stage_cost(&self) -> Vec<TrackingTerm> {
        vec![TrackingTerm {
            signal: 2,
            weight: 1.0,
            reference: 0.0,
        }]
    }

    fn terminal_cost(&self) -> Vec<TrackingTerm> {
        Vec::new()
    }

    fn terminal_equalities(&self) -> Vec<(usize, f64)> {
        vec![(0, self.distance), (1, 0.0)]
    }

    fn constraints(&self) -> Result<Vec<ConstraintSpec<f64>>> {
        Ok(Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bicycle_jacobians_match_finite_differences() {
        let def = OcpDefinition {
            params: ScenarioParams {
                v_ref: 12.0,
                curvature: [0.01, -0.015, 0.02],
            },
            ..Default::default()
        };
        let x = [0.3, -0.1, 11.0, 0.05, 0.2];
        let u = [0.1, -0.4];
        let tau = 0.3;
        let (mut f, mut fx, mut fu) = ([0.0; 5], [0.0; 25], [0.0; 10]);
        def.dynamics(tau, &x, &u, &mut f, &mut fx, &mut fu);
        let h = 1e-6;
        let (mut fp, mut fm, mut sx, mut su) = ([0.0; 5], [0.0; 5], [0.0; 25], [0.0; 10]);
        for j in 0..5 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            def.dynamics(tau, &xp, &u, &mut fp, &mut sx, &mut su);
            def.dynamics(tau, &xm, &u, &mut fm, &mut sx, &mut su);
            for i in 0..5 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - fx[i * 5 + j]).abs() < 1e-6, "x {i},{j}");
            }
        }
        for j in 0..2 {
            let (mut up, mut um) = (u, u);
            up[j] += h;
            um[j] -= h;
            def.dynamics(tau, &x, &up, &mut fp, &mut sx, &mut su);
            def.dynamics(tau, &x, &um, &mut fm, &mut sx, &mut su);
            for i in 0..5 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - fu[i * 2 + j]).abs() < 1e-6, "u {i},{j}");
            }
        }
    }

    #[test]
    fn curvature_preview_interpolates() {
        let p = ScenarioParams {
            v_ref: 0.0,
            curvature: [0.1, 0.2, -0.3],
        };
        assert!((p.curvature_at(-1.0) - 0.1).abs() < 1e-15);
        assert!((p.curvature_at(0.0) - 0.2).abs() < 1e-15);
        assert!((p.curvature_at(1.0) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn projection_respects_slip() {
        let def = OcpDefinition::default();
        let y = def.project_state([3.0, 0.0, 20.0, 0.3, 2.0]);
        assert_eq!(y[0], 2.0);
        assert_eq!(y[2], 18.0);
        assert_eq!(y[4], 1.0);
        assert!(y[2] * y[2] * y[3].abs() < def.limits.slip);
    }

    #[test]
    fn crossed_bounds_rejected() {
        let mut def = OcpDefinition::default();
        def.limits.speed_min = 20.0;
        assert!(def.constraints().is_err());
    }
}
