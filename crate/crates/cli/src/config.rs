use serde::{Deserialize, Serialize};
use splinempc::approx_nmpc::TrainConfig;
use splinempc::ocp::{ClosedLoopOptions, OcpDefinition, ScenarioRanges, SolverOptions};
use splinempc::symreg::GpConfig;
use splinempc::tree_monitor::ForestParams;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub count: usize,
    pub seed: u64,
    pub ranges: ScenarioRanges,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            count: 50,
            seed: 0,
            ranges: ScenarioRanges {
                duration_s: 25.0,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TranscriptionConfig {
    pub sections: usize,
    pub order: usize,
    pub regions: usize,
    pub substeps: usize,
}

impl Default for TranscriptionConfig {
    fn default() -> Self {
        Self {
            sections: 3,
            order: 4,
            regions: 4,
            substeps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxConfig {
    pub train: TrainConfig,
    /// Tolerance of the held-out violation check.
    pub eval_eps_tol: f64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            eval_eps_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    pub forest: ForestParams,
    pub outputs: Vec<String>,
    /// Worst-case output and quantile.
    pub worst_case_output: String,
    pub quantile: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            forest: ForestParams::default(),
            outputs: vec!["K1".into(), "K2_ms".into(), "K2_iters".into()],
            worst_case_output: "K2_ms".into(),
            quantile: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainConfig {
    pub background: usize,
    /// Explained rows drawn from the validation split.
    pub instances: usize,
    pub seed: u64,
    pub outputs: Vec<String>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            background: 1000,
            instances: 200,
            seed: 0,
            outputs: vec!["K1".into(), "K2_ms".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymregConfig {
    pub gp: GpConfig,
    pub target: String,
    /// Training rows offered to the search (seeded subsample).
    pub max_rows: usize,
}

impl Default for SymregConfig {
    fn default() -> Self {
        Self {
            gp: GpConfig::default(),
            target: "K1".into(),
            max_rows: 4000,
        }
    }
}

/// Complete resolved configuration of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seed of the train/validation/test split.
    pub split_seed: u64,
    pub scenarios: ScenarioConfig,
    pub ocp: OcpDefinition,
    pub transcription: TranscriptionConfig,
    pub solver: SolverOptions,
    pub approx: ApproxConfig,
    pub monitor: MonitorConfig,
    pub explain: ExplainConfig,
    pub symreg: SymregConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn closed_loop(&self) -> ClosedLoopOptions {
        let t = self.transcription;
        ClosedLoopOptions {
            transcription: (t.sections, t.order, t.regions),
            solver: self.solver,
            substeps: t.substeps,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_config_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let e = RunConfig::from_toml("[scenarios]\ncout = 3\n").unwrap_err();
        assert!(e.contains("cout"), "{e}");
        assert!(RunConfig::from_toml("[approx.train]\ngamma = 0.0\n").is_ok());
    }
}
