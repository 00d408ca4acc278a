use std::path::{Path, PathBuf};

use lossjump::experiment::{MetricsConfig, TestGrid, TrainPhase, TrainSchedule};
use lossjump::network::{Activation, MlpSpec};
use lossjump::pde::{BurgersInitial, Problem, ProblemKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable that roots relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "LOSSJUMP_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    #[serde(default)]
    pub burgers_initial: BurgersInitial,
}

fn tanh() -> Activation {
    Activation::Tanh
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_layers: Vec<usize>,
    #[serde(default = "tanh")]
    pub activation: Activation,
}

fn thousand() -> usize {
    1000
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    /// Relative paths are taken under `$LOSSJUMP_OUTPUT_ROOT` when set.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "thousand")]
    pub checkpoint_every: usize,
    #[serde(default = "yes")]
    pub reset_optimizer: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            checkpoint_every: 1000,
            reset_optimizer: true,
        }
    }
}

/// A training run as written in a `.cfg` (TOML) file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub network: NetworkConfig,
    #[serde(default)]
    pub run: RunSection,
    pub test_grid: TestGrid,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(rename = "phase")]
    pub phases: Vec<TrainPhase>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", origin.display())))?;
        cfg.schedule()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the effective config stored in a `manifest.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if path.extension().is_some_and(|e| e == "json") {
            let m = lossjump::experiment::Manifest::load(path).map_err(CliError::from_core)?;
            let cfg: RunConfig = serde_json::from_value(m.config)
                .map_err(|e| CliError::Config(format!("{}: config: {e}", path.display())))?;
            cfg.schedule()?;
            return Ok(cfg);
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn schedule(&self) -> Result<TrainSchedule, CliError> {
        let problem = Problem::new(self.problem.kind).with_burgers_initial(self.problem.burgers_initial);
        let s = TrainSchedule {
            network: MlpSpec::new(
                problem.input_dim(),
                self.network.hidden_layers.clone(),
                self.network.activation,
            ),
            problem,
            seed: self.run.seed,
            phases: self.phases.clone(),
            test_grid: self.test_grid,
            metrics: self.metrics.clone(),
            reset_optimizer: self.run.reset_optimizer,
            checkpoint_every: self.run.checkpoint_every,
        };
        s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(s)
    }

    /// The directory the run writes to.
    pub fn output_dir(&self, origin: &Path, root: Option<&Path>) -> PathBuf {
        let dir = self.run.output_dir.clone().unwrap_or_else(|| {
            let stem = origin.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            PathBuf::from("runs").join(stem)
        });
        resolve(&dir, root)
    }
}

pub fn resolve(dir: &Path, root: Option<&Path>) -> PathBuf {
    match root {
        Some(r) if dir.is_relative() => r.join(dir),
        _ => dir.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUNDLED: &str = include_str!("../configs/poisson_switch.cfg");

    #[test]
    fn bundled_config_parses() {
        let c = RunConfig::parse(BUNDLED, Path::new("poisson_switch.cfg")).unwrap();
        let s = c.schedule().unwrap();
        assert_eq!(s.phases.len(), 2);
        assert_eq!(s.network.input_dim, 1);
        assert_eq!(s.phase_starts(), vec![0, 20000]);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = BUNDLED.replace("lambda_g", "lambda_q");
        match RunConfig::parse(&text, Path::new("x.cfg")) {
            Err(CliError::Config(msg)) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn effective_config_round_trips_through_json() {
        let c = RunConfig::parse(BUNDLED, Path::new("p.cfg")).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(serde_json::from_value::<RunConfig>(v).unwrap(), c);
    }

    #[test]
    fn output_root() {
        let c = RunConfig::parse(BUNDLED, Path::new("p.cfg")).unwrap();
        let d = c.output_dir(Path::new("p.cfg"), Some(Path::new("/tmp/root")));
        assert!(d.starts_with("/tmp/root"));
    }
}
