//! One TOML file for a whole run.
//!
//! Every default equals the built-in constants, so the empty file (or no
//! file at all) is the baseline configuration and a config only states
//! deviations. Unknown keys anywhere are rejected, and a parse failure
//! reports the offending line before any output is created.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EpisodeConfig;
use crate::gait::ActionBounds;
use crate::learn::{PpoConfig, TrainConfig};
use crate::robot::RobotModel;
use crate::sim::SimConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// The TOML error display carries line and column.
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
}

/// Artifact knobs that tune what a run writes, not what it computes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Deterministic evaluation episodes rolled after training and by the
    /// `eval` subcommand.
    pub eval_episodes: usize,
    /// Write an intermediate checkpoint every this many updates (0 keeps
    /// only the final one).
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { eval_episodes: 20, checkpoint_every: 0 }
    }
}

/// Root of the run configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// 0 silences progress output, 1 prints per-update lines.
    pub verbosity: u8,
    pub robot: RobotModel,
    pub sim: SimConfig,
    pub episode: EpisodeConfig,
    pub bounds: ActionBounds,
    pub ppo: PpoConfig,
    pub train: TrainConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            verbosity: 1,
            robot: RobotModel::default(),
            sim: SimConfig::default(),
            episode: EpisodeConfig::default(),
            bounds: ActionBounds::default(),
            ppo: PpoConfig::default(),
            train: TrainConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(path: &Path, text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(e) })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }
}

/// Loads the file, or the all-defaults config when no path is given.
pub fn load_run_config(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
    RunConfig::from_toml(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Scenario;

    #[test]
    fn empty_file_is_the_baseline() {
        let cfg = RunConfig::from_toml(Path::new("x.toml"), "").unwrap();
        let base = RunConfig::default();
        assert_eq!(cfg.to_toml(), base.to_toml());
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.ppo.gamma, 0.95);
        assert_eq!(cfg.train.horizon, 4096);
        assert_eq!(cfg.episode.max_phases, 400);
        assert_eq!(cfg.robot.base_mass, 18.0);
    }

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = RunConfig::default();
        cfg.seed = 7;
        cfg.episode.scenario = Scenario::TV2;
        cfg.train.curriculum =
            Some(crate::learn::Curriculum { second: Scenario::TC5, switch_at: 11 });
        cfg.ppo.adam.lr = 3e-4;
        let once = cfg.to_toml();
        let reparsed = RunConfig::from_toml(Path::new("x.toml"), &once).unwrap();
        assert_eq!(reparsed.to_toml(), once);
    }

    #[test]
    fn section_overrides_apply() {
        let text = "seed = 3\n[sim]\nkp = 350.0\n[episode]\nscenario = \"t_v8\"\nmax_phases = 10\n";
        let cfg = RunConfig::from_toml(Path::new("x.toml"), text).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.sim.kp, 350.0);
        assert_eq!(cfg.sim.kd, 8.0);
        assert_eq!(cfg.episode.scenario, Scenario::TV8);
        assert_eq!(cfg.episode.max_phases, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml(Path::new("x.toml"), "what = 1\n").unwrap_err();
        assert!(err.to_string().contains("line"), "no location in: {err}");

        let err = RunConfig::from_toml(Path::new("x.toml"), "[sim]\nkpp = 350.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kpp"), "unknown key not named: {msg}");
    }

    #[test]
    fn malformed_toml_reports_the_line() {
        let err =
            RunConfig::from_toml(Path::new("x.toml"), "seed = 1\n[sim\nkp = 1.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "wrong location in: {msg}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_run_config(Some(Path::new("/nonexistent/x.toml"))).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
        assert!(load_run_config(None).is_ok());
    }
}
