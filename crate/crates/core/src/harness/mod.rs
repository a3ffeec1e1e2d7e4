//! Run configuration, episode logs, gait statistics, plots, and the CLI.
//!
//! Everything the `tilewalk` binary does lives here so it stays testable
//! as a library: `config` aggregates every tunable into one TOML file,
//! `logs` reads and writes JSON-lines episode logs and the training CSV,
//! `metrics` turns logs into per-condition gait statistics and the
//! phase-binned base-height curve, `plot` renders SVG line charts,
//! `calibrate` measures standing sink on sprung terrain, and `cli`
//! dispatches the subcommands.

pub mod calibrate;
pub mod cli;
pub mod config;
pub mod logs;
pub mod metrics;
pub mod plot;

pub use calibrate::{standing_sink, SinkReport};
pub use config::{load_run_config, ConfigError, OutputConfig, RunConfig};
pub use logs::{
    read_episode_log, training_csv_header, training_csv_row, write_episode_log, EpisodeHeader,
    EpisodeLog, LogError,
};
pub use metrics::{
    phase_binned_base_height, ConditionStats, GaitStats, MetricsError, PhaseCurve, StatSummary,
    PHASE_BINS,
};
pub use plot::{line_chart_svg, Series};
