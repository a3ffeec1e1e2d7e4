//! The `tilewalk` command line.
//!
//! Five subcommands: `train` runs PPO and writes checkpoints plus logs,
//! `eval` rolls a checkpoint out deterministically and emits gait
//! statistics, `replay` re-derives per-tick traces from an episode log,
//! `calibrate` measures standing sink on uniform terrain, and `plot`
//! renders logs as SVG charts. Configuration errors exit with code 2
//! before anything is written; runtime failures exit with code 1.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::env::{Env, EpisodeConfig, Scenario, OBS_DIM};
use crate::gait::{ACTION_DIM, TICKS_PER_PHASE};
use crate::harness::calibrate::standing_sink;
use crate::harness::config::{load_run_config, ConfigError, RunConfig};
use crate::harness::logs::{
    read_episode_log, training_csv_header, training_csv_row, write_episode_log, EpisodeHeader,
    EpisodeLog, LogError, LOG_VERSION,
};
use crate::harness::metrics::{phase_binned_base_height, GaitStats, MetricsError, PhaseCurve};
use crate::harness::plot::{line_chart_svg, Series};
use crate::learn::{
    evaluate_episode, load_checkpoint, save_checkpoint, train, CheckpointError, Curriculum,
    EvalEpisode, LearnError, ObsNorm, PolicyValue, TrainSetup,
};
use crate::terrain::StripeKind;

/// How far an evaluation episode must get to count as a successful walk.
pub const WALK_TARGET_M: f64 = 4.0;

#[derive(Parser, Debug)]
#[command(
    name = "tilewalk",
    version,
    about = "Quadruped locomotion on elastic tiled terrain: train, evaluate, and inspect gait policies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a policy and write checkpoints, a training CSV, and episode logs.
    Train(TrainArgs),
    /// Roll out a checkpoint deterministically and emit gait statistics.
    Eval(EvalArgs),
    /// Re-derive per-tick traces and rewards from an episode log.
    Replay(ReplayArgs),
    /// Measure standing sink on uniform terrain against its target depth.
    Calibrate(CalibrateArgs),
    /// Render episode logs or a training CSV as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// TOML run configuration; every field has a built-in default.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Terrain scenario to train on.
    #[arg(long, conflicts_with = "curriculum")]
    pub scenario: Option<Scenario>,
    /// Two-stage curriculum "FIRST:SECOND", e.g. t_v2:t_c5; the switch
    /// happens after three quarters of the updates.
    #[arg(long, value_name = "A:B")]
    pub curriculum: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint file written by `train`.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Terrain scenario to evaluate on.
    #[arg(long)]
    pub scenario: Option<Scenario>,
    /// Number of evaluation episodes.
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReplayPlot {
    /// Phase-binned base-height curve of the episode.
    BaseHeight,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Episode log (JSON-lines) written by `train` or `eval`.
    #[arg(value_name = "LOG")]
    pub log: PathBuf,
    /// Output directory; defaults to the log's directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also render a chart of the episode.
    #[arg(long, value_name = "KIND")]
    pub plot: Option<ReplayPlot>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Target sinking depth in centimeters.
    #[arg(long, required_unless_present = "rigid", conflicts_with = "rigid")]
    pub depth: Option<f64>,
    /// Measure on rigid ground instead of sprung tiles.
    #[arg(long)]
    pub rigid: bool,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Episode logs to overlay as base-height curves (repeatable).
    #[arg(long = "log", value_name = "PATH")]
    pub logs: Vec<PathBuf>,
    /// Training CSV to chart as mean step reward per update.
    #[arg(long, value_name = "PATH", conflicts_with = "logs")]
    pub training_log: Option<PathBuf>,
    /// Output SVG file.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

/// A command failure with its exit code: 2 for configuration and usage
/// errors (raised before outputs exist), 1 for runtime errors.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    fn runtime(msg: impl Into<String>) -> Self {
        Self { code: 1, msg: msg.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<LogError> for Failure {
    fn from(e: LogError) -> Self {
        Failure::runtime(e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::runtime(e.to_string())
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        Failure::runtime(e.to_string())
    }
}

impl From<LearnError> for Failure {
    fn from(e: LearnError) -> Self {
        Failure::runtime(format!("training aborted: {e}"))
    }
}

fn io_fail(what: &str, path: &Path, e: std::io::Error) -> Failure {
    Failure::runtime(format!("cannot {what} {}: {e}", path.display()))
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train(args) => cmd_train(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Replay(args) => cmd_replay(&args),
        Command::Calibrate(args) => cmd_calibrate(&args),
        Command::Plot(args) => cmd_plot(&args),
    }
}

/// Loads the config and applies the common overrides. Everything that can
/// reject a run happens here, before any directory or file is created.
fn resolve_config(common: &CommonArgs) -> Result<RunConfig, Failure> {
    let mut cfg = load_run_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn parse_curriculum(spec: &str, updates: usize) -> Result<(Scenario, Curriculum), Failure> {
    let (first, second) = spec
        .split_once(':')
        .ok_or_else(|| Failure::config(format!("invalid --curriculum '{spec}': expected A:B")))?;
    let first: Scenario =
        first.parse().map_err(|e| Failure::config(format!("invalid --curriculum: {e}")))?;
    let second: Scenario =
        second.parse().map_err(|e| Failure::config(format!("invalid --curriculum: {e}")))?;
    let switch_at = (3 * updates / 4).max(1);
    Ok((first, Curriculum { second, switch_at }))
}

fn cmd_train(args: &TrainArgs) -> Result<(), Failure> {
    let mut cfg = resolve_config(&args.common)?;
    if let Some(scenario) = args.scenario {
        cfg.episode.scenario = scenario;
    }
    if let Some(spec) = &args.curriculum {
        let (first, curriculum) = parse_curriculum(spec, cfg.train.updates)?;
        cfg.episode.scenario = first;
        cfg.train.curriculum = Some(curriculum);
    }

    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| io_fail("create output directory", &dir, e))?;
    let resolved = dir.join("config.toml");
    fs::write(&resolved, cfg.to_toml()).map_err(|e| io_fail("write", &resolved, e))?;

    let csv_path = dir.join("training_log.csv");
    let mut csv = fs::File::create(&csv_path).map_err(|e| io_fail("create", &csv_path, e))?;
    writeln!(csv, "{}", training_csv_header()).map_err(|e| io_fail("write", &csv_path, e))?;

    let setup = TrainSetup {
        robot: cfg.robot.clone(),
        sim: cfg.sim.clone(),
        bounds: cfg.bounds.clone(),
        episode: cfg.episode.clone(),
        ppo: cfg.ppo,
        train: cfg.train,
        seed: cfg.seed,
    };

    let every = cfg.output.checkpoint_every;
    let verbosity = cfg.verbosity;
    let mut callback_error: Option<Failure> = None;
    let outcome = train(&setup, |log, pv, norm| {
        let mut step = || -> Result<(), Failure> {
            writeln!(csv, "{}", training_csv_row(log)).map_err(|e| io_fail("write", &csv_path, e))?;
            csv.flush().map_err(|e| io_fail("write", &csv_path, e))?;
            if every > 0 && log.update % every == 0 {
                let path = dir.join(format!("checkpoint-{:05}.txt", log.update));
                save_checkpoint(&path, pv, norm)?;
            }
            Ok(())
        };
        if let Err(f) = step() {
            callback_error = Some(f);
            return false;
        }
        if verbosity >= 1 {
            println!(
                "update {:>5} [{}] step reward {:>9.4}  episodes {:>4}  return {:>9.3}  \
                 kl {:.5}  clip {:.3}  ({:.1}s)",
                log.update,
                log.scenario.name(),
                log.rollout.mean_step_reward,
                log.rollout.episodes,
                log.rollout.mean_episode_return,
                log.ppo.approx_kl,
                log.ppo.clip_fraction,
                log.wall_s
            );
        }
        true
    })?;
    drop(csv);
    if let Some(f) = callback_error {
        return Err(f);
    }

    let final_path = dir.join("checkpoint.txt");
    save_checkpoint(&final_path, &outcome.pv, outcome.obs_norm.as_ref())?;
    if verbosity >= 1 {
        println!("checkpoint written to {}", final_path.display());
    }

    if cfg.output.eval_episodes > 0 {
        let scenario = cfg.train.curriculum.map(|c| c.second).unwrap_or(cfg.episode.scenario);
        let summary =
            run_eval_suite(&cfg, &outcome.pv, outcome.obs_norm.as_ref(), scenario, &dir)?;
        println!("{summary}");
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let mut cfg = resolve_config(&args.common)?;
    if let Some(scenario) = args.scenario {
        cfg.episode.scenario = scenario;
    }
    if let Some(n) = args.episodes {
        cfg.output.eval_episodes = n;
    }

    let ck = load_checkpoint(&args.checkpoint)?;
    if ck.pv.obs_dim() != OBS_DIM || ck.pv.act_dim() != ACTION_DIM {
        return Err(Failure::runtime(format!(
            "checkpoint network shape mismatch: policy maps {} -> {}, this build expects {} -> {}",
            ck.pv.obs_dim(),
            ck.pv.act_dim(),
            OBS_DIM,
            ACTION_DIM
        )));
    }

    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| io_fail("create output directory", &dir, e))?;
    let summary =
        run_eval_suite(&cfg, &ck.pv, ck.obs_norm.as_ref(), cfg.episode.scenario, &dir)?;
    println!("{summary}");
    Ok(())
}

/// Rolls the deterministic policy for the configured number of episodes,
/// writing one episode log each plus `stats.csv`, `curve.csv`, and the
/// base-height chart. Returns a one-line summary.
fn run_eval_suite(
    cfg: &RunConfig,
    pv: &PolicyValue,
    obs_norm: Option<&ObsNorm>,
    scenario: Scenario,
    dir: &Path,
) -> Result<String, Failure> {
    let n = cfg.output.eval_episodes;
    let episode_cfg = EpisodeConfig { scenario, ..cfg.episode.clone() };
    let mut env = Env::new(
        cfg.robot.clone(),
        cfg.sim.clone(),
        cfg.bounds.clone(),
        episode_cfg,
        cfg.seed,
    );

    let mut episodes: Vec<EvalEpisode> = Vec::with_capacity(n);
    for i in 0..n {
        let ep = evaluate_episode(&mut env, pv, obs_norm, true);
        let header = EpisodeHeader {
            version: LOG_VERSION,
            scenario,
            episode: i,
            seed: cfg.seed,
            stripes: env.grid().layout().stripes.clone(),
            spawn: ep.spawn,
            phases: ep.phases,
            distance_walked: ep.distance_walked,
            termination: ep.records.last().and_then(|r| r.termination),
        };
        let path = dir.join(format!("episode_{i:03}.jsonl"));
        write_episode_log(&path, &header, &ep.records)?;
        episodes.push(ep);
    }

    let stats = GaitStats::from_records(scenario, episodes.iter().flat_map(|e| e.records.iter()))?;
    let stats_path = dir.join("stats.csv");
    fs::write(&stats_path, stats.table_csv()).map_err(|e| io_fail("write", &stats_path, e))?;
    let curve_path = dir.join("curve.csv");
    fs::write(&curve_path, stats.curve.csv()).map_err(|e| io_fail("write", &curve_path, e))?;
    let svg_path = dir.join("base_height.svg");
    let svg = line_chart_svg(
        &format!("base height over the gait cycle [{}]", scenario.name()),
        "phase angle (rad)",
        "base height (cm)",
        &[curve_series(&stats.curve, scenario.name())],
    );
    fs::write(&svg_path, svg).map_err(|e| io_fail("write", &svg_path, e))?;

    let walked = episodes.iter().filter(|e| e.distance_walked >= WALK_TARGET_M).count();
    let terminated = episodes.iter().filter(|e| e.terminated).count();
    let mean_distance = episodes.iter().map(|e| e.distance_walked).sum::<f64>() / n.max(1) as f64;
    let mean_phases = episodes.iter().map(|e| e.phases).sum::<usize>() as f64 / n.max(1) as f64;
    Ok(format!(
        "eval [{}] {n} episodes: mean distance {mean_distance:.2} m, walked >= {WALK_TARGET_M} m \
         in {walked}/{n}, terminated {terminated}, mean phases {mean_phases:.1}; stats in {}",
        scenario.name(),
        stats_path.display()
    ))
}

fn curve_series(curve: &PhaseCurve, label: &str) -> Series {
    let points = (0..curve.mean_cm.len())
        .filter(|&b| curve.count[b] > 0)
        .map(|b| (PhaseCurve::angle(b), curve.mean_cm[b]))
        .collect();
    Series { label: label.to_string(), points }
}

fn stripe_name(kind: StripeKind) -> String {
    match kind {
        StripeKind::Rigid => "rigid".to_string(),
        StripeKind::Depth(d) => format!("{}cm", d * 100.0),
    }
}

fn termination_name(t: crate::env::TerminationReason) -> String {
    serde_json::to_string(&t).expect("termination serializes").trim_matches('"').to_string()
}

fn cmd_replay(args: &ReplayArgs) -> Result<(), Failure> {
    let log = read_episode_log(&args.log)?;
    let stem = args
        .log
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "episode".to_string());
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args.log.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&dir).map_err(|e| io_fail("create output directory", &dir, e))?;

    let trace_path = dir.join(format!("{stem}_trace.csv"));
    let mut trace = String::from("phase,phase_index,swing_leg,tick,phase_angle_rad,base_height_m\n");
    for rec in &log.records {
        for (k, h) in rec.base_height_ticks.iter().enumerate() {
            let angle =
                (rec.phase_index as f64 + k as f64 / TICKS_PER_PHASE as f64) * std::f64::consts::FRAC_PI_2;
            trace.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rec.phase,
                rec.phase_index,
                rec.swing_leg,
                k + 1,
                angle,
                h
            ));
        }
    }
    fs::write(&trace_path, trace).map_err(|e| io_fail("write", &trace_path, e))?;

    let rewards_path = dir.join(format!("{stem}_rewards.csv"));
    let mut rewards = String::from(
        "phase,phase_index,swing_leg,r_d,r_o,r_s,r_t,r_r,total,goal_distance,goal_reissued,\
         target_landing_height_m,landing_tick,landing_height_m,landing_stripe,termination\n",
    );
    for rec in &log.records {
        let (l_tick, l_height, l_stripe) = match &rec.landing {
            Some(l) => (l.tick.to_string(), l.contact_height.to_string(), stripe_name(l.stripe)),
            None => (String::new(), String::new(), String::new()),
        };
        rewards.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            rec.phase,
            rec.phase_index,
            rec.swing_leg,
            rec.reward.r_d,
            rec.reward.r_o,
            rec.reward.r_s,
            rec.reward.r_t,
            rec.reward.r_r,
            rec.reward.total,
            rec.goal_distance,
            rec.goal_reissued,
            rec.target_landing_height,
            l_tick,
            l_height,
            l_stripe,
            rec.termination.map(termination_name).unwrap_or_default()
        ));
    }
    fs::write(&rewards_path, rewards).map_err(|e| io_fail("write", &rewards_path, e))?;

    if args.plot == Some(ReplayPlot::BaseHeight) {
        let curve = phase_binned_base_height(&log.records)?;
        let svg_path = dir.join(format!("{stem}_base_height.svg"));
        let svg = line_chart_svg(
            &format!("base height over the gait cycle [{stem}]"),
            "phase angle (rad)",
            "base height (cm)",
            &[curve_series(&curve, &stem)],
        );
        fs::write(&svg_path, svg).map_err(|e| io_fail("write", &svg_path, e))?;
    }

    let total: f64 = log.records.iter().map(|r| r.reward.total).sum();
    println!(
        "replayed {} phases [{}]: total reward {total}, distance {:.2} m, termination {}; \
         trace in {}",
        log.records.len(),
        log.header.scenario.name(),
        log.header.distance_walked,
        log.header.termination.map(termination_name).unwrap_or_else(|| "none".to_string()),
        trace_path.display()
    );
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let kind = if args.rigid {
        StripeKind::Rigid
    } else {
        let cm = args.depth.expect("clap requires --depth unless --rigid");
        if !(cm > 0.0) || !cm.is_finite() {
            return Err(Failure::config(format!(
                "--depth must be a positive number of centimeters, got {cm}"
            )));
        }
        StripeKind::Depth(cm / 100.0)
    };

    let report = standing_sink(&cfg.robot, &cfg.sim, kind, 3.0, 1.0)
        .map_err(|e| Failure::runtime(format!("calibration sim diverged: {e}")))?;
    match report.stiffness {
        Some(k) => {
            println!(
                "terrain: {:.1} cm target sinking depth, tile stiffness {k} N/m",
                100.0 * report.target_sink
            );
            println!(
                "standing sink over the last 1.0 s of {:.1} s: {:.4} cm (relative error {:.1}%)",
                report.sim_seconds,
                100.0 * report.measured_sink,
                100.0 * report.relative_error
            );
            println!("within 10% tolerance: {}", if report.within(0.10) { "yes" } else { "no" });
        }
        None => {
            println!("terrain: rigid ground");
            println!(
                "standing sink over the last 1.0 s of {:.1} s: {:.4} cm",
                report.sim_seconds,
                100.0 * report.measured_sink
            );
        }
    }
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Result<(), Failure> {
    let (series, title, x_label, y_label) = if let Some(csv_path) = &args.training_log {
        let text =
            fs::read_to_string(csv_path).map_err(|e| io_fail("read", csv_path, e))?;
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() < 3 {
                return Err(Failure::runtime(format!(
                    "training CSV {} line {}: expected at least 3 columns",
                    csv_path.display(),
                    idx + 1
                )));
            }
            let update: f64 = cells[0].parse().map_err(|e| {
                Failure::runtime(format!(
                    "training CSV {} line {}: bad update index: {e}",
                    csv_path.display(),
                    idx + 1
                ))
            })?;
            let reward: f64 = cells[2].parse().map_err(|e| {
                Failure::runtime(format!(
                    "training CSV {} line {}: bad mean step reward: {e}",
                    csv_path.display(),
                    idx + 1
                ))
            })?;
            points.push((update, reward));
        }
        let series = vec![Series { label: "mean step reward".to_string(), points }];
        (series, "training progress".to_string(), "update", "mean step reward")
    } else if !args.logs.is_empty() {
        let mut series = Vec::new();
        for path in &args.logs {
            let log: EpisodeLog = read_episode_log(path)?;
            let curve = phase_binned_base_height(&log.records)?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "episode".to_string());
            series.push(curve_series(&curve, &stem));
        }
        (series, "base height over the gait cycle".to_string(), "phase angle (rad)", "base height (cm)")
    } else {
        return Err(Failure::config("nothing to plot: pass --log and/or --training-log"));
    };

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_fail("create output directory", parent, e))?;
        }
    }
    let svg = line_chart_svg(&title, x_label, y_label, &series);
    fs::write(&args.out, svg).map_err(|e| io_fail("write", &args.out, e))?;
    println!("chart written to {}", args.out.display());
    Ok(())
}
