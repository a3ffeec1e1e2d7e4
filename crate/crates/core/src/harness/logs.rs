//! Episode logs and the training CSV.
//!
//! An episode log is JSON-lines: a header line describing the episode
//! followed by one `PhaseRecord` per executed phase. The header repeats
//! summary fields (phases, distance, termination) so tools can triage a
//! directory of logs without parsing every record.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{PhaseRecord, Scenario, TerminationReason};
use crate::learn::UpdateLog;
use crate::terrain::Stripe;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("cannot access episode log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("episode log {path} is empty")]
    Empty { path: PathBuf },
    #[error("episode log {path} line 1: bad header: {source}")]
    Header {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    /// A record line that does not parse: either corruption or a write
    /// interrupted mid-line. Everything up to `last_valid` is intact.
    #[error("episode log {path} line {line}: {source} (last valid line: {last_valid})")]
    Record {
        path: PathBuf,
        line: usize,
        last_valid: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// First line of an episode log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub version: u32,
    pub scenario: Scenario,
    /// Index of the episode within its run.
    pub episode: usize,
    pub seed: u64,
    /// Stripe layout drawn for this episode.
    pub stripes: Vec<Stripe>,
    pub spawn: [f64; 3],
    pub phases: usize,
    pub distance_walked: f64,
    pub termination: Option<TerminationReason>,
}

#[derive(Clone, Debug)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub records: Vec<PhaseRecord>,
}

pub fn write_episode_log(
    path: &Path,
    header: &EpisodeHeader,
    records: &[PhaseRecord],
) -> Result<(), LogError> {
    let io_err = |source| LogError::Io { path: path.to_path_buf(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let mut put = |line: String| -> Result<(), LogError> {
        w.write_all(line.as_bytes()).map_err(io_err)?;
        w.write_all(b"\n").map_err(io_err)
    };
    put(serde_json::to_string(header).expect("header serializes"))?;
    for rec in records {
        put(serde_json::to_string(rec).expect("record serializes"))?;
    }
    w.flush().map_err(io_err)
}

pub fn read_episode_log(path: &Path) -> Result<EpisodeLog, LogError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| LogError::Io { path: path.to_path_buf(), source })?;
    let mut lines = text.lines().enumerate();

    let Some((_, first)) = lines.next() else {
        return Err(LogError::Empty { path: path.to_path_buf() });
    };
    let header: EpisodeHeader = serde_json::from_str(first)
        .map_err(|source| LogError::Header { path: path.to_path_buf(), source })?;

    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let rec: PhaseRecord = serde_json::from_str(line).map_err(|source| LogError::Record {
            path: path.to_path_buf(),
            line: idx + 1,
            last_valid: idx,
            source,
        })?;
        records.push(rec);
    }
    Ok(EpisodeLog { header, records })
}

/// Columns of the per-update training CSV. Wall-clock time is deliberately
/// absent so reruns of the same seed produce identical files.
pub fn training_csv_header() -> &'static str {
    "update,scenario,mean_step_reward,episodes,mean_episode_return,mean_episode_len,\
     terminations,truncations,policy_loss,value_loss,entropy,approx_kl,clip_fraction,log_std_mean"
}

pub fn training_csv_row(log: &UpdateLog) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        log.update,
        log.scenario.name(),
        log.rollout.mean_step_reward,
        log.rollout.episodes,
        log.rollout.mean_episode_return,
        log.rollout.mean_episode_len,
        log.rollout.terminations,
        log.rollout.truncations,
        log.ppo.policy_loss,
        log.ppo.value_loss,
        log.ppo.entropy,
        log.ppo.approx_kl,
        log.ppo.clip_fraction,
        log.log_std_mean
    )
}
