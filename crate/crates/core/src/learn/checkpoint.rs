//! Versioned text checkpoints. Floats are written with Rust's shortest
//! round-trip formatting, so a save/load cycle is bit-exact.

use super::mlp::{Mlp, MlpSpec};
use super::policy::PolicyValue;
use super::rollout::ObsNorm;
use nalgebra::DVector;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

const MAGIC: &str = "tilewalk-checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

pub struct Checkpoint {
    pub pv: PolicyValue,
    pub obs_norm: Option<ObsNorm>,
}

pub fn save_checkpoint(
    path: &Path,
    pv: &PolicyValue,
    obs_norm: Option<&ObsNorm>,
) -> Result<(), CheckpointError> {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let sizes = |m: &Mlp| {
        m.spec.sizes().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
    };
    let _ = writeln!(s, "policy_sizes {}", sizes(&pv.policy));
    let _ = writeln!(s, "value_sizes {}", sizes(&pv.value));
    let dump = |s: &mut String, name: &str, v: &DVector<f64>| {
        let _ = writeln!(s, "{name} {}", v.len());
        for x in v.iter() {
            let _ = writeln!(s, "{x}");
        }
    };
    dump(&mut s, "log_std", &pv.log_std);
    dump(&mut s, "policy_theta", &pv.policy.theta);
    dump(&mut s, "value_theta", &pv.value.theta);
    match obs_norm {
        Some(n) => {
            let (mean, m2, count) = n.state();
            let _ = writeln!(s, "obs_norm 1");
            let _ = writeln!(s, "count {count}");
            dump(&mut s, "mean", mean);
            dump(&mut s, "m2", m2);
        }
        None => {
            let _ = writeln!(s, "obs_norm 0");
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

struct Cursor<'a> {
    lines: Vec<&'a str>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Result<&'a str, CheckpointError> {
        let line = self
            .lines
            .get(self.at)
            .ok_or_else(|| CheckpointError::Format("truncated checkpoint".to_string()))?;
        self.at += 1;
        Ok(line)
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str, CheckpointError> {
        let line = self.next()?;
        line.strip_prefix(key)
            .map(str::trim)
            .ok_or_else(|| CheckpointError::Format(format!("expected '{key}', got '{line}'")))
    }

    fn sizes(&mut self, key: &str) -> Result<Vec<usize>, CheckpointError> {
        self.keyed(key)?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| CheckpointError::Format(e.to_string())))
            .collect()
    }

    fn vector(&mut self, key: &str) -> Result<DVector<f64>, CheckpointError> {
        let n: usize = self
            .keyed(key)?
            .parse()
            .map_err(|e: std::num::ParseIntError| CheckpointError::Format(e.to_string()))?;
        let mut v = DVector::zeros(n);
        for i in 0..n {
            v[i] = self
                .next()?
                .parse()
                .map_err(|e: std::num::ParseFloatError| CheckpointError::Format(e.to_string()))?;
        }
        Ok(v)
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = std::fs::read_to_string(path)?;
    let mut cur = Cursor { lines: text.lines().collect(), at: 0 };
    let bad = |msg: &str| CheckpointError::Format(msg.to_string());

    if cur.next()? != MAGIC {
        return Err(bad("missing or unsupported header"));
    }

    let policy_sizes = cur.sizes("policy_sizes")?;
    let value_sizes = cur.sizes("value_sizes")?;
    let log_std = cur.vector("log_std")?;
    let policy_theta = cur.vector("policy_theta")?;
    let value_theta = cur.vector("value_theta")?;

    let policy_spec = MlpSpec::new(policy_sizes);
    let value_spec = MlpSpec::new(value_sizes);
    if policy_theta.len() != policy_spec.param_count() {
        return Err(bad("policy parameter count does not match its sizes"));
    }
    if value_theta.len() != value_spec.param_count() {
        return Err(bad("value parameter count does not match its sizes"));
    }
    if log_std.len() != policy_spec.output_dim() {
        return Err(bad("log_std length does not match the action dimension"));
    }

    let obs_norm = match cur.next()? {
        "obs_norm 0" => None,
        "obs_norm 1" => {
            let count: f64 = cur
                .keyed("count")?
                .parse()
                .map_err(|e: std::num::ParseFloatError| bad(&e.to_string()))?;
            let mean = cur.vector("mean")?;
            let m2 = cur.vector("m2")?;
            Some(ObsNorm::from_state(mean, m2, count))
        }
        other => return Err(CheckpointError::Format(format!("bad obs_norm line '{other}'"))),
    };

    Ok(Checkpoint {
        pv: PolicyValue {
            policy: Mlp { spec: policy_spec, theta: policy_theta },
            log_std,
            value: Mlp { spec: value_spec, theta: value_theta },
        },
        obs_norm,
    })
}
