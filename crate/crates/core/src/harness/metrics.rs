//! Gait statistics out of episode logs.
//!
//! Two reductions matter downstream: per-condition means and deviations of
//! the base height and the per-foot landing heights (the summary table),
//! and the base height binned over the four-phase gait cycle (the phase
//! curve). Heights are reported in centimeters; landing heights are
//! relative to the squat-pose foot height, which the env already baked
//! into the records.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::env::{PhaseRecord, Scenario};
use crate::gait::TICKS_PER_PHASE;
use crate::robot::{FL, FR, NUM_LEGS, RL, RR};

/// 4 phases per cycle, one bin per control tick.
pub const PHASE_BINS: usize = 4 * TICKS_PER_PHASE;

/// Summary-table foot order: front-right, front-left, rear-right,
/// rear-left.
pub const TABLE_FOOT_ORDER: [(usize, &str); NUM_LEGS] =
    [(FR, "fr"), (FL, "fl"), (RR, "rr"), (RL, "rl")];

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no phase records to aggregate")]
    Empty,
    #[error("phase record {phase} has schedule slot {index}, expected 0..4")]
    BadPhaseIndex { phase: usize, index: usize },
}

/// Streaming mean and variance (Welford's update).
#[derive(Clone, Copy, Debug, Default)]
struct RunningStat {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStat {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn summary(&self) -> StatSummary {
        if self.n == 0 {
            StatSummary { n: 0, mean: 0.0, std: 0.0 }
        } else {
            StatSummary { n: self.n, mean: self.mean, std: (self.m2 / self.n as f64).sqrt() }
        }
    }
}

/// Count, mean, and population standard deviation of one sample set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StatSummary {
    pub n: u64,
    pub mean: f64,
    pub std: f64,
}

/// Mean base height per phase-cycle bin, in centimeters.
#[derive(Clone, Debug)]
pub struct PhaseCurve {
    pub mean_cm: Vec<f64>,
    pub count: Vec<u64>,
}

impl PhaseCurve {
    /// Left edge of a bin's phase-angle interval, in [0, 2π).
    pub fn angle(bin: usize) -> f64 {
        bin as f64 / PHASE_BINS as f64 * std::f64::consts::TAU
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("bin,phase_angle_rad,base_height_cm,samples\n");
        for b in 0..PHASE_BINS {
            let h = if self.count[b] == 0 { String::new() } else { self.mean_cm[b].to_string() };
            out.push_str(&format!("{},{},{},{}\n", b, Self::angle(b), h, self.count[b]));
        }
        out
    }
}

/// Averages per-tick base heights into the 720 cycle bins. The bin of
/// tick k of a phase in schedule slot i is i·180 + k, i.e. phase angle
/// (i + k/180)·π/2.
pub fn phase_binned_base_height<'a, I>(records: I) -> Result<PhaseCurve, MetricsError>
where
    I: IntoIterator<Item = &'a PhaseRecord>,
{
    let mut sum = vec![0.0f64; PHASE_BINS];
    let mut count = vec![0u64; PHASE_BINS];
    let mut any = false;
    for rec in records {
        if rec.phase_index >= 4 {
            return Err(MetricsError::BadPhaseIndex { phase: rec.phase, index: rec.phase_index });
        }
        for (k, &h) in rec.base_height_ticks.iter().take(TICKS_PER_PHASE).enumerate() {
            let bin = rec.phase_index * TICKS_PER_PHASE + k;
            sum[bin] += 100.0 * h;
            count[bin] += 1;
            any = true;
        }
    }
    if !any {
        return Err(MetricsError::Empty);
    }
    let mean_cm =
        sum.iter().zip(&count).map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 }).collect();
    Ok(PhaseCurve { mean_cm, count })
}

/// Statistics of one terrain-stiffness condition.
#[derive(Clone, Debug)]
pub struct ConditionStats {
    pub label: String,
    /// Phases assigned to this condition.
    pub phases: u64,
    /// Scalar base height over every control tick (cm).
    pub hb: StatSummary,
    /// Commanded swing-endpoint landing height per foot (cm).
    pub target: [StatSummary; NUM_LEGS],
    /// Realized touchdown height per foot (cm).
    pub contact: [StatSummary; NUM_LEGS],
}

#[derive(Clone, Copy, Debug, Default)]
struct ConditionCell {
    phases: u64,
    hb: RunningStat,
    target: [RunningStat; NUM_LEGS],
    contact: [RunningStat; NUM_LEGS],
}

impl ConditionCell {
    fn absorb(&mut self, rec: &PhaseRecord) {
        self.phases += 1;
        for &h in &rec.base_height_ticks {
            self.hb.push(100.0 * h);
        }
        self.target[rec.swing_leg].push(100.0 * rec.target_landing_height);
        if let Some(landing) = &rec.landing {
            self.contact[rec.swing_leg].push(100.0 * landing.contact_height);
        }
    }

    fn finish(&self, label: String) -> ConditionStats {
        ConditionStats {
            label,
            phases: self.phases,
            hb: self.hb.summary(),
            target: std::array::from_fn(|leg| self.target[leg].summary()),
            contact: std::array::from_fn(|leg| self.contact[leg].summary()),
        }
    }
}

/// Depth keyed in tenths of millimeters so conditions sort and compare
/// exactly.
fn depth_key(depth_m: f64) -> u64 {
    (depth_m * 1e4).round() as u64
}

fn depth_label(depth_m: f64) -> String {
    let cm = depth_m * 100.0;
    if (cm - cm.round()).abs() < 1e-9 {
        format!("{}", cm.round() as i64)
    } else {
        format!("{cm}")
    }
}

/// Per-condition summary of an evaluation run plus the cycle curve.
///
/// Terrain scenarios with varying stiffness get an aggregate condition
/// (labelled `<scenario>^ave`) and one condition per sinking depth
/// encountered, assigned by the stripe under the swing foot's touchdown.
/// Constant and rigid scenarios are a single condition. Phases whose
/// swing foot never touched down count toward the aggregate only.
#[derive(Clone, Debug)]
pub struct GaitStats {
    pub scenario: Scenario,
    pub conditions: Vec<ConditionStats>,
    pub curve: PhaseCurve,
}

impl GaitStats {
    pub fn from_records<'a, I>(scenario: Scenario, records: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = &'a PhaseRecord> + Clone,
    {
        let curve = phase_binned_base_height(records.clone())?;
        let varied = matches!(scenario, Scenario::TV2 | Scenario::TV8);

        let mut ave = ConditionCell::default();
        let mut split: BTreeMap<u64, ConditionCell> = BTreeMap::new();
        for rec in records {
            ave.absorb(rec);
            if !varied {
                continue;
            }
            if let Some(depth) = rec.landing.as_ref().and_then(|l| l.stripe.depth()) {
                split.entry(depth_key(depth)).or_default().absorb(rec);
            }
        }

        let mut conditions = Vec::with_capacity(1 + split.len());
        if varied {
            conditions.push(ave.finish(format!("{}^ave", scenario.name())));
            for (key, cell) in &split {
                let label = format!("{}^{}", scenario.name(), depth_label(*key as f64 / 1e4));
                conditions.push(cell.finish(label));
            }
        } else {
            conditions.push(ave.finish(scenario.name().to_string()));
        }
        Ok(Self { scenario, conditions, curve })
    }

    /// Summary table, metric rows by condition columns: deviation and mean
    /// of the base height, then per-foot target landing heights, then the
    /// realized-contact variants and sample counts.
    pub fn table_csv(&self) -> String {
        let fmt = |v: f64| format!("{v:.3}");
        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        let col = |f: &dyn Fn(&ConditionStats) -> String| -> Vec<String> {
            self.conditions.iter().map(f).collect()
        };

        rows.push(("phases".into(), col(&|c| c.phases.to_string())));
        rows.push(("ticks".into(), col(&|c| c.hb.n.to_string())));
        rows.push(("sigma_hb_cm".into(), col(&|c| fmt(c.hb.std))));
        rows.push(("mu_hb_cm".into(), col(&|c| fmt(c.hb.mean))));
        for (leg, name) in TABLE_FOOT_ORDER {
            rows.push((format!("mu_{name}_cm"), col(&|c| fmt(c.target[leg].mean))));
        }
        for (leg, name) in TABLE_FOOT_ORDER {
            rows.push((format!("sigma_{name}_cm"), col(&|c| fmt(c.target[leg].std))));
        }
        for (leg, name) in TABLE_FOOT_ORDER {
            rows.push((format!("n_{name}"), col(&|c| c.target[leg].n.to_string())));
        }
        for (leg, name) in TABLE_FOOT_ORDER {
            rows.push((
                format!("mu_{name}_contact_cm"),
                col(&|c| if c.contact[leg].n == 0 { String::new() } else { fmt(c.contact[leg].mean) }),
            ));
        }
        for (leg, name) in TABLE_FOOT_ORDER {
            rows.push((
                format!("sigma_{name}_contact_cm"),
                col(&|c| if c.contact[leg].n == 0 { String::new() } else { fmt(c.contact[leg].std) }),
            ));
        }
        for (leg, name) in TABLE_FOOT_ORDER {
            rows.push((format!("n_{name}_contact"), col(&|c| c.contact[leg].n.to_string())));
        }

        let mut out = String::from("metric");
        for c in &self.conditions {
            out.push(',');
            out.push_str(&c.label);
        }
        out.push('\n');
        for (name, cells) in rows {
            out.push_str(&name);
            for cell in cells {
                out.push(',');
                out.push_str(&cell);
            }
            out.push('\n');
        }
        out
    }
}
