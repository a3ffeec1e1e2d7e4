//! Standing-sink measurement on uniform terrain.
//!
//! The tile stiffness is parameterized so the robot's weight, split over
//! four feet, statically depresses a tile by the target sinking depth.
//! This module closes the loop: it simulates the robot holding its squat
//! pose on a uniform grid and reports the measured mean sink of the four
//! loaded tiles against the target.

use crate::robot::RobotModel;
use crate::sim::{step_control_tick, MultibodyModel, SimConfig, SimError, SimState};
use crate::terrain::{calibrate_stiffness, StripeKind, TerrainLayout, TileGrid};

/// Nominal calibration constants baked into the tile prototypes.
const CALIBRATION_MASS: f64 = 25.0;
const CALIBRATION_GRAVITY: f64 = 9.81;

#[derive(Clone, Copy, Debug)]
pub struct SinkReport {
    pub kind: StripeKind,
    /// Tile spring constant (N/m); `None` on rigid ground.
    pub stiffness: Option<f64>,
    /// Target sinking depth (m); 0 on rigid ground.
    pub target_sink: f64,
    /// Mean sink of the tiles under the four feet, averaged over the
    /// sampling window (m).
    pub measured_sink: f64,
    /// |measured − target| / target; for rigid ground simply the absolute
    /// measured sink.
    pub relative_error: f64,
    pub sim_seconds: f64,
}

impl SinkReport {
    pub fn within(&self, tolerance: f64) -> bool {
        self.relative_error <= tolerance
    }
}

/// Holds the squat pose on a uniform grid for `sim_seconds` and averages
/// the four-tile sink over the trailing `window` seconds.
pub fn standing_sink(
    robot: &RobotModel,
    cfg: &SimConfig,
    kind: StripeKind,
    sim_seconds: f64,
    window: f64,
) -> Result<SinkReport, SimError> {
    let model = MultibodyModel::new(robot.clone());
    let mut grid = TileGrid::new(TerrainLayout::constant(kind, 4.0), 4.0, 4.0);
    let mut state = SimState::squat(robot, 0.0, 0.0);
    let q_des = robot.squat_joint_vector();

    let ticks = (sim_seconds / cfg.control_dt).ceil() as usize;
    let window_ticks = ((window / cfg.control_dt).ceil() as usize).clamp(1, ticks);
    let mut sink_sum = 0.0;
    let mut samples = 0u64;
    for tick in 0..ticks {
        step_control_tick(&model, cfg, &mut state, &mut grid, &q_des)?;
        if tick + window_ticks >= ticks {
            let feet = state.foot_positions(robot);
            let mean_sink = feet
                .iter()
                .map(|f| -grid.height_at(f.x, f.y).height)
                .sum::<f64>()
                / feet.len() as f64;
            sink_sum += mean_sink;
            samples += 1;
        }
    }

    let measured_sink = sink_sum / samples as f64;
    let (stiffness, target_sink) = match kind {
        StripeKind::Rigid => (None, 0.0),
        StripeKind::Depth(d) => (
            Some(
                calibrate_stiffness(d, CALIBRATION_MASS, CALIBRATION_GRAVITY)
                    .expect("positive depth"),
            ),
            d,
        ),
    };
    let relative_error = if target_sink > 0.0 {
        (measured_sink - target_sink).abs() / target_sink
    } else {
        measured_sink.abs()
    };
    Ok(SinkReport {
        kind,
        stiffness,
        target_sink,
        measured_sink,
        relative_error,
        sim_seconds: ticks as f64 * cfg.control_dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_centimeter_terrain_sinks_five_centimeters() {
        let report = standing_sink(
            &RobotModel::default(),
            &SimConfig::default(),
            StripeKind::Depth(0.05),
            3.0,
            1.0,
        )
        .unwrap();
        assert_eq!(report.stiffness, Some(1226.25));
        assert!(
            report.within(0.10),
            "sink {:.4} m vs target {:.4} m ({:.1}% off)",
            report.measured_sink,
            report.target_sink,
            100.0 * report.relative_error
        );
    }

    #[test]
    fn rigid_ground_does_not_sink() {
        let report = standing_sink(
            &RobotModel::default(),
            &SimConfig::default(),
            StripeKind::Rigid,
            1.0,
            0.5,
        )
        .unwrap();
        assert_eq!(report.stiffness, None);
        assert_eq!(report.measured_sink, 0.0);
        assert_eq!(report.relative_error, 0.0);
    }
}
