//! Quadruped morphology, forward kinematics, and analytic per-leg IK.
//!
//! The robot is a 25 kg, 12-DoF quadruped: each leg has a 2-DoF shoulder
//! (abduction about the base x axis, hip pitch about the shoulder y axis)
//! and a 1-DoF knee, with both shoulder axes intersecting at the hip
//! attachment point. Legs are indexed FL = 0, FR = 1, RL = 2, RR = 3
//! everywhere in the crate.

use crate::geom::{Quat, Transform, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of legs.
pub const NUM_LEGS: usize = 4;
/// Number of actuated joints.
pub const NUM_JOINTS: usize = 12;

/// Leg indices in the fixed crate-wide order.
pub const FL: usize = 0;
pub const FR: usize = 1;
pub const RL: usize = 2;
pub const RR: usize = 3;

pub const LEG_NAMES: [&str; NUM_LEGS] = ["fl", "fr", "rl", "rr"];

#[derive(Debug, Error, PartialEq)]
pub enum RobotError {
    #[error("leg {leg}: target at distance {dist:.4} m outside reachable [{min:.4}, {max:.4}] m")]
    Unreachable { leg: usize, dist: f64, min: f64, max: f64 },
}

/// Joint angles of one leg.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LegJointAngles {
    /// Rotation about the base x axis (positive rolls the leg outward on
    /// the left side).
    pub abduction: f64,
    /// Rotation about the shoulder y axis (positive swings the leg back).
    pub hip_pitch: f64,
    /// Knee flexion; 0 is a straight leg, positive folds the lower link
    /// backward.
    pub knee: f64,
}

impl LegJointAngles {
    pub fn new(abduction: f64, hip_pitch: f64, knee: f64) -> Self {
        Self { abduction, hip_pitch, knee }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.abduction, self.hip_pitch, self.knee]
    }
}

/// Morphology constants: dimensions, masses, joint limits.
///
/// All fields are overridable from the run config; the defaults describe
/// the 25 kg robot with a 55 cm base and 50 cm legs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotModel {
    /// Hip-to-hip distance along x (m).
    pub base_length: f64,
    /// Hip-to-hip distance along y (m).
    pub base_width: f64,
    /// Mass of the base link (kg).
    pub base_mass: f64,
    /// Mass of each upper leg link (kg).
    pub upper_mass: f64,
    /// Mass of each lower leg link, foot included (kg).
    pub lower_mass: f64,
    /// Upper link length, hip to knee (m).
    pub l_upper: f64,
    /// Lower link length, knee to foot center (m).
    pub l_lower: f64,
    /// Base box dimensions used for inertia and collision probes (m).
    pub base_size: [f64; 3],
    /// Foot collision sphere radius (m).
    pub foot_radius: f64,
    /// [lo, hi] limits for abduction, hip pitch, knee (rad).
    pub abduction_limits: [f64; 2],
    pub hip_pitch_limits: [f64; 2],
    pub knee_limits: [f64; 2],
    /// Per-joint torque limit (N·m).
    pub torque_limit: f64,
    /// Joint angles of the default squat pose, shared by all legs.
    pub squat_hip_pitch: f64,
    pub squat_knee: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        // cos(0.9273) = 0.6, so the squat folds each 0.25 m link to a
        // 0.30 m hip-to-foot drop with the foot directly under the hip.
        let squat_half = (0.6f64).acos();
        Self {
            base_length: 0.55,
            base_width: 0.20,
            base_mass: 18.0,
            upper_mass: 1.0,
            lower_mass: 0.75,
            l_upper: 0.25,
            l_lower: 0.25,
            base_size: [0.55, 0.25, 0.10],
            foot_radius: 0.02,
            abduction_limits: [-0.8, 0.8],
            hip_pitch_limits: [-1.5, 1.5],
            knee_limits: [0.0, 2.6],
            torque_limit: 40.0,
            squat_hip_pitch: -squat_half,
            squat_knee: 2.0 * squat_half,
        }
    }
}

impl RobotModel {
    /// Total robot mass (kg).
    pub fn total_mass(&self) -> f64 {
        self.base_mass + NUM_LEGS as f64 * (self.upper_mass + self.lower_mass)
    }

    /// Hip attachment point of a leg in the base frame.
    pub fn hip_offset(&self, leg: usize) -> Vec3 {
        let sx = if leg == FL || leg == FR { 1.0 } else { -1.0 };
        let sy = if leg == FL || leg == RL { 1.0 } else { -1.0 };
        Vec3::new(sx * self.base_length / 2.0, sy * self.base_width / 2.0, 0.0)
    }

    /// Maximum hip-to-foot distance (m).
    pub fn max_reach(&self) -> f64 {
        self.l_upper + self.l_lower
    }

    /// Minimum hip-to-foot distance at full knee flexion is limited by the
    /// knee's upper angle bound.
    pub fn min_reach(&self) -> f64 {
        let k = self.knee_limits[1];
        (self.l_upper * self.l_upper + self.l_lower * self.l_lower
            + 2.0 * self.l_upper * self.l_lower * k.cos())
        .sqrt()
    }

    /// `[lo, hi]` limits for joint `j` of a leg (0 = abduction, 1 = hip
    /// pitch, 2 = knee).
    pub fn joint_limits(&self, j: usize) -> [f64; 2] {
        match j {
            0 => self.abduction_limits,
            1 => self.hip_pitch_limits,
            _ => self.knee_limits,
        }
    }

    /// Joint angles of the default squat pose.
    pub fn squat_angles(&self) -> LegJointAngles {
        LegJointAngles::new(0.0, self.squat_hip_pitch, self.squat_knee)
    }

    /// All twelve squat joint angles in leg order.
    pub fn squat_joint_vector(&self) -> [f64; NUM_JOINTS] {
        let mut q = [0.0; NUM_JOINTS];
        for leg in 0..NUM_LEGS {
            let a = self.squat_angles().to_array();
            q[3 * leg..3 * leg + 3].copy_from_slice(&a);
        }
        q
    }

    /// Foot position of a leg in the base frame at the default squat pose.
    /// These are the reference points for the swing-foot action bounds and
    /// the landing-height statistics.
    pub fn squat_foot_base(&self, leg: usize) -> Vec3 {
        fk_leg(self, leg, &self.squat_angles())
    }

    /// Base height above flat rigid ground when all feet rest on it in the
    /// squat pose (foot centers sit one sphere radius above the surface).
    pub fn squat_base_height(&self) -> f64 {
        -self.squat_foot_base(0).z + self.foot_radius
    }
}

/// Forward kinematics of one leg: foot center position in the base frame.
///
/// Chain: hip offset, abduction rotation about x, hip pitch about the
/// rotated y, upper link down, knee pitch about the same y, lower link
/// down. With all angles zero the leg points straight down.
pub fn fk_leg(model: &RobotModel, leg: usize, q: &LegJointAngles) -> Vec3 {
    let r_abd = Quat::from_axis_angle(&Vec3::x_axis(), q.abduction);
    let upper = Quat::from_axis_angle(&Vec3::y_axis(), q.hip_pitch) * Vec3::new(0.0, 0.0, -model.l_upper);
    let lower =
        Quat::from_axis_angle(&Vec3::y_axis(), q.hip_pitch + q.knee) * Vec3::new(0.0, 0.0, -model.l_lower);
    model.hip_offset(leg) + r_abd * (upper + lower)
}

/// Analytic IK for one leg: base-frame foot target to joint angles in the
/// knee-backward branch (knee ≥ 0).
///
/// The abduction axis is x, so abduction is fixed by the target's (y, z)
/// up to a half-turn: undoing either candidate puts the foot in the leg's
/// sagittal plane, below or above the hip. Both candidates share the same
/// knee angle (the hip-to-foot distance fixes it); the remaining hip pitch
/// solves a planar two-link problem. The candidate with the smaller
/// |abduction| is preferred; a candidate violating joint limits is
/// discarded in favor of the other.
pub fn ik_leg(model: &RobotModel, leg: usize, target: Vec3) -> Result<LegJointAngles, RobotError> {
    let dist = (target - model.hip_offset(leg)).norm();
    let unreachable = || RobotError::Unreachable {
        leg,
        dist,
        min: model.min_reach(),
        max: model.max_reach(),
    };
    let candidates = ik_candidates(model, leg, target).ok_or_else(unreachable)?;
    candidates
        .into_iter()
        .find(|q| within_limits(model, q))
        .ok_or_else(unreachable)
}

/// IK that always yields an in-limits command: the exact solution when one
/// exists, otherwise the nearest representable one (target clamped onto
/// the reachable annulus, preferred branch, angles clamped into limits).
/// The commanded foot may then deviate from the requested target.
pub fn ik_leg_lenient(model: &RobotModel, leg: usize, target: Vec3) -> LegJointAngles {
    if let Ok(q) = ik_leg(model, leg, target) {
        return q;
    }
    let clamped_target = clamp_to_reachable(model, leg, target);
    let candidates =
        ik_candidates(model, leg, clamped_target).expect("clamped target lies in the annulus");
    if let Some(q) = candidates.iter().find(|q| within_limits(model, q)) {
        return *q;
    }
    let q = candidates[0].to_array();
    let clamped: Vec<f64> = q
        .into_iter()
        .enumerate()
        .map(|(j, angle)| {
            let [lo, hi] = model.joint_limits(j);
            angle.clamp(lo, hi)
        })
        .collect();
    LegJointAngles::new(clamped[0], clamped[1], clamped[2])
}

fn within_limits(model: &RobotModel, q: &LegJointAngles) -> bool {
    q.to_array().into_iter().enumerate().all(|(j, angle)| {
        let [lo, hi] = model.joint_limits(j);
        angle >= lo - 1e-9 && angle <= hi + 1e-9
    })
}

/// Both IK branches ordered by preference (smaller |abduction| first), or
/// `None` when the target lies outside the reach annulus.
fn ik_candidates(model: &RobotModel, leg: usize, target: Vec3) -> Option<[LegJointAngles; 2]> {
    let d = target - model.hip_offset(leg);
    let dist = d.norm();
    if dist < model.min_reach() - 1e-9 || dist > model.max_reach() + 1e-9 {
        return None;
    }

    let (lu, ll) = (model.l_upper, model.l_lower);
    let cos_knee = ((dist * dist - lu * lu - ll * ll) / (2.0 * lu * ll)).clamp(-1.0, 1.0);
    let knee = cos_knee.acos();
    // Angle from the hip-to-foot ray back to the upper link.
    let ray_to_upper = (ll * knee.sin()).atan2(lu + ll * knee.cos());

    // Distance from the abduction axis in the (y, z) plane.
    let r = (d.y * d.y + d.z * d.z).sqrt();
    let below = if d.y == 0.0 && d.z == 0.0 { 0.0 } else { d.y.atan2(-d.z) };
    let above = normalize_half_turn(below);
    let mut pair = [(below, -r), (above, r)];
    if above.abs() < below.abs() {
        pair.swap(0, 1);
    }
    Some(pair.map(|(abduction, z_planar)| {
        let hip_pitch = crate::geom::normalize_angle((-d.x).atan2(-z_planar) - ray_to_upper);
        LegJointAngles::new(abduction, hip_pitch, knee)
    }))
}

/// The abduction candidate half a turn away, kept in (-pi, pi].
fn normalize_half_turn(a: f64) -> f64 {
    crate::geom::normalize_angle(a + std::f64::consts::PI)
}

/// Clamps a base-frame foot target onto the reachable annulus along the
/// hip-to-target ray, at 99.5% of full extension (or just above minimum
/// reach when the target is too close).
pub fn clamp_to_reachable(model: &RobotModel, leg: usize, target: Vec3) -> Vec3 {
    let hip = model.hip_offset(leg);
    let d = target - hip;
    let dist = d.norm();
    let max_r = model.max_reach() * 0.995;
    let min_r = model.min_reach() * 1.005;
    if dist >= min_r && dist <= max_r {
        return target;
    }
    if dist < 1e-12 {
        // Degenerate target on the hip: push straight down.
        return hip + Vec3::new(0.0, 0.0, -min_r);
    }
    hip + d * (dist.clamp(min_r, max_r) / dist)
}

/// Whole-body IK: world-frame foot targets against a commanded base pose,
/// solved per leg in the fixed FL, FR, RL, RR order.
pub fn ik_pose(
    model: &RobotModel,
    base_pose: &Transform,
    foot_targets_world: &[Vec3; NUM_LEGS],
) -> Result<[f64; NUM_JOINTS], RobotError> {
    let mut q = [0.0; NUM_JOINTS];
    for leg in 0..NUM_LEGS {
        let local = base_pose.inverse_apply(foot_targets_world[leg]);
        let angles = ik_leg(model, leg, local)?;
        q[3 * leg..3 * leg + 3].copy_from_slice(&angles.to_array());
    }
    Ok(q)
}
