//! Phase-based gait generation: a 27D action decodes into three confined
//! cubic Bezier curves (base position offsets, base orientation offsets,
//! swing-foot path) that define one 0.75 s phase, sampled at 180 points
//! and turned into joint targets by whole-body IK.

use crate::geom::{BezierCubic, EulerRPY, Transform, Vec3};
use crate::robot::{ik_leg_lenient, RobotModel, FL, FR, NUM_JOINTS, NUM_LEGS, RL, RR};
use serde::{Deserialize, Serialize};

/// Ticks per phase; trajectories are sampled at t = i/180, i = 1..=180.
pub const TICKS_PER_PHASE: usize = 180;
/// Phase duration (s).
pub const PHASE_DURATION: f64 = 0.75;
/// Swing order over one gait cycle.
pub const SWING_ORDER: [usize; NUM_LEGS] = [FL, RR, FR, RL];

pub const ACTION_DIM: usize = 27;

/// Raw policy action: 27 components in [−1, 1].
///
/// Layout: [0..9) base-position control points 2..4 as (x, y, z) triples,
/// [9..18) base-orientation points as (roll, pitch, yaw) triples,
/// [18..27) swing-foot points as (frontal, lateral, height) triples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action(pub [f64; ACTION_DIM]);

impl Action {
    pub fn zeros() -> Self {
        Self([0.0; ACTION_DIM])
    }

    /// Component-wise clamp to [−1, 1]; non-finite values become 0.
    pub fn clamped(&self) -> Self {
        Self(self.0.map(|a| if a.is_finite() { a.clamp(-1.0, 1.0) } else { 0.0 }))
    }
}

/// Physical ranges the 27 unitless components map onto. Offsets anchor to
/// different references: base curves to the phase-start commanded pose,
/// foot height to the phase-start foot height, foot frontal/lateral to the
/// leg's default squat stance position (hind frontal shifted by −2 cm).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionBounds {
    /// Base-position control points 2 and 3, per axis (m).
    pub base_pos_mid: [f64; 2],
    /// Base-position control point 4, per axis (m).
    pub base_pos_end: [f64; 2],
    /// Base-orientation control points, per Euler axis (rad).
    pub base_ori: [f64; 2],
    /// Swing-foot height offsets from the phase-start height (m).
    pub foot_height: [f64; 2],
    /// Swing-foot lateral offsets from the squat stance position (m).
    pub foot_lateral: [f64; 2],
    /// Swing-foot frontal offsets from the squat stance position (m).
    pub foot_frontal: [f64; 2],
    /// Extra frontal shift applied to the hind legs' range (m).
    pub hind_frontal_shift: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            base_pos_mid: [-0.06, 0.06],
            base_pos_end: [-0.04, 0.08],
            base_ori: [-0.3, 0.3],
            foot_height: [-0.15, 0.15],
            foot_lateral: [-0.15, 0.15],
            foot_frontal: [-0.15, 0.15],
            hind_frontal_shift: -0.02,
        }
    }
}

impl ActionBounds {
    /// Uniformly scales every range about its midpoint, for the restricted
    /// action range ablation.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |[lo, hi]: [f64; 2]| {
            let mid = (lo + hi) / 2.0;
            let half = (hi - lo) / 2.0 * factor;
            [mid - half, mid + half]
        };
        Self {
            base_pos_mid: s(self.base_pos_mid),
            base_pos_end: s(self.base_pos_end),
            base_ori: s(self.base_ori),
            foot_height: s(self.foot_height),
            foot_lateral: s(self.foot_lateral),
            foot_frontal: s(self.foot_frontal),
            hind_frontal_shift: self.hind_frontal_shift,
        }
    }

    fn frontal_range(&self, leg: usize) -> [f64; 2] {
        if leg == RL || leg == RR {
            [
                self.foot_frontal[0] + self.hind_frontal_shift,
                self.foot_frontal[1] + self.hind_frontal_shift,
            ]
        } else {
            self.foot_frontal
        }
    }
}

/// Affine map from a ∈ [−1, 1] onto [lo, hi].
fn map_range(a: f64, [lo, hi]: [f64; 2]) -> f64 {
    lo + (a + 1.0) / 2.0 * (hi - lo)
}

/// One decoded phase: three Bezier curves plus the swing leg. Base curves
/// hold offsets from the phase-start commanded pose; the swing curve holds
/// base-frame foot positions.
#[derive(Clone, Debug)]
pub struct PhasePlan {
    pub base_pos: BezierCubic,
    pub base_ori: BezierCubic,
    pub swing_foot: BezierCubic,
    pub swing_leg: usize,
    pub duration: f64,
}

/// Cyclic FL → RR → FR → RL phase scheduler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    index: usize,
}

impl PhaseSchedule {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn swing_leg(&self) -> usize {
        SWING_ORDER[self.index]
    }

    pub fn advance(&mut self) {
        self.index = (self.index + 1) % NUM_LEGS;
    }
}

/// Decodes a clamped action against the current commanded stance.
///
/// `current_foot_base` is the swing foot's position in the commanded base
/// frame at phase start; it anchors the curve's first control point and
/// the height offsets. Frontal and lateral offsets anchor to the leg's
/// squat stance position.
pub fn decode_action(
    a: &Action,
    bounds: &ActionBounds,
    model: &RobotModel,
    swing_leg: usize,
    current_foot_base: Vec3,
) -> PhasePlan {
    let a = a.clamped();
    let point = |offset: usize, ranges: [[f64; 2]; 3]| {
        Vec3::new(
            map_range(a.0[offset], ranges[0]),
            map_range(a.0[offset + 1], ranges[1]),
            map_range(a.0[offset + 2], ranges[2]),
        )
    };

    let base_pos = BezierCubic::new(
        Vec3::zeros(),
        point(0, [bounds.base_pos_mid; 3]),
        point(3, [bounds.base_pos_mid; 3]),
        point(6, [bounds.base_pos_end; 3]),
    );
    let base_ori = BezierCubic::new(
        Vec3::zeros(),
        point(9, [bounds.base_ori; 3]),
        point(12, [bounds.base_ori; 3]),
        point(15, [bounds.base_ori; 3]),
    );

    let squat = model.squat_foot_base(swing_leg);
    let foot_ranges = [bounds.frontal_range(swing_leg), bounds.foot_lateral, bounds.foot_height];
    let anchor = Vec3::new(squat.x, squat.y, current_foot_base.z);
    let swing_foot = BezierCubic::new(
        current_foot_base,
        anchor + point(18, foot_ranges),
        anchor + point(21, foot_ranges),
        anchor + point(24, foot_ranges),
    );

    PhasePlan {
        base_pos,
        base_ori,
        swing_foot,
        swing_leg,
        duration: PHASE_DURATION,
    }
}

/// Commanded-trajectory state carried across phases: the pose and foot
/// positions the gait believes it has commanded, which anchor the next
/// phase's curves regardless of tracking error.
#[derive(Clone, Debug)]
pub struct GaitState {
    pub schedule: PhaseSchedule,
    /// Commanded base pose at the current phase start.
    pub commanded_base: Transform,
    /// Commanded world foot positions.
    pub commanded_feet: [Vec3; NUM_LEGS],
    /// Express mid-phase swing targets in the instantaneous commanded
    /// frame instead of the phase-start frame.
    pub swing_in_instantaneous_frame: bool,
}

impl GaitState {
    /// Anchors the commanded trajectory at a measured state.
    pub fn from_measured(base: Transform, feet_world: [Vec3; NUM_LEGS]) -> Self {
        Self {
            schedule: PhaseSchedule::default(),
            commanded_base: base,
            commanded_feet: feet_world,
            swing_in_instantaneous_frame: false,
        }
    }

    /// Decodes `a` into the current phase's plan.
    pub fn plan_phase(&self, a: &Action, bounds: &ActionBounds, model: &RobotModel) -> PhasePlan {
        let leg = self.schedule.swing_leg();
        let current = self.commanded_base.inverse_apply(self.commanded_feet[leg]);
        decode_action(a, bounds, model, leg, current)
    }

    /// Commanded base pose at tick `i` (1..=180) of a phase.
    pub fn commanded_pose_at(&self, plan: &PhasePlan, i: usize) -> Transform {
        let t = i as f64 / TICKS_PER_PHASE as f64;
        let dp = plan.base_pos.eval(t).expect("tick within phase");
        let de = plan.base_ori.eval(t).expect("tick within phase");
        Transform::new(
            self.commanded_base.rot * EulerRPY::from_vec3(de).to_quat(),
            self.commanded_base.pos + self.commanded_base.rot * dp,
        )
    }

    /// World-frame swing-foot target at tick `i`.
    pub fn swing_target_at(&self, plan: &PhasePlan, i: usize) -> Vec3 {
        let t = i as f64 / TICKS_PER_PHASE as f64;
        let local = plan.swing_foot.eval(t).expect("tick within phase");
        if self.swing_in_instantaneous_frame {
            self.commanded_pose_at(plan, i).apply(local)
        } else {
            self.commanded_base.apply(local)
        }
    }

    /// Desired joint angles at tick `i` of the phase: stance feet held at
    /// their commanded world positions, the swing foot on its curve, all
    /// solved against the commanded base pose. Targets outside the reach
    /// annulus or the joint-limit workspace degrade to the nearest
    /// representable command instead of failing.
    pub fn tick_targets(&self, model: &RobotModel, plan: &PhasePlan, i: usize) -> [f64; NUM_JOINTS] {
        let pose = self.commanded_pose_at(plan, i);
        let mut targets = self.commanded_feet;
        targets[plan.swing_leg] = self.swing_target_at(plan, i);

        let mut q = [0.0; NUM_JOINTS];
        for leg in 0..NUM_LEGS {
            let angles = ik_leg_lenient(model, leg, pose.inverse_apply(targets[leg]));
            q[3 * leg..3 * leg + 3].copy_from_slice(&angles.to_array());
        }
        q
    }

    /// Closes the phase: the commanded pose becomes the curve endpoint,
    /// the swing foot's commanded position becomes its final target, and
    /// the schedule advances.
    pub fn advance_phase(&mut self, plan: &PhasePlan) {
        let end_pose = self.commanded_pose_at(plan, TICKS_PER_PHASE);
        self.commanded_feet[plan.swing_leg] = self.swing_target_at(plan, TICKS_PER_PHASE);
        self.commanded_base = end_pose;
        self.schedule.advance();
    }
}
