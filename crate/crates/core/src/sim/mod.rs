//! Time-stepping simulation: articulated floating-base dynamics, penalty
//! contact against the sprung tiles, and PD joint-position control.
//!
//! One control tick spans 0.75/180 s (the gait's per-point interval) and
//! advances the physics in ⌈control_dt / physics_dt⌉ equal substeps.

pub mod contact;
pub mod dynamics;

use crate::geom::{Transform, Vec3};
use crate::robot::{fk_leg, LegJointAngles, RobotModel, NUM_JOINTS, NUM_LEGS};
use crate::terrain::TileGrid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use contact::{foot_inverse_masses, resolve_foot_contacts, termination_probes, FootContact};
pub use dynamics::{DynamicsStage, Kinematics, MultibodyModel, Vec18};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation diverged: {reason}")]
    Diverged { reason: String },
}

/// Stepping and contact parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Physics substep upper bound (s).
    pub physics_dt: f64,
    /// Control tick length (s): one gait trajectory point.
    pub control_dt: f64,
    /// Gravity (m/s², positive down).
    pub gravity: f64,
    /// Coulomb friction coefficient.
    pub friction: f64,
    /// Contact normal stiffness (N/m).
    pub contact_stiffness: f64,
    /// Contact normal/tangential damping (N·s/m).
    pub contact_damping: f64,
    /// Hard cap on a single contact's normal force (N); bounds the spike
    /// when a loaded foot slides across a tile edge onto a higher top.
    pub max_contact_force: f64,
    /// PD position gain (N·m/rad).
    pub kp: f64,
    /// PD velocity gain (N·m·s/rad).
    pub kd: f64,
    /// Per-joint torque limit (N·m).
    pub torque_limit: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            physics_dt: 0.001,
            control_dt: 0.75 / 180.0,
            gravity: 9.81,
            friction: 0.6,
            contact_stiffness: 6.0e4,
            contact_damping: 600.0,
            max_contact_force: 600.0,
            kp: 300.0,
            kd: 8.0,
            torque_limit: 40.0,
        }
    }
}

impl SimConfig {
    /// Substeps per control tick: enough that none exceeds `physics_dt`.
    pub fn substeps(&self) -> usize {
        ((self.control_dt / self.physics_dt).ceil() as usize).max(1)
    }
}

/// Dynamic state of the robot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimState {
    /// Base pose; the frame origin sits at the base COM.
    pub base: Transform,
    /// World linear velocity of the base origin (m/s).
    pub v: Vec3,
    /// World angular velocity (rad/s).
    pub w: Vec3,
    /// Joint angles, legs in FL, FR, RL, RR order (rad).
    pub q: [f64; NUM_JOINTS],
    /// Joint rates (rad/s).
    pub qd: [f64; NUM_JOINTS],
    /// Simulated time (s).
    pub time: f64,
}

impl SimState {
    /// Robot at rest in the default squat pose with feet touching the
    /// undisturbed ground plane, base over (x, y).
    pub fn squat(model: &RobotModel, x: f64, y: f64) -> Self {
        Self {
            base: Transform::new(
                crate::geom::Quat::identity(),
                Vec3::new(x, y, model.squat_base_height()),
            ),
            v: Vec3::zeros(),
            w: Vec3::zeros(),
            q: model.squat_joint_vector(),
            qd: [0.0; NUM_JOINTS],
            time: 0.0,
        }
    }

    pub fn leg_angles(&self, leg: usize) -> LegJointAngles {
        LegJointAngles::new(self.q[3 * leg], self.q[3 * leg + 1], self.q[3 * leg + 2])
    }

    /// World foot-center positions from forward kinematics.
    pub fn foot_positions(&self, model: &RobotModel) -> [Vec3; NUM_LEGS] {
        std::array::from_fn(|leg| self.base.apply(fk_leg(model, leg, &self.leg_angles(leg))))
    }

    /// World hip-attachment positions.
    pub fn hip_positions(&self, model: &RobotModel) -> [Vec3; NUM_LEGS] {
        std::array::from_fn(|leg| self.base.apply(model.hip_offset(leg)))
    }

    /// Generalized velocity [v; w; q̇].
    pub fn u(&self) -> Vec18 {
        let mut u = Vec18::zeros();
        for k in 0..3 {
            u[k] = self.v[k];
            u[3 + k] = self.w[k];
        }
        for i in 0..NUM_JOINTS {
            u[6 + i] = self.qd[i];
        }
        u
    }

    fn check_finite(&self, limit: f64) -> Result<(), SimError> {
        let ok = self.base.pos.iter().all(|c| c.is_finite())
            && self.base.rot.coords.iter().all(|c| c.is_finite())
            && self.v.iter().all(|c| c.is_finite() && c.abs() <= limit)
            && self.w.iter().all(|c| c.is_finite() && c.abs() <= limit)
            && self.q.iter().all(|c| c.is_finite())
            && self.qd.iter().all(|c| c.is_finite() && c.abs() <= limit);
        if ok {
            Ok(())
        } else {
            Err(SimError::Diverged { reason: format!("state out of bounds at t = {:.4}", self.time) })
        }
    }
}

/// Identity of a collision shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkId {
    Base,
    Upper(usize),
    Lower(usize),
    Foot(usize),
}

impl LinkId {
    /// Feet are the end-effectors; their ground contact is the gait.
    pub fn is_end_effector(&self) -> bool {
        matches!(self, LinkId::Foot(_))
    }
}

/// One contact detected during a tick. Foot events carry the resolved
/// normal force; probe events on other links are reported with zero force
/// (they exist to trigger termination, not to push).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ContactEvent {
    pub link: LinkId,
    pub tile: Option<usize>,
    pub normal_force: f64,
    pub penetration: f64,
}

/// Result of one control tick.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Applied torque per joint, averaged over the tick's substeps (N·m).
    pub torques_mean: [f64; NUM_JOINTS],
    /// Mean over substeps of the 12D torque vector's Euclidean norm; the
    /// quantity averaged per phase for the torque reward.
    pub torque_norm_mean: f64,
    /// Max normal force per foot across the tick's substeps (N), for
    /// landing detection.
    pub foot_normal_max: [f64; NUM_LEGS],
    /// Contacts: foot contacts from the last substep plus termination
    /// probes evaluated at the tick's end.
    pub contacts: Vec<ContactEvent>,
    /// World foot-center positions at the tick's end.
    pub foot_pos: [Vec3; NUM_LEGS],
}

impl StepOutput {
    /// True if any non-end-effector link touches the ground.
    pub fn forbidden_contact(&self) -> bool {
        self.contacts.iter().any(|c| !c.link.is_end_effector())
    }
}

/// PD joint torque: clamp(k_p·(q_des − q) − k_d·q̇, ±limit).
pub fn pd_torque(q_des: f64, q: f64, qd: f64, cfg: &SimConfig) -> f64 {
    (cfg.kp * (q_des - q) - cfg.kd * qd).clamp(-cfg.torque_limit, cfg.torque_limit)
}

/// Heights of the four hip attachment points above the terrain directly
/// below each, in leg order.
pub fn base_heights(model: &RobotModel, state: &SimState, grid: &TileGrid) -> [f64; NUM_LEGS] {
    let hips = state.hip_positions(model);
    std::array::from_fn(|leg| {
        let h = hips[leg];
        h.z - grid.height_at(h.x, h.y).height
    })
}

/// Advances the robot and terrain by one control tick under PD tracking of
/// `q_des`.
///
/// Substep order: assemble and factor the mass matrix, compute PD torques,
/// resolve contacts against the current state, solve for accelerations,
/// integrate semi-implicitly, then step the contacted tiles under the
/// reaction forces and let every other active tile relax.
pub fn step_control_tick(
    model: &MultibodyModel,
    cfg: &SimConfig,
    state: &mut SimState,
    grid: &mut TileGrid,
    q_des: &[f64; NUM_JOINTS],
) -> Result<StepOutput, SimError> {
    let n_sub = cfg.substeps();
    let dt = cfg.control_dt / n_sub as f64;

    let mut torque_sum = [0.0f64; NUM_JOINTS];
    let mut norm_sum = 0.0f64;
    let mut foot_normal_max = [0.0f64; NUM_LEGS];
    let mut inv_mass = None;
    let mut foot_contacts: Vec<FootContact> = Vec::with_capacity(NUM_LEGS);
    let mut forced_tiles: Vec<(usize, f64)> = Vec::with_capacity(NUM_LEGS);

    for _ in 0..n_sub {
        let stage = DynamicsStage::new(model, state).ok_or_else(|| SimError::Diverged {
            reason: format!("mass matrix factorization failed at t = {:.4}", state.time),
        })?;
        let inv_mass = inv_mass.get_or_insert_with(|| foot_inverse_masses(&stage));

        let mut rhs = Vec18::zeros();
        let mut norm_sq = 0.0;
        for i in 0..NUM_JOINTS {
            let tau = pd_torque(q_des[i], state.q[i], state.qd[i], cfg);
            torque_sum[i] += tau;
            norm_sq += tau * tau;
            rhs[6 + i] += tau;
        }
        norm_sum += norm_sq.sqrt();

        resolve_foot_contacts(
            &stage,
            grid,
            cfg,
            inv_mass,
            dt,
            model.robot.foot_radius,
            &mut foot_contacts,
        );
        forced_tiles.clear();
        for c in &foot_contacts {
            stage.apply_force_on_lower(c.leg, c.point, c.force, &mut rhs);
            foot_normal_max[c.leg] = foot_normal_max[c.leg].max(c.normal_force);
            if let Some(tile) = c.tile {
                // Two feet can share a tile; merge their loads.
                match forced_tiles.iter_mut().find(|(t, _)| *t == tile) {
                    Some((_, f)) => *f += c.normal_force,
                    None => forced_tiles.push((tile, c.normal_force)),
                }
            }
        }

        rhs += stage.gravity_forces(model, cfg.gravity);
        rhs -= stage.velocity_product_forces(model, state);
        let udot = stage.chol.solve(&rhs);
        dynamics::integrate(state, model, &udot, dt);
        state.time += dt;

        forced_tiles.sort_unstable_by_key(|(t, _)| *t);
        for (tile, f) in &forced_tiles {
            grid.apply_force_and_step(*tile, *f, dt);
        }
        let forced_indices: Vec<usize> = forced_tiles.iter().map(|(t, _)| *t).collect();
        grid.step_unforced(&forced_indices, dt);

        state.check_finite(100.0)?;
    }

    // Gather reportable contacts: feet from the final substep, forbidden
    // links from probes against the end-of-tick state.
    let stage = DynamicsStage::new(model, state).ok_or_else(|| SimError::Diverged {
        reason: format!("mass matrix factorization failed at t = {:.4}", state.time),
    })?;
    let mut contacts: Vec<ContactEvent> = foot_contacts
        .iter()
        .map(|c| ContactEvent {
            link: LinkId::Foot(c.leg),
            tile: c.tile,
            normal_force: c.normal_force,
            penetration: c.penetration,
        })
        .collect();
    for probe in termination_probes(&stage, &state.base, model.robot.base_size) {
        let q = grid.height_at(probe.point.x, probe.point.y);
        let penetration = q.height + probe.radius - probe.point.z;
        if penetration > 0.0 {
            contacts.push(ContactEvent {
                link: probe.link,
                tile: q.tile,
                normal_force: 0.0,
                penetration,
            });
        }
    }

    Ok(StepOutput {
        torques_mean: std::array::from_fn(|i| torque_sum[i] / n_sub as f64),
        torque_norm_mean: norm_sum / n_sub as f64,
        foot_normal_max,
        contacts,
        foot_pos: std::array::from_fn(|leg| stage.kin.legs[leg].foot_w),
    })
}
