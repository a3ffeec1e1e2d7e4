//! Reduced-coordinate articulated dynamics for the floating-base quadruped.
//!
//! Generalized velocity u ∈ R¹⁸ stacks the base linear velocity (world),
//! base angular velocity (world), and the 12 joint rates in leg order.
//! Each substep assembles the joint-space mass matrix from body Jacobians,
//!
//!   M(q) = Σ_b m_b·J_v,bᵀ J_v,b + J_ω,bᵀ I_b J_ω,b,
//!
//! solves M·u̇ = Q_applied + Q_gravity + Q_contact − Q_velocity-product by
//! Cholesky factorization, and integrates semi-implicitly. The shoulder
//! between the two co-located hip joints is massless, so the moving bodies
//! are the base plus an upper and a lower link per leg (the foot mass is
//! folded into the lower link).

use crate::geom::{Quat, Vec3};
use crate::robot::{RobotModel, NUM_LEGS};
use nalgebra::{Matrix3, SMatrix, SVector};

use super::SimState;

pub type Mat18 = SMatrix<f64, 18, 18>;
pub type Vec18 = SVector<f64, 18>;

/// Generalized-coordinate index of joint `j` (0..2) of leg `leg`.
pub fn joint_col(leg: usize, j: usize) -> usize {
    6 + 3 * leg + j
}

/// Inertial parameters of one leg link, modeled as a uniform rod along its
/// local z axis with a small axial term to keep the mass matrix positive
/// definite when a leg aligns with a joint axis.
#[derive(Clone, Copy, Debug)]
pub struct LinkParams {
    pub mass: f64,
    pub length: f64,
    /// Distance from the link origin (its joint) down to the COM.
    pub com_offset: f64,
    pub i_perp: f64,
    pub i_axial: f64,
}

impl LinkParams {
    fn rod(mass: f64, length: f64) -> Self {
        let radius = 0.02;
        Self {
            mass,
            length,
            com_offset: length / 2.0,
            i_perp: mass * length * length / 12.0,
            i_axial: mass * radius * radius / 2.0,
        }
    }

    /// World inertia about the COM given the link's world direction `d`
    /// (unit, along local z): I = i_perp·(1 − ddᵀ·0) folded as
    /// i_perp·I₃ + (i_axial − i_perp)·ddᵀ.
    fn world_inertia(&self, d: Vec3) -> Matrix3<f64> {
        Matrix3::identity() * self.i_perp + (d * d.transpose()) * (self.i_axial - self.i_perp)
    }
}

/// Precomputed multibody parameters derived from the morphology.
#[derive(Clone, Debug)]
pub struct MultibodyModel {
    pub robot: RobotModel,
    pub base_inertia_local: Matrix3<f64>,
    pub upper: LinkParams,
    pub lower: LinkParams,
}

impl MultibodyModel {
    pub fn new(robot: RobotModel) -> Self {
        let [lx, ly, lz] = robot.base_size;
        let m = robot.base_mass;
        let base_inertia_local = Matrix3::from_diagonal(&Vec3::new(
            m / 12.0 * (ly * ly + lz * lz),
            m / 12.0 * (lx * lx + lz * lz),
            m / 12.0 * (lx * lx + ly * ly),
        ));
        Self {
            base_inertia_local,
            upper: LinkParams::rod(robot.upper_mass, robot.l_upper),
            lower: LinkParams::rod(robot.lower_mass, robot.l_lower),
            robot,
        }
    }
}

/// Per-leg world-frame kinematics for one instant.
#[derive(Clone, Copy, Debug)]
pub struct LegKin {
    pub hip_w: Vec3,
    pub knee_w: Vec3,
    pub foot_w: Vec3,
    /// Abduction axis (base x) in world.
    pub a_abd: Vec3,
    /// Hip-pitch axis, shared by the knee, in world.
    pub a_pitch: Vec3,
    /// Unit directions of the two links (hip→knee, knee→foot).
    pub dir_upper: Vec3,
    pub dir_lower: Vec3,
    pub com_upper: Vec3,
    pub com_lower: Vec3,
    /// Angular velocities of the shoulder, upper, and lower bodies.
    pub w_shoulder: Vec3,
    pub w_upper: Vec3,
    pub w_lower: Vec3,
    /// World velocity of the foot center.
    pub v_foot: Vec3,
}

/// World-frame kinematics of the whole robot for one instant.
#[derive(Clone, Debug)]
pub struct Kinematics {
    /// Base rotation as a matrix.
    pub r_base: Matrix3<f64>,
    /// Base inertia in world coordinates.
    pub base_inertia_w: Matrix3<f64>,
    pub legs: [LegKin; NUM_LEGS],
}

impl Kinematics {
    pub fn compute(model: &MultibodyModel, s: &SimState) -> Self {
        let r_base = *s.base.rot.to_rotation_matrix().matrix();
        let base_inertia_w = r_base * model.base_inertia_local * r_base.transpose();
        let p = s.base.pos;
        let legs = std::array::from_fn(|leg| {
            let q0 = s.q[3 * leg];
            let q1 = s.q[3 * leg + 1];
            let q2 = s.q[3 * leg + 2];
            let qd0 = s.qd[3 * leg];
            let qd1 = s.qd[3 * leg + 1];
            let qd2 = s.qd[3 * leg + 2];

            let hip_w = s.base.apply(model.robot.hip_offset(leg));
            let a_abd = s.base.rot * Vec3::x();
            let r_shoulder = s.base.rot * Quat::from_axis_angle(&Vec3::x_axis(), q0);
            let a_pitch = r_shoulder * Vec3::y();
            let r_upper = r_shoulder * Quat::from_axis_angle(&Vec3::y_axis(), q1);
            let dir_upper = r_upper * Vec3::new(0.0, 0.0, -1.0);
            let knee_w = hip_w + dir_upper * model.robot.l_upper;
            let r_lower = r_shoulder * Quat::from_axis_angle(&Vec3::y_axis(), q1 + q2);
            let dir_lower = r_lower * Vec3::new(0.0, 0.0, -1.0);
            let foot_w = knee_w + dir_lower * model.robot.l_lower;

            let w_shoulder = s.w + a_abd * qd0;
            let w_upper = w_shoulder + a_pitch * qd1;
            let w_lower = w_upper + a_pitch * qd2;

            let v_hip = s.v + s.w.cross(&(hip_w - p));
            let v_knee = v_hip + w_upper.cross(&(knee_w - hip_w));
            let v_foot = v_knee + w_lower.cross(&(foot_w - knee_w));

            LegKin {
                hip_w,
                knee_w,
                foot_w,
                a_abd,
                a_pitch,
                dir_upper,
                dir_lower,
                com_upper: hip_w + dir_upper * model.upper.com_offset,
                com_lower: knee_w + dir_lower * model.lower.com_offset,
                w_shoulder,
                w_upper,
                w_lower,
                v_foot,
            }
        });
        Self { r_base, base_inertia_w, legs }
    }
}

/// Jacobian columns of one rigid body: world linear and angular velocity
/// of the body (at its COM) per unit generalized velocity, for the up-to-9
/// generalized coordinates the body depends on.
pub struct BodyJac {
    pub n: usize,
    pub cols: [usize; 9],
    pub jv: [Vec3; 9],
    pub jw: [Vec3; 9],
}

impl BodyJac {
    /// Columns for a leg body. `chain` is how many of the leg's joints
    /// move the body (2 for the upper link, 3 for the lower).
    ///
    /// The joint columns are a_j × (com − P_j) where P_j is a point on
    /// joint j's axis: the hip for abduction and hip pitch, the knee for
    /// the knee joint.
    fn leg_body(leg_index: usize, kin: &LegKin, com: Vec3, base_pos: Vec3, chain: usize) -> Self {
        let mut cols = [0usize; 9];
        let mut jv = [Vec3::zeros(); 9];
        let mut jw = [Vec3::zeros(); 9];
        // Base linear velocity columns.
        for k in 0..3 {
            cols[k] = k;
            jv[k] = Vec3::ith(k, 1.0);
        }
        // Base angular velocity columns.
        let r = com - base_pos;
        for k in 0..3 {
            cols[3 + k] = 3 + k;
            jv[3 + k] = Vec3::ith(k, 1.0).cross(&r);
            jw[3 + k] = Vec3::ith(k, 1.0);
        }
        let joints = [
            (kin.a_abd, kin.hip_w),
            (kin.a_pitch, kin.hip_w),
            (kin.a_pitch, kin.knee_w),
        ];
        for (j, (axis, point)) in joints.iter().take(chain).enumerate() {
            cols[6 + j] = joint_col(leg_index, j);
            jv[6 + j] = axis.cross(&(com - point));
            jw[6 + j] = *axis;
        }
        Self { n: 6 + chain, cols, jv, jw }
    }

    /// Linear Jacobian column `i` transported from the COM to point `p`.
    fn jv_at(&self, i: usize, offset_from_com: Vec3) -> Vec3 {
        self.jv[i] + self.jw[i].cross(&offset_from_com)
    }
}

/// Everything the contact resolver and integrator need about one instant:
/// factored mass matrix plus the per-leg Jacobians.
pub struct DynamicsStage {
    pub kin: Kinematics,
    pub chol: nalgebra::Cholesky<f64, nalgebra::Const<18>>,
    upper_jacs: [BodyJac; NUM_LEGS],
    lower_jacs: [BodyJac; NUM_LEGS],
}

impl DynamicsStage {
    /// Assembles and factors the mass matrix. Returns `None` if the state
    /// is so corrupt the matrix loses positive definiteness (NaNs).
    pub fn new(model: &MultibodyModel, s: &SimState) -> Option<Self> {
        let kin = Kinematics::compute(model, s);
        let mut m = Mat18::zeros();

        // Base body: its COM is the base origin, so the base Jacobian is
        // the identity on the v and w blocks.
        for k in 0..3 {
            m[(k, k)] += model.robot.base_mass;
        }
        for i in 0..3 {
            for j in 0..3 {
                m[(3 + i, 3 + j)] += kin.base_inertia_w[(i, j)];
            }
        }

        let upper_jacs =
            std::array::from_fn(|l| BodyJac::leg_body(l, &kin.legs[l], kin.legs[l].com_upper, s.base.pos, 2));
        let lower_jacs =
            std::array::from_fn(|l| BodyJac::leg_body(l, &kin.legs[l], kin.legs[l].com_lower, s.base.pos, 3));

        for leg in 0..NUM_LEGS {
            let iw_u = model.upper.world_inertia(kin.legs[leg].dir_upper);
            let iw_l = model.lower.world_inertia(kin.legs[leg].dir_lower);
            accumulate_body(&mut m, &upper_jacs[leg], model.upper.mass, &iw_u);
            accumulate_body(&mut m, &lower_jacs[leg], model.lower.mass, &iw_l);
        }

        // Mirror the accumulated upper triangle.
        for i in 0..18 {
            for j in (i + 1)..18 {
                m[(j, i)] = m[(i, j)];
            }
        }

        let chol = nalgebra::Cholesky::new(m)?;
        Some(Self { kin, chol, upper_jacs, lower_jacs })
    }

    pub fn lower_jac(&self, leg: usize) -> &BodyJac {
        &self.lower_jacs[leg]
    }

    /// Generalized force of a world-frame force applied at a point on a
    /// leg's lower link, accumulated into `q`.
    pub fn apply_force_on_lower(&self, leg: usize, point: Vec3, force: Vec3, q: &mut Vec18) {
        let jac = &self.lower_jacs[leg];
        let offset = point - self.kin.legs[leg].com_lower;
        for i in 0..jac.n {
            q[jac.cols[i]] += jac.jv_at(i, offset).dot(&force);
        }
    }

    /// Generalized-velocity direction of unit motion of `point` (on the
    /// lower link of `leg`) along `dir`: Jᵀ·dir as an 18-vector.
    pub fn point_direction_jacobian(&self, leg: usize, point: Vec3, dir: Vec3) -> Vec18 {
        let jac = &self.lower_jacs[leg];
        let offset = point - self.kin.legs[leg].com_lower;
        let mut j = Vec18::zeros();
        for i in 0..jac.n {
            j[jac.cols[i]] = jac.jv_at(i, offset).dot(&dir);
        }
        j
    }

    /// Apparent inverse mass of a point on a lower link along `dir`:
    /// w = jᵀ M⁻¹ j for j = point-direction Jacobian. Bounds how hard a
    /// damping force may push before it would reverse the point's
    /// velocity within one substep.
    pub fn apparent_inverse_mass(&self, leg: usize, point: Vec3, dir: Vec3) -> f64 {
        let j = self.point_direction_jacobian(leg, point, dir);
        j.dot(&self.chol.solve(&j))
    }

    /// Velocity-product generalized forces Q_vp (enters the equations of
    /// motion as M·u̇ = Q_applied − Q_vp). Computed by propagating the
    /// bias accelerations (accelerations with u̇ = 0) down each leg and
    /// projecting Newton–Euler terms through the Jacobians.
    pub fn velocity_product_forces(&self, model: &MultibodyModel, s: &SimState) -> Vec18 {
        let mut q = Vec18::zeros();
        // Base body: zero bias acceleration, gyroscopic torque only.
        let gyro_base = s.w.cross(&(self.kin.base_inertia_w * s.w));
        for k in 0..3 {
            q[3 + k] += gyro_base[k];
        }

        for leg in 0..NUM_LEGS {
            let lk = &self.kin.legs[leg];
            let qd0 = s.qd[3 * leg];
            let qd1 = s.qd[3 * leg + 1];
            let qd2 = s.qd[3 * leg + 2];

            // Axis drift rates: each axis is fixed in its parent body.
            let a_abd_dot = s.w.cross(&lk.a_abd);
            let a_pitch_dot = lk.w_shoulder.cross(&lk.a_pitch);

            let wdot_upper = a_abd_dot * qd0 + a_pitch_dot * qd1;
            let wdot_lower = wdot_upper + a_pitch_dot * qd2;

            // Point accelerations with u̇ = 0, propagated hip → knee → COMs.
            let acc_hip = s.w.cross(&s.w.cross(&(lk.hip_w - s.base.pos)));
            let r_hip_comu = lk.com_upper - lk.hip_w;
            let acc_com_upper =
                acc_hip + wdot_upper.cross(&r_hip_comu) + lk.w_upper.cross(&lk.w_upper.cross(&r_hip_comu));
            let r_hip_knee = lk.knee_w - lk.hip_w;
            let acc_knee =
                acc_hip + wdot_upper.cross(&r_hip_knee) + lk.w_upper.cross(&lk.w_upper.cross(&r_hip_knee));
            let r_knee_coml = lk.com_lower - lk.knee_w;
            let acc_com_lower =
                acc_knee + wdot_lower.cross(&r_knee_coml) + lk.w_lower.cross(&lk.w_lower.cross(&r_knee_coml));

            let iw_u = model.upper.world_inertia(lk.dir_upper);
            let iw_l = model.lower.world_inertia(lk.dir_lower);
            let f_u = acc_com_upper * model.upper.mass;
            let t_u = iw_u * wdot_upper + lk.w_upper.cross(&(iw_u * lk.w_upper));
            let f_l = acc_com_lower * model.lower.mass;
            let t_l = iw_l * wdot_lower + lk.w_lower.cross(&(iw_l * lk.w_lower));

            let ju = &self.upper_jacs[leg];
            for i in 0..ju.n {
                q[ju.cols[i]] += ju.jv[i].dot(&f_u) + ju.jw[i].dot(&t_u);
            }
            let jl = &self.lower_jacs[leg];
            for i in 0..jl.n {
                q[jl.cols[i]] += jl.jv[i].dot(&f_l) + jl.jw[i].dot(&t_l);
            }
        }
        q
    }

    /// Generalized gravity forces.
    pub fn gravity_forces(&self, model: &MultibodyModel, g: f64) -> Vec18 {
        let mut q = Vec18::zeros();
        q[2] -= model.robot.base_mass * g;
        for leg in 0..NUM_LEGS {
            let fg_u = Vec3::new(0.0, 0.0, -model.upper.mass * g);
            let fg_l = Vec3::new(0.0, 0.0, -model.lower.mass * g);
            let ju = &self.upper_jacs[leg];
            for i in 0..ju.n {
                q[ju.cols[i]] += ju.jv[i].dot(&fg_u);
            }
            let jl = &self.lower_jacs[leg];
            for i in 0..jl.n {
                q[jl.cols[i]] += jl.jv[i].dot(&fg_l);
            }
        }
        q
    }

    /// Generalized momentum M·u. Rows 0..3 are the total linear momentum,
    /// rows 3..6 the angular momentum about the base origin.
    pub fn generalized_momentum(&self, u: &Vec18) -> Vec18 {
        // Reconstruct M·u through the factorization: M = L·Lᵀ.
        let l = self.chol.l();
        l * (l.transpose() * u)
    }
}

fn accumulate_body(m: &mut Mat18, jac: &BodyJac, mass: f64, inertia_w: &Matrix3<f64>) {
    let mut t = [Vec3::zeros(); 9];
    for j in 0..jac.n {
        t[j] = inertia_w * jac.jw[j];
    }
    for i in 0..jac.n {
        for j in i..jac.n {
            let (ci, cj) = (jac.cols[i], jac.cols[j]);
            let val = mass * jac.jv[i].dot(&jac.jv[j]) + jac.jw[i].dot(&t[j]);
            // Column sets are ascending, so (ci, cj) stays upper-triangular.
            m[(ci, cj)] += val;
        }
    }
}

/// Semi-implicit Euler integration of one substep: velocities first, then
/// poses from the new velocities, then hard joint-limit clamping (zeroing
/// any outward joint rate).
pub fn integrate(s: &mut SimState, model: &MultibodyModel, udot: &Vec18, dt: f64) {
    s.v += Vec3::new(udot[0], udot[1], udot[2]) * dt;
    s.w += Vec3::new(udot[3], udot[4], udot[5]) * dt;
    for i in 0..12 {
        s.qd[i] += udot[6 + i] * dt;
    }

    s.base.pos += s.v * dt;
    s.base.rot = Quat::from_scaled_axis(s.w * dt) * s.base.rot;
    s.base.rot.renormalize();
    for leg in 0..NUM_LEGS {
        for j in 0..3 {
            let i = 3 * leg + j;
            s.q[i] += s.qd[i] * dt;
            let [lo, hi] = model.robot.joint_limits(j);
            if s.q[i] < lo {
                s.q[i] = lo;
                s.qd[i] = s.qd[i].max(0.0);
            } else if s.q[i] > hi {
                s.q[i] = hi;
                s.qd[i] = s.qd[i].min(0.0);
            }
        }
    }
}
