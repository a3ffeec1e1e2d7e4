//! Vector and rotation algebra plus cubic Bezier curves.
//!
//! Conventions used throughout the crate:
//! - World frame: z up, x along the robot's initial heading.
//! - Euler angles are intrinsic roll-pitch-yaw (rotations about the body
//!   x, then y, then z axes), each normalized to `(-pi, pi]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 3D vector of meters (or radians when housing Euler angle triples).
pub type Vec3 = nalgebra::Vector3<f64>;
/// Unit quaternion rotation.
pub type Quat = nalgebra::UnitQuaternion<f64>;

/// Errors from curve evaluation and sampling.
#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("curve parameter t = {t} outside [0, 1]")]
    ParamOutOfRange { t: f64 },
    #[error("sample count n = {n} below minimum of 2")]
    TooFewSamples { n: usize },
}

/// Rigid transform: rotation followed by translation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Transform {
    pub rot: Quat,
    pub pos: Vec3,
}

impl Transform {
    pub fn new(rot: Quat, pos: Vec3) -> Self {
        Self { rot, pos }
    }

    pub fn identity() -> Self {
        Self { rot: Quat::identity(), pos: Vec3::zeros() }
    }

    /// Maps a point from this frame to the parent frame.
    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rot * p + self.pos
    }

    /// Rotates a free vector (no translation).
    pub fn apply_vec(&self, v: Vec3) -> Vec3 {
        self.rot * v
    }

    /// Maps a point from the parent frame into this frame.
    pub fn inverse_apply(&self, p: Vec3) -> Vec3 {
        self.rot.inverse() * (p - self.pos)
    }

    pub fn inverse(&self) -> Transform {
        let inv_rot = self.rot.inverse();
        Transform { rot: inv_rot, pos: -(inv_rot * self.pos) }
    }

    /// `self` applied after `other`: (self ∘ other)(p) = self(other(p)).
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform { rot: self.rot * other.rot, pos: self.rot * other.pos + self.pos }
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// Intrinsic X-Y-Z Euler angles (roll about x, then pitch about y, then yaw
/// about z), each in `(-pi, pi]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerRPY {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerRPY {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            roll: normalize_angle(roll),
            pitch: normalize_angle(pitch),
            yaw: normalize_angle(yaw),
        }
    }

    /// Quaternion for R = Rx(roll) * Ry(pitch) * Rz(yaw).
    pub fn to_quat(self) -> Quat {
        let rx = Quat::from_axis_angle(&Vec3::x_axis(), self.roll);
        let ry = Quat::from_axis_angle(&Vec3::y_axis(), self.pitch);
        let rz = Quat::from_axis_angle(&Vec3::z_axis(), self.yaw);
        rx * ry * rz
    }

    /// Extracts intrinsic X-Y-Z angles from a rotation.
    ///
    /// For R = Rx*Ry*Rz the matrix entries give
    /// `R02 = sin(pitch)`, `R12 = -sin(roll)cos(pitch)`,
    /// `R22 = cos(roll)cos(pitch)`, `R01 = -cos(pitch)sin(yaw)`,
    /// `R00 = cos(pitch)cos(yaw)`. Near gimbal lock (|pitch| = pi/2) the
    /// yaw is fixed to 0 and the remaining rotation folded into roll.
    pub fn from_quat(q: &Quat) -> Self {
        let m = q.to_rotation_matrix();
        let r = m.matrix();
        let s_pitch = r[(0, 2)].clamp(-1.0, 1.0);
        if s_pitch.abs() > 1.0 - 1e-9 {
            let pitch = std::f64::consts::FRAC_PI_2.copysign(s_pitch);
            // R10 = sin(roll +/- yaw), R11 = cos(roll +/- yaw); pick yaw = 0.
            let roll = r[(1, 0)].atan2(r[(1, 1)]) * s_pitch.signum();
            return Self { roll, pitch, yaw: 0.0 };
        }
        Self {
            roll: (-r[(1, 2)]).atan2(r[(2, 2)]),
            pitch: s_pitch.asin(),
            yaw: (-r[(0, 1)]).atan2(r[(0, 0)]),
        }
    }

    pub fn to_vec3(self) -> Vec3 {
        Vec3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn from_vec3(v: Vec3) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Direction of gravity expressed in the base frame: R⁻¹ · (0, 0, -1).
pub fn gravity_in_base(orientation: &Transform) -> Vec3 {
    orientation.rot.inverse() * Vec3::new(0.0, 0.0, -1.0)
}

/// Cubic Bezier curve over four control points.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BezierCubic {
    pub p: [Vec3; 4],
}

impl BezierCubic {
    pub fn new(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3) -> Self {
        Self { p: [p0, p1, p2, p3] }
    }

    /// Constant curve sitting at one point.
    pub fn constant(p: Vec3) -> Self {
        Self { p: [p; 4] }
    }

    /// Evaluates the curve at `t` via the Bernstein polynomial form
    /// (1-t)³p0 + 3(1-t)²t·p1 + 3(1-t)t²·p2 + t³·p3.
    pub fn eval(&self, t: f64) -> Result<Vec3, GeomError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(GeomError::ParamOutOfRange { t });
        }
        let u = 1.0 - t;
        Ok(self.p[0] * (u * u * u)
            + self.p[1] * (3.0 * u * u * t)
            + self.p[2] * (3.0 * u * t * t)
            + self.p[3] * (t * t * t))
    }

    /// Samples the curve at t = 1/n, 2/n, ..., n/n. The point at t = 0 is
    /// the current value of the trajectory and is excluded; the returned
    /// sequence has length exactly `n` and ends at `p3`.
    pub fn sample(&self, n: usize) -> Result<Vec<Vec3>, GeomError> {
        if n < 2 {
            return Err(GeomError::TooFewSamples { n });
        }
        Ok((1..=n)
            .map(|i| self.eval(i as f64 / n as f64).expect("i/n lies in (0, 1]"))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    /// Independent oracle: de Casteljau evaluation by repeated lerping.
    fn de_casteljau(c: &BezierCubic, t: f64) -> Vec3 {
        let lerp = |a: Vec3, b: Vec3| a * (1.0 - t) + b * t;
        let q0 = lerp(c.p[0], c.p[1]);
        let q1 = lerp(c.p[1], c.p[2]);
        let q2 = lerp(c.p[2], c.p[3]);
        let r0 = lerp(q0, q1);
        let r1 = lerp(q1, q2);
        lerp(r0, r1)
    }

    #[test]
    fn constant_curve_evaluates_to_its_point() {
        let c = BezierCubic::constant(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(c.eval(0.7).unwrap(), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn endpoints_interpolate_p0_and_p3() {
        let c = BezierCubic::new(
            Vec3::new(0.1, -0.4, 2.0),
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(-3.0, 0.5, 0.0),
            Vec3::new(2.0, 2.0, -2.0),
        );
        assert_eq!(c.eval(0.0).unwrap(), c.p[0]);
        assert_eq!(c.eval(1.0).unwrap(), c.p[3]);
    }

    #[test]
    fn midpoint_matches_hand_expansion() {
        // (p0 + 3p1 + 3p2 + p3) / 8 with p0 = p1 = 0, p2 = p3 = (1,1,1)
        // gives (0 + 0 + 3 + 1)/8 = 0.5 per axis.
        let z = Vec3::zeros();
        let o = Vec3::new(1.0, 1.0, 1.0);
        let c = BezierCubic::new(z, z, o, o);
        assert_abs_diff_eq!(c.eval(0.5).unwrap(), Vec3::new(0.5, 0.5, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn eval_rejects_t_outside_unit_interval() {
        let c = BezierCubic::constant(Vec3::zeros());
        assert_eq!(c.eval(-0.01).unwrap_err(), GeomError::ParamOutOfRange { t: -0.01 });
        assert_eq!(c.eval(1.01).unwrap_err(), GeomError::ParamOutOfRange { t: 1.01 });
    }

    #[test]
    fn sample_excludes_start_and_ends_at_p3() {
        let z = Vec3::zeros();
        let o = Vec3::new(1.0, 0.0, 0.0);
        let c = BezierCubic::new(z, z, o, o);
        let pts = c.sample(2).unwrap();
        assert_eq!(pts.len(), 2);
        assert_abs_diff_eq!(pts[0], Vec3::new(0.5, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(pts[1], o);
    }

    #[test]
    fn sample_of_constant_curve_is_constant() {
        let c = BezierCubic::constant(Vec3::new(0.2, 0.0, -0.3));
        let pts = c.sample(180).unwrap();
        assert_eq!(pts.len(), 180);
        // Bernstein weights sum to 1 only up to rounding, hence the epsilon.
        assert!(pts.iter().all(|p| (p - c.p[0]).amax() < 1e-12));
        assert_eq!(*pts.last().unwrap(), c.p[3]);
    }

    #[test]
    fn sample_rejects_fewer_than_two_points() {
        let c = BezierCubic::constant(Vec3::zeros());
        assert_eq!(c.sample(1).unwrap_err(), GeomError::TooFewSamples { n: 1 });
    }

    #[test]
    fn gravity_identity_orientation_points_down() {
        assert_eq!(gravity_in_base(&Transform::identity()), Vec3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn gravity_after_quarter_pitch_is_unit_and_axial() {
        let t = Transform::new(
            EulerRPY::new(0.0, std::f64::consts::FRAC_PI_2, 0.0).to_quat(),
            Vec3::zeros(),
        );
        let g = gravity_in_base(&t);
        assert_relative_eq!(g.norm(), 1.0, epsilon = 1e-12);
        // Pitch forward by +90 deg: the world -z direction lands on base +x.
        assert_abs_diff_eq!(g, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn gravity_after_half_roll_points_up() {
        // Rx(pi) maps base +z to world -z, so world -z is base +z.
        let t = Transform::new(
            EulerRPY::new(std::f64::consts::PI, 0.0, 0.0).to_quat(),
            Vec3::zeros(),
        );
        assert_abs_diff_eq!(gravity_in_base(&t), Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn transform_inverse_and_compose_are_consistent() {
        let t = Transform::new(
            EulerRPY::new(0.3, -0.2, 1.1).to_quat(),
            Vec3::new(1.0, -2.0, 0.5),
        );
        let p = Vec3::new(0.4, 0.7, -1.3);
        assert_abs_diff_eq!(t.inverse_apply(t.apply(p)), p, epsilon = 1e-12);
        assert_abs_diff_eq!(t.inverse().apply(t.apply(p)), p, epsilon = 1e-12);
        let id = t.compose(&t.inverse());
        assert_abs_diff_eq!(id.pos, Vec3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(id.rot.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn normalize_angle_lands_in_half_open_interval() {
        use std::f64::consts::PI;
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(2.5 * PI), 0.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-0.5 * PI), -0.5 * PI, epsilon = 1e-12);
    }

    #[test]
    fn euler_matches_explicit_rotation_product() {
        let e = EulerRPY::new(0.4, -0.7, 1.2);
        let m = e.to_quat().to_rotation_matrix();
        let rx = nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), e.roll);
        let ry = nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), e.pitch);
        let rz = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), e.yaw);
        let prod = rx * ry * rz;
        assert_abs_diff_eq!(m.matrix(), prod.matrix(), epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn polynomial_matches_de_casteljau(
            coords in prop::array::uniform12(-10.0f64..10.0),
            t in 0.0f64..=1.0,
        ) {
            let c = BezierCubic::new(
                Vec3::new(coords[0], coords[1], coords[2]),
                Vec3::new(coords[3], coords[4], coords[5]),
                Vec3::new(coords[6], coords[7], coords[8]),
                Vec3::new(coords[9], coords[10], coords[11]),
            );
            let a = c.eval(t).unwrap();
            let b = de_casteljau(&c, t);
            prop_assert!((a - b).amax() < 1e-12, "{a:?} vs {b:?}");
        }

        #[test]
        fn eval_stays_in_control_point_bounding_box(
            coords in prop::array::uniform12(-10.0f64..10.0),
            t in 0.0f64..=1.0,
        ) {
            let c = BezierCubic::new(
                Vec3::new(coords[0], coords[1], coords[2]),
                Vec3::new(coords[3], coords[4], coords[5]),
                Vec3::new(coords[6], coords[7], coords[8]),
                Vec3::new(coords[9], coords[10], coords[11]),
            );
            let v = c.eval(t).unwrap();
            for axis in 0..3 {
                let lo = c.p.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
                let hi = c.p.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v[axis] >= lo - 1e-12 && v[axis] <= hi + 1e-12);
            }
        }

        #[test]
        fn gravity_direction_is_always_unit(
            roll in -3.1f64..3.1, pitch in -3.1f64..3.1, yaw in -3.1f64..3.1,
        ) {
            let t = Transform::new(EulerRPY::new(roll, pitch, yaw).to_quat(), Vec3::zeros());
            prop_assert!((gravity_in_base(&t).norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn euler_round_trip_away_from_gimbal_lock(
            roll in -3.1f64..3.1,
            pitch in -1.47f64..1.47,
            yaw in -3.1f64..3.1,
        ) {
            let e = EulerRPY::new(roll, pitch, yaw);
            let back = EulerRPY::from_quat(&e.to_quat());
            prop_assert!((back.roll - e.roll).abs() < 1e-9);
            prop_assert!((back.pitch - e.pitch).abs() < 1e-9);
            prop_assert!((back.yaw - e.yaw).abs() < 1e-9);
        }
    }
}
