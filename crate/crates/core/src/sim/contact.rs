//! Penalty contact between foot spheres and tile tops (or the rigid floor
//! beyond the grid), plus the collision probes that detect forbidden
//! ground contact of non-foot links.

use crate::geom::Vec3;
use crate::robot::NUM_LEGS;
use crate::terrain::TileGrid;

use super::dynamics::DynamicsStage;
use super::{LinkId, SimConfig};

/// One resolved foot contact for a substep.
#[derive(Clone, Copy, Debug)]
pub struct FootContact {
    pub leg: usize,
    /// Sprung tile receiving the reaction, if any.
    pub tile: Option<usize>,
    pub penetration: f64,
    pub normal_force: f64,
    /// World force applied to the foot at `point`.
    pub force: Vec3,
    pub point: Vec3,
}

/// Apparent inverse masses of one foot's contact point, used to cap
/// damping and friction forces so a single substep cannot reverse the
/// relative velocity it damps. Refreshing once per control tick is
/// accurate enough for the cap's purpose.
#[derive(Clone, Copy, Debug, Default)]
pub struct FootInvMass {
    pub normal: f64,
    pub tangent: f64,
}

pub fn foot_inverse_masses(stage: &DynamicsStage) -> [FootInvMass; NUM_LEGS] {
    std::array::from_fn(|leg| {
        let point = contact_point(stage, leg);
        let wx = stage.apparent_inverse_mass(leg, point, Vec3::x());
        let wy = stage.apparent_inverse_mass(leg, point, Vec3::y());
        let wz = stage.apparent_inverse_mass(leg, point, Vec3::z());
        FootInvMass { normal: wz, tangent: wx.max(wy) }
    })
}

fn contact_point(stage: &DynamicsStage, leg: usize) -> Vec3 {
    stage.kin.legs[leg].foot_w
}

/// Resolves foot-vs-terrain contacts for one substep.
///
/// Normal: F = k_c·δ + c·v_closing, with the total clamped to
/// [0, max_contact_force] (tile-edge steps can otherwise produce
/// multi-kilonewton spikes when a loaded foot crosses onto an unsunk
/// neighbor). Static contacts reduce exactly to k_c·δ.
///
/// The damping coefficient is capped at 1/(2·dt·w), half the explicit
/// single-substep stability limit for a point of apparent inverse mass w.
/// An uncapped coefficient overshoots: the damping impulse reverses the
/// relative velocity every substep and the contact settles into sustained
/// period-2 chatter instead of rest.
///
/// Tangential: viscous damping clamped to the Coulomb cone μ·F_n and the
/// same stability bound.
pub fn resolve_foot_contacts(
    stage: &DynamicsStage,
    grid: &TileGrid,
    cfg: &SimConfig,
    inv_mass: &[FootInvMass; NUM_LEGS],
    dt: f64,
    foot_radius: f64,
    out: &mut Vec<FootContact>,
) {
    out.clear();
    for leg in 0..NUM_LEGS {
        let lk = &stage.kin.legs[leg];
        let query = grid.height_at(lk.foot_w.x, lk.foot_w.y);
        let bottom = lk.foot_w.z - foot_radius;
        let penetration = query.height - bottom;
        if penetration <= 0.0 {
            continue;
        }
        let (tile, tile_zdot) = match query.tile {
            Some(index) => {
                let t = grid.tile(index);
                if t.is_rigid() {
                    (None, 0.0)
                } else {
                    (Some(index), t.zdot)
                }
            }
            None => (None, 0.0),
        };

        let point = lk.foot_w + Vec3::new(0.0, 0.0, -foot_radius);
        let v_point = lk.v_foot + lk.w_lower.cross(&(point - lk.foot_w));
        let closing = tile_zdot - v_point.z;

        let c_n = cfg
            .contact_damping
            .min(0.5 / (dt * inv_mass[leg].normal.max(1e-9)));
        let normal_force = (cfg.contact_stiffness * penetration + c_n * closing)
            .clamp(0.0, cfg.max_contact_force);
        if normal_force == 0.0 {
            continue;
        }

        let v_t = Vec3::new(v_point.x, v_point.y, 0.0);
        let speed = v_t.norm();
        let friction = if speed > 1e-12 {
            let c = cfg
                .contact_damping
                .min(cfg.friction * normal_force / speed)
                .min(0.5 / (dt * inv_mass[leg].tangent.max(1e-9)));
            -v_t * c
        } else {
            Vec3::zeros()
        };

        out.push(FootContact {
            leg,
            tile,
            penetration,
            normal_force,
            force: Vec3::new(friction.x, friction.y, normal_force),
            point,
        });
    }
}

/// A termination probe: a point on a non-foot link tested against the
/// terrain surface with a clearance radius.
#[derive(Clone, Copy, Debug)]
pub struct Probe {
    pub link: LinkId,
    pub point: Vec3,
    pub radius: f64,
}

/// Probe points approximating the collision shapes of the non-end-effector
/// links: the base box by its four bottom corners, each upper-link capsule
/// by its knee end and midpoint, each lower-link capsule by its midpoint
/// (its foot end is the end-effector and exempt).
pub fn termination_probes(stage: &DynamicsStage, base: &crate::geom::Transform, base_size: [f64; 3]) -> Vec<Probe> {
    let mut probes = Vec::with_capacity(4 + NUM_LEGS * 3);
    let [lx, ly, lz] = base_size;
    for sx in [-0.5, 0.5] {
        for sy in [-0.5, 0.5] {
            probes.push(Probe {
                link: LinkId::Base,
                point: base.apply(Vec3::new(sx * lx, sy * ly, -lz / 2.0)),
                radius: 0.0,
            });
        }
    }
    for (leg, lk) in stage.kin.legs.iter().enumerate() {
        probes.push(Probe { link: LinkId::Upper(leg), point: lk.knee_w, radius: 0.03 });
        probes.push(Probe {
            link: LinkId::Upper(leg),
            point: (lk.hip_w + lk.knee_w) / 2.0,
            radius: 0.03,
        });
        probes.push(Probe {
            link: LinkId::Lower(leg),
            point: (lk.knee_w + lk.foot_w) / 2.0,
            radius: 0.025,
        });
    }
    probes
}
