use super::{Kinematics, Morphology, SimConfig};
use crate::environments::Terrain;
use crate::scalar::Real;

/// Penalty force acting at one contact point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactForce<T> {
    pub position: [T; 2],
    pub force: [T; 2],
    pub active: bool,
}

/// Spring-damper normal force with a Coulomb-capped viscous tangential force.
pub(crate) fn contact_force<T: Real>(
    morphology: &Morphology<T>,
    kin: &Kinematics<T>,
    point: usize,
    config: &SimConfig<T>,
    terrain: &Terrain<T>,
) -> ContactForce<T> {
    let cp = &morphology.contact_points[point];
    let p = morphology.point_position(kin, cp.link, cp.at);
    let gap = p[1] - terrain.height(p[0]);
    if gap >= T::zero() {
        return ContactForce { position: p, force: [T::zero(); 2], active: false };
    }
    let s = terrain.slope_at(p[0]);
    let norm = (T::one() + s * s).sqrt();
    let n = [-s / norm, T::one() / norm];
    let t = [T::one() / norm, s / norm];
    let v = morphology.point_velocity(kin, cp.link, cp.at);
    let vn = v[0] * n[0] + v[1] * n[1];
    let vt = v[0] * t[0] + v[1] * t[1];
    let depth = -gap / norm;
    let fn_ = (config.contact_stiffness * depth - config.contact_damping * vn).max(T::zero());
    let cap = config.friction_coeff * fn_;
    let ft = (-config.friction_damping * vt).clamp_to(-cap, cap);
    ContactForce {
        position: p,
        force: [fn_ * n[0] + ft * t[0], fn_ * n[1] + ft * t[1]],
        active: true,
    }
}
