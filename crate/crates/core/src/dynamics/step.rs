use serde::{Deserialize, Serialize};

use super::contact::contact_force;
use super::{
    activation_step, check_dim, muscle_force, muscle_geometry, ContactForce, DynamicsError, Kinematics,
    Morphology, SystemState,
};
use crate::environments::Terrain;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    /// Integration step (s).
    pub dt: T,
    /// Gravitational acceleration along −y (m/s²).
    pub gravity: T,
    pub contact_stiffness: T,
    pub contact_damping: T,
    pub friction_coeff: T,
    /// Viscous tangential coefficient; the tangential force is capped by Coulomb friction.
    pub friction_damping: T,
    /// Soft joint-limit spring and damper.
    pub limit_stiffness: T,
    pub limit_damping: T,
    /// Generalized external torque; empty means zero.
    pub external_torque: Vec<T>,
    /// Integration steps per control step; controls are held in between.
    pub control_substeps: usize,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            gravity: T::lit(9.81),
            contact_stiffness: T::lit(2.0e4),
            contact_damping: T::lit(400.0),
            friction_coeff: T::lit(0.9),
            friction_damping: T::lit(600.0),
            limit_stiffness: T::lit(300.0),
            limit_damping: T::lit(1.0),
            external_torque: Vec::new(),
            control_substeps: 10,
        }
    }
}

impl<T: Real> SimConfig<T> {
    /// Duration of one control step.
    pub fn control_dt(&self) -> T {
        self.dt * T::from_usize(self.control_substeps).unwrap()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidMorphology(m.to_string()));
        if !(self.dt > T::zero()) {
            return bad("dt must be positive");
        }
        if self.control_substeps == 0 {
            return bad("control_substeps must be at least 1");
        }
        let nonneg = [
            self.contact_stiffness,
            self.contact_damping,
            self.friction_coeff,
            self.friction_damping,
            self.limit_stiffness,
            self.limit_damping,
        ];
        if nonneg.iter().any(|v| *v < T::zero() || !v.is_finite()) {
            return bad("contact and limit parameters must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFlags {
    /// A soft joint-limit torque was applied.
    pub limit_violation: bool,
    /// A control outside `[0, 1]` was clamped.
    pub control_clamped: bool,
}

impl StepFlags {
    pub fn merge(&mut self, other: StepFlags) {
        self.limit_violation |= other.limit_violation;
        self.control_clamped |= other.control_clamped;
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub state: SystemState<T>,
    pub flags: StepFlags,
}

/// Generalized forces on the right-hand side of the equations of motion,
/// excluding `c(q, q̇)`: actuators, contacts, joint limits and `τ_ext`.
pub fn generalized_forces<T: Real>(
    state: &SystemState<T>,
    kin: &Kinematics<T>,
    morphology: &Morphology<T>,
    config: &SimConfig<T>,
    terrain: &Terrain<T>,
) -> Result<(Vec<T>, Vec<ContactForce<T>>, bool), DynamicsError> {
    let dq = morphology.dof();
    let (q, qdot) = (state.q(), state.qdot());
    let mut tau = vec![T::zero(); dq];

    let (l, v) = muscle_geometry(q, qdot, morphology)?;
    for m in 0..morphology.n_muscles() {
        let f = muscle_force(l[m], v[m], state.muscles.a[m], &morphology.muscle_params[m])?;
        // Jₘ = −ρ, so Jₘᵀ f adds −ρ[m][j] · f to coordinate j.
        for (j, r) in morphology.moment_arms[m].iter().enumerate() {
            tau[j] = tau[j] - *r * f;
        }
    }

    let mut contacts = Vec::with_capacity(morphology.contact_points.len());
    for i in 0..morphology.contact_points.len() {
        let c = contact_force(morphology, kin, i, config, terrain);
        if c.active {
            let link = morphology.contact_points[i].link;
            morphology.for_each_jacobian_column(kin, link, c.position, |j, col| {
                tau[j] = tau[j] + col[0] * c.force[0] + col[1] * c.force[1];
            });
        }
        contacts.push(c);
    }

    let mut limited = false;
    for (j, &(lo, hi)) in morphology.joint_limits.iter().enumerate() {
        let over = if q[j] < lo {
            lo - q[j]
        } else if q[j] > hi {
            hi - q[j]
        } else {
            continue;
        };
        limited = true;
        tau[j] = tau[j] + config.limit_stiffness * over - config.limit_damping * qdot[j];
    }

    for (t, (d, v)) in tau.iter_mut().zip(morphology.joint_damping.iter().zip(qdot)) {
        *t = *t - *d * *v;
    }

    if !config.external_torque.is_empty() {
        check_dim("external torque", dq, config.external_torque.len())?;
        for (t, e) in tau.iter_mut().zip(&config.external_torque) {
            *t = *t + *e;
        }
    }
    Ok((tau, contacts, limited))
}

/// One semi-implicit Euler step with controls `u` held over `config.dt`.
pub fn dynamics_step<T: Real>(
    state: &SystemState<T>,
    u: &[T],
    morphology: &Morphology<T>,
    config: &SimConfig<T>,
    terrain: &Terrain<T>,
) -> Result<StepOutcome<T>, DynamicsError> {
    let (dq, du) = (morphology.dof(), morphology.n_muscles());
    check_dim("q", dq, state.joints.q.len())?;
    check_dim("qdot", dq, state.joints.qdot.len())?;
    check_dim("activations", du, state.muscles.a.len())?;
    check_dim("controls", du, u.len())?;
    if !state.is_finite() {
        return Err(DynamicsError::NonFinite("state"));
    }

    let kin = morphology.kinematics(state.q(), state.qdot());
    let mass = morphology.mass_matrix(&kin);
    let bias = morphology.bias_forces(&kin, config.gravity);
    let (tau, _, limited) = generalized_forces(state, &kin, morphology, config, terrain)?;
    let rhs: Vec<T> = tau.iter().zip(&bias).map(|(t, c)| *t - *c).collect();
    let qddot = mass
        .cholesky()
        .ok_or(DynamicsError::SingularMassMatrix { t: state.t.to_f64_lossy() })?
        .solve(&rhs);

    let dt = config.dt;
    let qdot: Vec<T> = state.qdot().iter().zip(&qddot).map(|(v, a)| *v + dt * *a).collect();
    let q: Vec<T> = state.q().iter().zip(&qdot).map(|(x, v)| *x + dt * *v).collect();

    let mut flags = StepFlags { limit_violation: limited, control_clamped: false };
    let mut a = Vec::with_capacity(du);
    for m in 0..du {
        let up = activation_step(state.muscles.a[m], u[m], &morphology.muscle_params[m], dt)?;
        flags.control_clamped |= up.control_clamped;
        a.push(up.activation);
    }
    let (l, v) = muscle_geometry(&q, &qdot, morphology)?;

    let object = state.object.map(|mut obj| {
        let kin = morphology.kinematics(&q, &qdot);
        if let Some((tip, tip_angle)) = morphology.end_effector(&kin) {
            update_object(&mut obj, tip, tip_angle);
        }
        obj
    });

    let next = SystemState {
        joints: super::JointState { q, qdot },
        muscles: super::MuscleState { a, l, v },
        t: state.t + dt,
        object,
    };
    Ok(StepOutcome { state: next, flags })
}

/// Distance below which a free object attaches to the end effector.
pub const GRASP_RADIUS: f64 = 0.05;

pub fn update_object<T: Real>(obj: &mut super::ObjectPose<T>, tip: [T; 2], tip_angle: T) {
    let (s, c) = tip_angle.sin_cos();
    if !obj.grasped {
        let d = [obj.x - tip[0], obj.y - tip[1]];
        if (d[0] * d[0] + d[1] * d[1]).sqrt() < T::lit(GRASP_RADIUS) {
            obj.grasped = true;
            obj.offset_local = [c * d[0] + s * d[1], -s * d[0] + c * d[1]];
            obj.offset_angle = obj.angle - tip_angle;
        }
        return;
    }
    let o = obj.offset_local;
    obj.x = tip[0] + c * o[0] - s * o[1];
    obj.y = tip[1] + s * o[0] + c * o[1];
    obj.angle = tip_angle + obj.offset_angle;
}
