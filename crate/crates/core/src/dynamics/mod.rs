//! Muscle-driven planar articulated chains.
//!
//! Joint space follows `M(q) q̈ + c(q, q̇) = Jₘᵀ fₘ + J_cᵀ f_c + τ_ext` where
//! actuator lengths are affine in `q` (constant moment arms) and every
//! actuator is a first-order activation lag feeding a Hill-style force law.

mod activation;
mod body;
mod contact;
mod muscle;
mod rollout;
mod state;
mod step;

pub use activation::{activation_step, ActivationUpdate};
pub use body::{BaseKind, ContactPoint, Kinematics, Link, Morphology};
pub use contact::ContactForce;
pub use muscle::{muscle_force, muscle_geometry, MuscleParams};
pub use rollout::{
    read_trajectory_csv, rollout, write_trajectory_csv, ConstantPolicy, Policy, PolicyError, RolloutError,
    Trajectory, TrajectoryIoError, TrajectoryStep, ZeroPolicy,
};
pub use state::{JointState, MuscleState, ObjectPose, SystemState};
pub use step::{dynamics_step, generalized_forces, update_object as step_update_object, SimConfig, StepFlags, StepOutcome, GRASP_RADIUS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("mass matrix is not positive definite at t={t}")]
    SingularMassMatrix { t: f64 },
    #[error("invalid morphology: {0}")]
    InvalidMorphology(String),
    #[error("muscle length must be positive, got {0}")]
    NonPositiveLength(f64),
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), DynamicsError> {
    if expected == got {
        Ok(())
    } else {
        Err(DynamicsError::DimensionMismatch { what, expected, got })
    }
}
