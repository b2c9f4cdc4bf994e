use serde::{Deserialize, Serialize};

use crate::scalar::{all_finite, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState<T> {
    pub q: Vec<T>,
    pub qdot: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleState<T> {
    /// Activations in `[0, 1]`.
    pub a: Vec<T>,
    pub l: Vec<T>,
    pub v: Vec<T>,
}

/// Pose of a handheld object. While grasped the pose is slaved to the
/// end effector through a fixed offset expressed in the effector frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose<T> {
    pub x: T,
    pub y: T,
    pub angle: T,
    pub grasped: bool,
    pub offset_local: [T; 2],
    pub offset_angle: T,
}

impl<T: Real> ObjectPose<T> {
    pub fn free(x: T, y: T, angle: T) -> Self {
        Self { x, y, angle, grasped: false, offset_local: [T::zero(); 2], offset_angle: T::zero() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState<T> {
    pub joints: JointState<T>,
    pub muscles: MuscleState<T>,
    pub t: T,
    pub object: Option<ObjectPose<T>>,
}

impl<T: Real> SystemState<T> {
    pub fn q(&self) -> &[T] {
        &self.joints.q
    }

    pub fn qdot(&self) -> &[T] {
        &self.joints.qdot
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && all_finite(&self.joints.q)
            && all_finite(&self.joints.qdot)
            && all_finite(&self.muscles.a)
            && all_finite(&self.muscles.l)
            && all_finite(&self.muscles.v)
            && self.object.is_none_or(|o| o.x.is_finite() && o.y.is_finite() && o.angle.is_finite())
    }
}
