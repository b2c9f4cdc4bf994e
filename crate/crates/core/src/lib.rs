//! Muscle-driven planar bodies, a two-level posture-space MPC, and an
//! iterative search over linear reward programs driven by a judge and a
//! proposal synthesizer.
//!
//! The numerical core ([`dynamics`], [`controller`], reward evaluation) is
//! generic over [`Real`]; the aliases below fix it to `f64`, which is what
//! the judging, synthesis and persistence layers use.

pub mod controller;
pub mod dynamics;
pub mod environments;
pub mod judge;
pub mod learn;
pub mod linalg;
pub mod prompts;
pub mod render;
pub mod reward;
pub mod scalar;
pub mod synthesis;
pub mod transport;

pub use scalar::Real;

pub type SystemState = dynamics::SystemState<f64>;
pub type Morphology = dynamics::Morphology<f64>;
pub type MuscleParams = dynamics::MuscleParams<f64>;
pub type SimConfig = dynamics::SimConfig<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type Terrain = environments::Terrain<f64>;
pub type Task = environments::Task<f64>;
pub type TaskContext = reward::TaskContext<f64>;

pub type SystemStateF32 = dynamics::SystemState<f32>;
pub type TaskF32 = environments::Task<f32>;
pub type PlannerConfig = controller::PlannerConfig<f64>;
pub type PostureTarget = controller::PostureTarget<f64>;
