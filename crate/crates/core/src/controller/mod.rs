//! Two-level posture controller.
//!
//! A sampling planner picks target angles for a few major joints; a
//! proportional law turns the posture error into actuator commands using
//! each actuator's moment arms.

mod planner;

pub use planner::{mppi_weights, plan, plan_with_cost, MpcPolicy, PlanOutcome, PlanProblem};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Morphology, SystemState};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("invalid planner config: {0}")]
    Config(String),
    #[error("posture has {got} entries, morphology has {expected} posture coordinates")]
    Dimension { expected: usize, got: usize },
    #[error("all {n} candidates produced non-finite costs at t={t}: {detail}")]
    AllCandidatesFailed { n: usize, t: f64, detail: String },
}

/// Target angles for the morphology's posture coordinates, in their order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureTarget<T> {
    pub z: Vec<T>,
}

impl<T: Real> PostureTarget<T> {
    pub fn new(z: Vec<T>) -> Self {
        Self { z }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig<T> {
    /// Lookahead in control steps.
    pub horizon: usize,
    pub n_samples: usize,
    /// Standard deviation of candidate sampling (rad).
    pub noise_sigma: T,
    /// MPPI temperature.
    pub temperature: T,
    /// Share of candidates drawn around the current posture.
    pub instant_fraction: f64,
    /// Control steps between plans.
    pub replan_interval: usize,
    /// Global gain (N/m per unit posture error).
    pub k_bar: T,
}

pub const DEFAULT_K_BAR: f64 = 1.0e6;

impl<T: Real> Default for PlannerConfig<T> {
    fn default() -> Self {
        Self {
            horizon: 10,
            n_samples: 64,
            noise_sigma: T::lit(0.15),
            temperature: T::one(),
            instant_fraction: 0.25,
            replan_interval: 5,
            k_bar: T::lit(DEFAULT_K_BAR),
        }
    }
}

impl<T: Real> PlannerConfig<T> {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let err = |m: &str| Err(ControllerError::Config(m.into()));
        if self.horizon < 1 {
            return err("horizon must be at least 1");
        }
        if self.n_samples < 1 {
            return err("n_samples must be at least 1");
        }
        if !(self.temperature > T::zero()) || !self.temperature.is_finite() {
            return err("temperature must be positive");
        }
        if !(self.noise_sigma >= T::zero()) || !self.noise_sigma.is_finite() {
            return err("noise_sigma must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.instant_fraction) {
            return err("instant_fraction must lie in [0, 1]");
        }
        if self.replan_interval < 1 {
            return err("replan_interval must be at least 1");
        }
        if !(self.k_bar >= T::zero()) || !self.k_bar.is_finite() {
            return err("k_bar must be non-negative");
        }
        Ok(())
    }

    /// Number of candidates centred on the current posture.
    pub fn instant_count(&self) -> usize {
        let n = self.n_samples;
        let k = (self.instant_fraction * n as f64).ceil() as usize;
        if self.instant_fraction < 1.0 {
            k.min(n - 1)
        } else {
            n
        }
    }
}

/// Current angles of the posture coordinates.
pub fn posture_map<T: Real>(state: &SystemState<T>, morphology: &Morphology<T>) -> PostureTarget<T> {
    PostureTarget { z: morphology.posture_indices.iter().map(|&j| state.joints.q[j]).collect() }
}

fn clamp_posture<T: Real>(z: &mut [T], morphology: &Morphology<T>) {
    for (x, &j) in z.iter_mut().zip(&morphology.posture_indices) {
        let (lo, hi) = morphology.joint_limits[j];
        *x = x.clamp_to(lo, hi);
    }
}

/// Draws `n_samples` candidates. Candidate 0 is `z_mean` itself, the next
/// [`PlannerConfig::instant_count`] are perturbations of the current
/// posture and the rest perturb `z_mean`. With `instant_fraction = 1` every
/// candidate, including the first, is centred on the current posture.
pub fn sample_candidates<T: Real, R: Rng + ?Sized>(
    z_mean: &PostureTarget<T>,
    state: &SystemState<T>,
    morphology: &Morphology<T>,
    config: &PlannerConfig<T>,
    rng: &mut R,
) -> Vec<PostureTarget<T>> {
    let current = posture_map(state, morphology);
    let n = config.n_samples;
    let n_instant = config.instant_count();
    let sigma = config.noise_sigma.to_f64_lossy();
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let all_instant = n_instant == n;
        let centre = if all_instant || (1..=n_instant).contains(&k) { &current } else { z_mean };
        let mut z = centre.z.clone();
        if k > 0 && sigma > 0.0 {
            for x in z.iter_mut() {
                *x = *x + T::lit(normal.sample(rng));
            }
        }
        clamp_posture(&mut z, morphology);
        out.push(PostureTarget { z });
    }
    out
}

/// Per-actuator proportional gains `K = k̄ Σ_{i∈I_z} |ρᵢ Δzᵢ|`.
pub fn actuator_gains<T: Real>(
    state: &SystemState<T>,
    z_star: &PostureTarget<T>,
    morphology: &Morphology<T>,
    k_bar: T,
) -> Vec<T> {
    let idx = &morphology.posture_indices;
    morphology
        .moment_arms
        .iter()
        .map(|rho| {
            let s: T = idx.iter().zip(&z_star.z).map(|(&j, z)| (rho[j] * (*z - state.joints.q[j])).abs()).sum();
            k_bar * s
        })
        .collect()
}

/// Desired actuator forces `f* = min(0, K (l* − l))`, where `l*` is the
/// length the actuator would have at the target posture.
pub fn desired_forces<T: Real>(
    state: &SystemState<T>,
    z_star: &PostureTarget<T>,
    morphology: &Morphology<T>,
    k_bar: T,
) -> Vec<T> {
    let gains = actuator_gains(state, z_star, morphology, k_bar);
    let idx = &morphology.posture_indices;
    morphology
        .moment_arms
        .iter()
        .zip(gains)
        .map(|(rho, k)| {
            // Lengths are affine in q, so l* − l only involves the replaced coordinates.
            let dl: T = idx.iter().zip(&z_star.z).map(|(&j, z)| -rho[j] * (*z - state.joints.q[j])).sum();
            (k * dl).min(T::zero())
        })
        .collect()
}

/// Commands in `[0, 1]` that would produce the desired forces at unit
/// force-length and force-velocity factors.
pub fn low_level_control<T: Real>(
    state: &SystemState<T>,
    z_star: &PostureTarget<T>,
    morphology: &Morphology<T>,
    k_bar: T,
) -> Vec<T> {
    desired_forces(state, z_star, morphology, k_bar)
        .into_iter()
        .zip(&morphology.muscle_params)
        .map(|(f, p)| (-f / p.f_max).clamp_to(T::zero(), T::one()))
        .collect()
}
