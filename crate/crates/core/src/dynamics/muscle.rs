use serde::{Deserialize, Serialize};

use super::{check_dim, DynamicsError, Morphology};
use crate::scalar::Real;

/// Per-actuator constants of the force and activation laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuscleParams<T> {
    /// Peak isometric force (N).
    pub f_max: T,
    /// Length of peak active force (m).
    pub l_opt: T,
    /// Width of the Gaussian force-length curve, relative to `l_opt`.
    pub width: T,
    /// Shortening rate at which active force vanishes (m/s).
    pub v_max: T,
    /// Passive stiffness beyond `l_opt` (N/m).
    pub k_passive: T,
    pub tau_act: T,
    pub tau_deact: T,
}

impl<T: Real> Default for MuscleParams<T> {
    fn default() -> Self {
        Self {
            f_max: T::lit(500.0),
            l_opt: T::lit(0.2),
            width: T::lit(0.5),
            v_max: T::lit(2.0),
            k_passive: T::lit(500.0),
            tau_act: T::lit(0.01),
            tau_deact: T::lit(0.04),
        }
    }
}

impl<T: Real> MuscleParams<T> {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("f_max", self.f_max),
            ("l_opt", self.l_opt),
            ("width", self.width),
            ("v_max", self.v_max),
            ("k_passive", self.k_passive),
            ("tau_act", self.tau_act),
            ("tau_deact", self.tau_deact),
        ];
        for (name, v) in fields {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.tau_act > self.tau_deact {
            return Err("tau_act must not exceed tau_deact".into());
        }
        Ok(())
    }

    /// Active force-length factor, 1 at `l_opt`.
    pub fn force_length(&self, l: T) -> T {
        let x = (l - self.l_opt) / (self.width * self.l_opt);
        (-(x * x)).exp()
    }

    /// Force-velocity factor of the shortening rate: 1 isometric, 0 at
    /// `v_max`, capped at 1.5 when lengthening.
    pub fn force_velocity(&self, shortening_rate: T) -> T {
        (T::one() - shortening_rate / self.v_max).clamp_to(T::zero(), T::lit(1.5))
    }

    pub fn passive(&self, l: T) -> T {
        self.k_passive * (l - self.l_opt).max(T::zero())
    }
}

/// Actuator force with the tensile-negative convention, so the result is never positive.
///
/// `v` is the rate of change of the actuator length; negative values mean shortening.
pub fn muscle_force<T: Real>(l: T, v: T, a: T, params: &MuscleParams<T>) -> Result<T, DynamicsError> {
    if !l.is_finite() || !v.is_finite() || !a.is_finite() {
        return Err(DynamicsError::NonFinite("muscle force inputs"));
    }
    if !(l > T::zero()) {
        return Err(DynamicsError::NonPositiveLength(l.to_f64_lossy()));
    }
    let active = a * params.f_max * params.force_length(l) * params.force_velocity(-v);
    Ok(-(active + params.passive(l)))
}

/// Actuator lengths `l = l₀ − ρ q` and rates `v = −ρ q̇`.
pub fn muscle_geometry<T: Real>(
    q: &[T],
    qdot: &[T],
    morphology: &Morphology<T>,
) -> Result<(Vec<T>, Vec<T>), DynamicsError> {
    let dq = morphology.dof();
    check_dim("q", dq, q.len())?;
    check_dim("qdot", dq, qdot.len())?;
    let mut l = morphology.rest_lengths.clone();
    let mut v = vec![T::zero(); morphology.n_muscles()];
    for (m, row) in morphology.moment_arms.iter().enumerate() {
        for j in 0..dq {
            l[m] = l[m] - row[j] * q[j];
            v[m] = v[m] - row[j] * qdot[j];
        }
    }
    Ok((l, v))
}
