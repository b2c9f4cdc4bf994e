use super::{DynamicsError, MuscleParams};
use crate::scalar::Real;

/// Result of one activation update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationUpdate<T> {
    pub activation: T,
    /// The neural command was outside `[0, 1]` and had to be clamped.
    pub control_clamped: bool,
}

/// Advances `da/dt = (u − a) / τ(u, a)` over `dt` with the exact exponential
/// solution. `τ` is the activation constant while rising and the
/// deactivation constant otherwise, so it is constant across the step.
pub fn activation_step<T: Real>(
    a: T,
    u: T,
    params: &MuscleParams<T>,
    dt: T,
) -> Result<ActivationUpdate<T>, DynamicsError> {
    if !a.is_finite() || !u.is_finite() || !dt.is_finite() {
        return Err(DynamicsError::NonFinite("activation update"));
    }
    let (zero, one) = (T::zero(), T::one());
    let control_clamped = u < zero || u > one;
    let u = u.clamp_to(zero, one);
    let a = a.clamp_to(zero, one);
    let tau = if u > a { params.tau_act } else { params.tau_deact };
    let next = u + (a - u) * (-dt / tau).exp();
    Ok(ActivationUpdate { activation: next.clamp_to(zero, one), control_clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> MuscleParams<f64> {
        MuscleParams { tau_act: 0.01, tau_deact: 0.04, ..MuscleParams::default() }
    }

    // Classical RK4 on the activation ODE, used as the independent reference.
    fn rk4(a0: f64, u: f64, p: &MuscleParams<f64>, dt: f64, n: usize) -> f64 {
        let tau = if u > a0 { p.tau_act } else { p.tau_deact };
        let f = |a: f64| (u - a) / tau;
        let h = dt / n as f64;
        let mut a = a0;
        for _ in 0..n {
            let k1 = f(a);
            let k2 = f(a + 0.5 * h * k1);
            let k3 = f(a + 0.5 * h * k2);
            let k4 = f(a + h * k3);
            a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        a
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = params();
        for dt in [1e-4, 0.01, 3.0] {
            assert_eq!(activation_step(0.2, 0.2, &p, dt).unwrap().activation, 0.2);
        }
    }

    #[test]
    fn one_time_constant_from_rest() {
        let p = params();
        let got = activation_step(0.0, 1.0, &p, p.tau_act).unwrap().activation;
        // frozen from the RK4 reference: rk4(0, 1, p, tau_act, 1000)
        let reference = rk4(0.0, 1.0, &p, p.tau_act, 1000);
        assert!((reference - 0.632_120_558_828_557_7).abs() < 1e-12);
        assert!((got - reference).abs() < 1e-12);
    }

    #[test]
    fn long_decay_reaches_zero() {
        let p = params();
        let got = activation_step(1.0, 0.0, &p, 100.0 * p.tau_deact).unwrap().activation;
        assert!(got <= 1e-9);
    }

    #[test]
    fn out_of_range_control_is_clamped_and_flagged() {
        let p = params();
        let up = activation_step(0.5, 1.7, &p, 0.01).unwrap();
        assert!(up.control_clamped);
        assert_eq!(up, activation_step(0.5, 1.0, &p, 0.01).map(|x| ActivationUpdate { control_clamped: true, ..x }).unwrap());
        assert!(!activation_step(0.5, 1.0, &p, 0.01).unwrap().control_clamped);
    }

    #[test]
    fn non_finite_is_an_error() {
        let p = params();
        assert!(activation_step(f64::NAN, 0.0, &p, 0.01).is_err());
        assert!(activation_step(0.0, f64::INFINITY, &p, 0.01).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let p = MuscleParams::<f32> { tau_act: 0.01, tau_deact: 0.04, ..MuscleParams::default() };
        let got = activation_step(0.0f32, 1.0, &p, 0.01).unwrap().activation;
        assert!((got - 0.632_120_56).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn matches_rk4(a in 0.0..=1.0f64, u in 0.0..=1.0f64, dt in 1e-4..0.05f64) {
            let p = params();
            let exact = activation_step(a, u, &p, dt).unwrap().activation;
            prop_assert!((exact - rk4(a, u, &p, dt, 200)).abs() < 1e-6);
        }

        #[test]
        fn stays_in_unit_interval(us in proptest::collection::vec(-0.5..1.5f64, 1..200), dt in 1e-4..0.1f64) {
            let p = params();
            let mut a = 0.0;
            for u in us {
                a = activation_step(a, u, &p, dt).unwrap().activation;
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }
}
