//! Toy morphologies.

use crate::dynamics::{BaseKind, ContactPoint, Link, Morphology, MuscleParams};
use crate::scalar::Real;

fn link<T: Real>(name: &str, parent: Option<usize>, attach: f64, length: f64, mass: f64, com: f64, axis_offset: f64) -> Link<T> {
    Link {
        name: name.to_string(),
        parent,
        attach: T::lit(attach),
        length: T::lit(length),
        mass: T::lit(mass),
        inertia: T::lit(mass * length * length / 12.0),
        com: T::lit(com),
        axis_offset: T::lit(axis_offset),
    }
}

struct MuscleSpec {
    name: String,
    arms: Vec<(usize, f64)>,
    f_max: f64,
    l_opt: f64,
}

fn params<T: Real>(f_max: f64, l_opt: f64) -> MuscleParams<T> {
    MuscleParams {
        f_max: T::lit(f_max),
        l_opt: T::lit(l_opt),
        width: T::lit(0.5),
        v_max: T::lit(10.0 * l_opt),
        k_passive: T::lit(0.5 * f_max),
        tau_act: T::lit(0.01),
        tau_deact: T::lit(0.04),
    }
}

/// Fills actuator tables so every muscle sits at its optimal length in `neutral`.
fn install_muscles<T: Real>(m: &mut Morphology<T>, muscles: Vec<MuscleSpec>, neutral: &[f64]) {
    let dq = m.dof();
    for spec in muscles {
        let mut row = vec![T::zero(); dq];
        let mut shortening = 0.0;
        for (j, r) in spec.arms {
            row[j] = T::lit(r);
            shortening += r * neutral[j];
        }
        m.muscle_names.push(spec.name);
        m.moment_arms.push(row);
        m.rest_lengths.push(T::lit(spec.l_opt + shortening));
        m.muscle_params.push(params(spec.f_max, spec.l_opt));
    }
}

/// Passive joint viscosity (N·m·s/rad).
pub const WALKER_DAMPING: f64 = 3.0;
pub const ARM_DAMPING: f64 = 0.2;

/// Joint coordinates of the walker's standing posture.
pub const WALKER_STANCE: [f64; 9] = [0.0, 0.0, 0.0, 0.15, -0.3, 0.15, 0.15, -0.3, 0.15];

/// Planar biped: torso plus thigh, shank and foot per side, 16 muscles.
///
/// Coordinates: `[x, y, torso pitch, hip_l, knee_l, ankle_l, hip_r, knee_r, ankle_r]`.
/// Positive hip angles swing the leg forward, negative knee angles flex the
/// knee, positive ankle angles lift the toes.
pub fn walker<T: Real>() -> Morphology<T> {
    let pi = std::f64::consts::PI;
    let mut links = vec![link("torso", None, 0.0, 0.5, 20.0, 0.5, pi)];
    for side in ["l", "r"] {
        let base = links.len();
        links.push(link(&format!("thigh_{side}"), Some(0), 0.0, 0.45, 5.0, 0.45, 0.0));
        links.push(link(&format!("shank_{side}"), Some(base), 1.0, 0.45, 3.0, 0.45, 0.0));
        links.push(link(&format!("foot_{side}"), Some(base + 1), 1.0, 0.2, 1.0, 0.4, pi / 2.0));
    }
    let inf = f64::INFINITY;
    let limits = [
        (-inf, inf),
        (-inf, inf),
        (-inf, inf),
        (-0.8, 1.6),
        (-2.2, 0.0),
        (-0.8, 0.6),
        (-0.8, 1.6),
        (-2.2, 0.0),
        (-0.8, 0.6),
    ];
    let mut m = Morphology {
        name: "walker".into(),
        base: BaseKind::Floating,
        base_origin: [T::zero(); 2],
        links,
        muscle_names: Vec::new(),
        moment_arms: Vec::new(),
        rest_lengths: Vec::new(),
        muscle_params: Vec::new(),
        joint_limits: limits.iter().map(|(a, b)| (T::lit(*a), T::lit(*b))).collect(),
        joint_damping: [0.0, 0.0, 0.0, WALKER_DAMPING, WALKER_DAMPING, WALKER_DAMPING, WALKER_DAMPING, WALKER_DAMPING, WALKER_DAMPING]
            .map(T::lit)
            .to_vec(),
        posture_indices: vec![3, 4, 5, 6, 7, 8],
        contact_points: Vec::new(),
        end_effector: None,
    };
    let mut specs = Vec::new();
    for (side, (hip, knee, ankle)) in [("l", (3, 4, 5)), ("r", (6, 7, 8))] {
        let mk = |name: &str, arms: Vec<(usize, f64)>, f_max: f64, l_opt: f64| MuscleSpec {
            name: format!("{name}_{side}"),
            arms,
            f_max,
            l_opt,
        };
        specs.push(mk("hip_flexor", vec![(hip, 0.05)], 1200.0, 0.15));
        specs.push(mk("hip_extensor", vec![(hip, -0.06)], 1500.0, 0.15));
        specs.push(mk("hamstring", vec![(hip, -0.05), (knee, -0.04)], 1000.0, 0.30));
        specs.push(mk("rectus_femoris", vec![(hip, 0.04), (knee, 0.04)], 800.0, 0.30));
        specs.push(mk("vasti", vec![(knee, 0.05)], 2000.0, 0.20));
        specs.push(mk("gastrocnemius", vec![(knee, -0.03), (ankle, -0.05)], 1000.0, 0.25));
        specs.push(mk("soleus", vec![(ankle, -0.05)], 1500.0, 0.10));
        specs.push(mk("tibialis_anterior", vec![(ankle, 0.04)], 600.0, 0.10));
    }
    install_muscles(&mut m, specs, &WALKER_STANCE);
    let point = |name: String, link: usize, at: f64, support: bool| ContactPoint { name, link, at: T::lit(at), support };
    for (side, foot) in [("l", 3), ("r", 6)] {
        m.contact_points.push(point(format!("heel_{side}"), foot, -0.25, true));
        m.contact_points.push(point(format!("toe_{side}"), foot, 1.0, true));
    }
    m.contact_points.push(point("pelvis".into(), 0, 0.0, false));
    m.contact_points.push(point("head".into(), 0, 1.0, false));
    for (side, shank) in [("l", 2), ("r", 5)] {
        m.contact_points.push(point(format!("knee_{side}"), shank, 0.0, false));
    }
    m
}

/// Three-link arm pivoting about the origin in the horizontal plane, one
/// antagonist muscle pair per joint.
pub fn arm<T: Real>() -> Morphology<T> {
    let links = vec![
        link("upper_arm", None, 0.0, 0.30, 1.5, 0.5, 0.0),
        link("forearm", Some(0), 1.0, 0.25, 1.0, 0.5, 0.0),
        link("hand", Some(1), 1.0, 0.12, 0.4, 0.5, 0.0),
    ];
    let limits = [(-1.5, 2.5), (0.0, 2.6), (-1.2, 1.2)];
    let mut m = Morphology {
        name: "arm".into(),
        base: BaseKind::Fixed,
        base_origin: [T::zero(); 2],
        links,
        muscle_names: Vec::new(),
        moment_arms: Vec::new(),
        rest_lengths: Vec::new(),
        muscle_params: Vec::new(),
        joint_limits: limits.iter().map(|(a, b)| (T::lit(*a), T::lit(*b))).collect(),
        joint_damping: vec![T::lit(ARM_DAMPING); 3],
        posture_indices: vec![0, 1, 2],
        contact_points: Vec::new(),
        end_effector: Some((2, T::one())),
    };
    let mk = |name: &str, j: usize, r: f64, f_max: f64| MuscleSpec {
        name: name.to_string(),
        arms: vec![(j, r)],
        f_max,
        l_opt: 0.12,
    };
    let specs = vec![
        mk("shoulder_flexor", 0, 0.03, 400.0),
        mk("shoulder_extensor", 0, -0.03, 400.0),
        mk("elbow_flexor", 1, 0.025, 300.0),
        mk("elbow_extensor", 1, -0.025, 300.0),
        mk("wrist_flexor", 2, 0.015, 120.0),
        mk("wrist_extensor", 2, -0.015, 120.0),
    ];
    install_muscles(&mut m, specs, &[0.6, 1.0, 0.0]);
    m
}

/// Uniform rod of length 1 m and mass 1 kg hanging from a pivot, no muscles.
pub fn pendulum<T: Real>() -> Morphology<T> {
    Morphology {
        name: "pendulum".into(),
        base: BaseKind::Fixed,
        base_origin: [T::zero(); 2],
        links: vec![link("rod", None, 0.0, 1.0, 1.0, 0.5, 0.0)],
        muscle_names: Vec::new(),
        moment_arms: Vec::new(),
        rest_lengths: Vec::new(),
        muscle_params: Vec::new(),
        joint_limits: vec![(T::neg_infinity(), T::infinity())],
        joint_damping: Vec::new(),
        posture_indices: vec![0],
        contact_points: Vec::new(),
        end_effector: Some((0, T::one())),
    }
}

/// The pendulum with one flexor muscle of moment arm 0.05 m.
pub fn single_muscle_joint<T: Real>() -> Morphology<T> {
    let mut m = pendulum();
    m.name = "single_muscle_joint".into();
    install_muscles(
        &mut m,
        vec![MuscleSpec { name: "flexor".into(), arms: vec![(0, 0.05)], f_max: 200.0, l_opt: 0.2 }],
        &[0.0],
    );
    m
}
