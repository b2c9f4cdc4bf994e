use serde::{Deserialize, Serialize};

use super::{DynamicsError, MuscleParams};
use crate::linalg::SquareMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseKind {
    /// Root link pivots about a fixed point; coordinate `i` is link `i`'s joint.
    Fixed,
    /// Coordinates 0 and 1 are the root's proximal point, 2 is the root angle,
    /// and coordinate `i + 2` is link `i`'s joint.
    Floating,
}

/// Rigid link of a planar tree. Angles accumulate from the root: a link's
/// absolute angle is its parent's plus its own joint coordinate, and its
/// axis points along `(sin φ, −cos φ)` rotated by `axis_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link<T> {
    pub name: String,
    pub parent: Option<usize>,
    /// Position of this link's joint along the parent axis, 0 at the parent's
    /// proximal end and 1 at its distal end.
    pub attach: T,
    pub length: T,
    pub mass: T,
    /// Rotational inertia about the center of mass (kg·m²).
    pub inertia: T,
    /// Center of mass as a fraction of the length from the proximal end.
    pub com: T,
    pub axis_offset: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint<T> {
    pub name: String,
    pub link: usize,
    /// Fraction along the link axis.
    pub at: T,
    /// Part of a foot. Non-support points only keep fallen bodies above ground.
    pub support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Morphology<T> {
    pub name: String,
    pub base: BaseKind,
    /// Pivot of the root link for fixed-base chains.
    pub base_origin: [T; 2],
    pub links: Vec<Link<T>>,
    pub muscle_names: Vec<String>,
    /// Moment-arm matrix ρ, one row per actuator, one column per coordinate.
    pub moment_arms: Vec<Vec<T>>,
    pub rest_lengths: Vec<T>,
    pub muscle_params: Vec<MuscleParams<T>>,
    pub joint_limits: Vec<(T, T)>,
    /// Passive viscous torque per coordinate (N·m·s/rad). Empty means none.
    #[serde(default)]
    pub joint_damping: Vec<T>,
    /// Coordinates the high-level planner works in.
    pub posture_indices: Vec<usize>,
    pub contact_points: Vec<ContactPoint<T>>,
    /// Link and axis fraction of the end effector, if the body has one.
    pub end_effector: Option<(usize, T)>,
}

/// Positions, velocities and velocity-product accelerations of every link's proximal point.
#[derive(Debug, Clone)]
pub struct Kinematics<T> {
    pub angle: Vec<T>,
    pub omega: Vec<T>,
    pub proximal: Vec<[T; 2]>,
    pub proximal_vel: Vec<[T; 2]>,
    pub proximal_bias: Vec<[T; 2]>,
    /// Unit vector along each link's axis.
    pub axis: Vec<[T; 2]>,
}

#[inline]
fn axis<T: Real>(angle: T) -> [T; 2] {
    [angle.sin(), -angle.cos()]
}

#[inline]
fn perp<T: Real>(r: [T; 2]) -> [T; 2] {
    [-r[1], r[0]]
}

impl<T: Real> Morphology<T> {
    pub fn dof(&self) -> usize {
        self.links.len() + self.coord_offset()
    }

    pub fn n_muscles(&self) -> usize {
        self.muscle_names.len()
    }

    fn coord_offset(&self) -> usize {
        match self.base {
            BaseKind::Fixed => 0,
            BaseKind::Floating => 2,
        }
    }

    /// Generalized coordinate of a link's rotational joint.
    pub fn link_coord(&self, link: usize) -> usize {
        link + self.coord_offset()
    }

    /// Whether coordinate `j` is an actuated joint (not a floating-base translation or orientation).
    pub fn is_joint_coord(&self, j: usize) -> bool {
        match self.base {
            BaseKind::Fixed => j < self.dof(),
            BaseKind::Floating => j >= 3 && j < self.dof(),
        }
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: String| Err(DynamicsError::InvalidMorphology(m));
        if self.links.is_empty() {
            return bad("no links".into());
        }
        for (i, link) in self.links.iter().enumerate() {
            match (i, link.parent) {
                (0, None) => {}
                (0, Some(_)) => return bad("root link must not have a parent".into()),
                (_, None) => return bad(format!("link {} has no parent", link.name)),
                (_, Some(p)) if p >= i => return bad(format!("link {} precedes its parent", link.name)),
                _ => {}
            }
            if !(link.length > T::zero() && link.mass > T::zero() && link.inertia > T::zero()) {
                return bad(format!("link {} needs positive length, mass and inertia", link.name));
            }
        }
        let (dq, du) = (self.dof(), self.n_muscles());
        if self.moment_arms.len() != du || self.rest_lengths.len() != du || self.muscle_params.len() != du {
            return bad("actuator tables disagree in length".into());
        }
        for (m, row) in self.moment_arms.iter().enumerate() {
            if row.len() != dq {
                return bad(format!("moment arm row {m} has {} columns, expected {dq}", row.len()));
            }
            if row.iter().all(|r| *r == T::zero()) {
                return bad(format!("actuator {} has no moment arm", self.muscle_names[m]));
            }
            self.muscle_params[m].validate().map_err(DynamicsError::InvalidMorphology)?;
        }
        if !self.joint_damping.is_empty()
            && (self.joint_damping.len() != dq || self.joint_damping.iter().any(|d| !(*d >= T::zero())))
        {
            return bad("joint damping must be empty or one non-negative value per coordinate".into());
        }
        if self.joint_limits.len() != dq {
            return bad("joint limit table must cover every coordinate".into());
        }
        if self.posture_indices.len() > dq || self.posture_indices.iter().any(|&j| j >= dq) {
            return bad("posture indices out of range".into());
        }
        for c in &self.contact_points {
            if c.link >= self.links.len() {
                return bad(format!("contact point {} on unknown link", c.name));
            }
        }
        Ok(())
    }

    pub fn kinematics(&self, q: &[T], qdot: &[T]) -> Kinematics<T> {
        let n = self.links.len();
        let off = self.coord_offset();
        let zero2 = [T::zero(); 2];
        let mut k = Kinematics {
            angle: vec![T::zero(); n],
            omega: vec![T::zero(); n],
            proximal: vec![zero2; n],
            proximal_vel: vec![zero2; n],
            proximal_bias: vec![zero2; n],
            axis: vec![zero2; n],
        };
        for (i, link) in self.links.iter().enumerate() {
            let c = i + off;
            match link.parent {
                None => {
                    k.angle[i] = q[c];
                    k.omega[i] = qdot[c];
                    match self.base {
                        BaseKind::Fixed => k.proximal[i] = self.base_origin,
                        BaseKind::Floating => {
                            k.proximal[i] = [q[0], q[1]];
                            k.proximal_vel[i] = [qdot[0], qdot[1]];
                        }
                    }
                }
                Some(p) => {
                    let parent = &self.links[p];
                    k.angle[i] = k.angle[p] + q[c];
                    k.omega[i] = k.omega[p] + qdot[c];
                    let e = k.axis[p];
                    let r = [e[0] * parent.attach * parent.length, e[1] * parent.attach * parent.length];
                    let w = k.omega[p];
                    let pr = perp(r);
                    k.proximal[i] = [k.proximal[p][0] + r[0], k.proximal[p][1] + r[1]];
                    k.proximal_vel[i] = [k.proximal_vel[p][0] + w * pr[0], k.proximal_vel[p][1] + w * pr[1]];
                    k.proximal_bias[i] =
                        [k.proximal_bias[p][0] - w * w * r[0], k.proximal_bias[p][1] - w * w * r[1]];
                }
            }
            k.axis[i] = axis(k.angle[i] + link.axis_offset);
        }
        k
    }

    /// Offset from a link's proximal point to the point at fraction `at` along its axis.
    pub fn point_offset(&self, kin: &Kinematics<T>, link: usize, at: T) -> [T; 2] {
        let s = at * self.links[link].length;
        let e = kin.axis[link];
        [e[0] * s, e[1] * s]
    }

    pub fn point_position(&self, kin: &Kinematics<T>, link: usize, at: T) -> [T; 2] {
        let r = self.point_offset(kin, link, at);
        [kin.proximal[link][0] + r[0], kin.proximal[link][1] + r[1]]
    }

    pub fn point_velocity(&self, kin: &Kinematics<T>, link: usize, at: T) -> [T; 2] {
        let r = perp(self.point_offset(kin, link, at));
        let w = kin.omega[link];
        [kin.proximal_vel[link][0] + w * r[0], kin.proximal_vel[link][1] + w * r[1]]
    }

    fn point_bias(&self, kin: &Kinematics<T>, link: usize, at: T) -> [T; 2] {
        let r = self.point_offset(kin, link, at);
        let w2 = kin.omega[link] * kin.omega[link];
        [kin.proximal_bias[link][0] - w2 * r[0], kin.proximal_bias[link][1] - w2 * r[1]]
    }

    pub fn com_position(&self, kin: &Kinematics<T>, link: usize) -> [T; 2] {
        self.point_position(kin, link, self.links[link].com)
    }

    pub fn end_effector(&self, kin: &Kinematics<T>) -> Option<([T; 2], T)> {
        self.end_effector.map(|(link, at)| {
            (self.point_position(kin, link, at), kin.angle[link] + self.links[link].axis_offset)
        })
    }

    /// Whole-body center of mass.
    pub fn center_of_mass(&self, kin: &Kinematics<T>) -> [T; 2] {
        let mut acc = [T::zero(); 2];
        let mut total = T::zero();
        for (i, l) in self.links.iter().enumerate() {
            let c = self.com_position(kin, i);
            acc[0] = acc[0] + l.mass * c[0];
            acc[1] = acc[1] + l.mass * c[1];
            total = total + l.mass;
        }
        [acc[0] / total, acc[1] / total]
    }

    /// Calls `f(coordinate, column)` for every nonzero column of the
    /// translational Jacobian of `point` rigidly attached to `link`.
    pub fn for_each_jacobian_column(
        &self,
        kin: &Kinematics<T>,
        link: usize,
        point: [T; 2],
        mut f: impl FnMut(usize, [T; 2]),
    ) {
        if self.base == BaseKind::Floating {
            f(0, [T::one(), T::zero()]);
            f(1, [T::zero(), T::one()]);
        }
        let mut k = Some(link);
        while let Some(i) = k {
            let r = [point[0] - kin.proximal[i][0], point[1] - kin.proximal[i][1]];
            f(self.link_coord(i), perp(r));
            k = self.links[i].parent;
        }
    }

    fn for_each_angular_column(&self, link: usize, mut f: impl FnMut(usize)) {
        let mut k = Some(link);
        while let Some(i) = k {
            f(self.link_coord(i));
            k = self.links[i].parent;
        }
    }

    /// Joint-space inertia matrix `M(q)`.
    pub fn mass_matrix(&self, kin: &Kinematics<T>) -> SquareMatrix<T> {
        let dq = self.dof();
        let mut m = SquareMatrix::zeros(dq);
        let mut cols: Vec<(usize, [T; 2])> = Vec::with_capacity(dq);
        let mut ang: Vec<usize> = Vec::with_capacity(dq);
        for (i, link) in self.links.iter().enumerate() {
            cols.clear();
            ang.clear();
            let c = self.com_position(kin, i);
            self.for_each_jacobian_column(kin, i, c, |j, col| cols.push((j, col)));
            self.for_each_angular_column(i, |j| ang.push(j));
            for &(a, ca) in &cols {
                for &(b, cb) in &cols {
                    m.add_to(a, b, link.mass * (ca[0] * cb[0] + ca[1] * cb[1]));
                }
            }
            for &a in &ang {
                for &b in &ang {
                    m.add_to(a, b, link.inertia);
                }
            }
        }
        m
    }

    /// Coriolis, centrifugal and gravity terms `c(q, q̇)`.
    pub fn bias_forces(&self, kin: &Kinematics<T>, gravity: T) -> Vec<T> {
        let mut c = vec![T::zero(); self.dof()];
        for (i, link) in self.links.iter().enumerate() {
            let p = self.com_position(kin, i);
            let b = self.point_bias(kin, i, link.com);
            let f = [link.mass * b[0], link.mass * (b[1] + gravity)];
            self.for_each_jacobian_column(kin, i, p, |j, col| {
                c[j] = c[j] + col[0] * f[0] + col[1] * f[1];
            });
        }
        c
    }

    pub fn kinetic_energy(&self, kin: &Kinematics<T>) -> T {
        let half = T::lit(0.5);
        self.links.iter().enumerate().fold(T::zero(), |acc, (i, l)| {
            let v = self.point_velocity(kin, i, l.com);
            acc + half * l.mass * (v[0] * v[0] + v[1] * v[1]) + half * l.inertia * kin.omega[i] * kin.omega[i]
        })
    }

    pub fn potential_energy(&self, kin: &Kinematics<T>, gravity: T) -> T {
        self.links
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, l)| acc + l.mass * gravity * self.com_position(kin, i)[1])
    }
}
