//! Reduced-order rigid-body dynamics: a floating base carrying four massless
//! legs whose joints have their own inertia, penalty ground contact.

use super::model::{pd_torque, ContactModel, RobotModel};
use super::terrain::TerrainSpec;
use crate::cpg::NUM_LEGS;
use crate::kinematics::{knee_position, leg_fk, leg_geometries, leg_jacobian, LegGeometry};
use crate::rbfn::NUM_JOINTS;
use nalgebra::{Matrix3, UnitQuaternion, Vector3};

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pos: Vector3<f64>,
    /// World-frame linear velocity.
    pub vel: Vector3<f64>,
    pub rot: UnitQuaternion<f64>,
    /// World-frame angular momentum about the base origin.
    pub ang_mom: Vector3<f64>,
    /// World-frame angular velocity, derived from `ang_mom`.
    pub omega: Vector3<f64>,
    pub q: [f64; NUM_JOINTS],
    pub qd: [f64; NUM_JOINTS],
    pub torques: [f64; NUM_JOINTS],
    pub foot_contact: [bool; NUM_LEGS],
    /// World-frame ground reaction on each foot.
    pub foot_force: [Vector3<f64>; NUM_LEGS],
    /// Stick points of the friction springs.
    pub anchors: [Option<Vector3<f64>>; NUM_LEGS],
    /// Body corners and knees currently touching the ground.
    pub unexpected: usize,
}

impl RobotState {
    pub fn is_finite(&self) -> bool {
        let v = |x: &Vector3<f64>| x.iter().all(|c| c.is_finite());
        v(&self.pos)
            && v(&self.vel)
            && v(&self.omega)
            && self.rot.coords.iter().all(|c| c.is_finite())
            && self.q.iter().chain(&self.qd).all(|c| c.is_finite())
    }

    pub fn leg_angles(&self, leg: usize) -> [f64; 3] {
        [self.q[3 * leg], self.q[3 * leg + 1], self.q[3 * leg + 2]]
    }

    fn leg_rates(&self, leg: usize) -> Vector3<f64> {
        Vector3::new(self.qd[3 * leg], self.qd[3 * leg + 1], self.qd[3 * leg + 2])
    }
}

#[derive(Debug, Clone)]
pub struct Dynamics {
    pub model: RobotModel,
    pub contact: ContactModel,
    pub terrain: TerrainSpec,
    geoms: [LegGeometry; NUM_LEGS],
    inertia: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
    corners: [Vector3<f64>; 4],
}

impl Dynamics {
    pub fn new(model: RobotModel, contact: ContactModel, terrain: TerrainSpec) -> Self {
        let inertia = model.inertia();
        let inertia_inv = inertia.try_inverse().expect("inertia is positive definite");
        let [a, b, c] = model.base_size;
        let corners = [
            Vector3::new(a / 2.0, b / 2.0, -c / 2.0),
            Vector3::new(a / 2.0, -b / 2.0, -c / 2.0),
            Vector3::new(-a / 2.0, b / 2.0, -c / 2.0),
            Vector3::new(-a / 2.0, -b / 2.0, -c / 2.0),
        ];
        Self {
            model,
            contact,
            terrain,
            geoms: leg_geometries(),
            inertia,
            inertia_inv,
            corners,
        }
    }

    /// Standing pose above the terrain under x = 0, at rest.
    pub fn initial_state(&self, q: [f64; NUM_JOINTS]) -> RobotState {
        let ground = self.terrain.height(0.0, 0.0);
        RobotState {
            pos: Vector3::new(0.0, 0.0, ground + self.model.initial_height),
            vel: Vector3::zeros(),
            rot: UnitQuaternion::identity(),
            ang_mom: Vector3::zeros(),
            omega: Vector3::zeros(),
            q,
            qd: [0.0; NUM_JOINTS],
            torques: [0.0; NUM_JOINTS],
            foot_contact: [false; NUM_LEGS],
            foot_force: [Vector3::zeros(); NUM_LEGS],
            anchors: [None; NUM_LEGS],
            unexpected: 0,
        }
    }

    pub fn set_angular_velocity(&self, s: &mut RobotState, omega: Vector3<f64>) {
        let r = s.rot.to_rotation_matrix();
        s.ang_mom = r * self.inertia * r.transpose() * omega;
        s.omega = omega;
    }

    fn world_inertia_inv(&self, rot: &UnitQuaternion<f64>) -> Matrix3<f64> {
        let r = rot.to_rotation_matrix();
        r.matrix() * self.inertia_inv * r.matrix().transpose()
    }

    /// Foot position in the body frame.
    pub fn foot_body(&self, s: &RobotState, leg: usize) -> Vector3<f64> {
        self.model.hip(leg) + leg_fk(s.leg_angles(leg), &self.geoms[leg])
    }

    pub fn foot_world(&self, s: &RobotState, leg: usize) -> Vector3<f64> {
        s.pos + s.rot * self.foot_body(s, leg)
    }

    pub fn foot_velocity(&self, s: &RobotState, leg: usize) -> Vector3<f64> {
        let q = s.leg_angles(leg);
        let rel = s.rot * self.foot_body(s, leg);
        s.vel + s.omega.cross(&rel) + s.rot * (leg_jacobian(q, &self.geoms[leg]) * s.leg_rates(leg))
    }

    /// Translational, rotational, potential and joint kinetic energy.
    pub fn energy(&self, s: &RobotState) -> f64 {
        let m = self.model.total_mass();
        let joints: f64 = s.qd.iter().map(|w| 0.5 * self.model.joint_inertia * w * w).sum();
        0.5 * m * s.vel.norm_squared()
            + 0.5 * s.omega.dot(&s.ang_mom)
            + m * self.model.gravity * s.pos.z
            + joints
    }

    fn surface(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let n = self.terrain.normal(p.x, p.y);
        let depth = (self.terrain.height(p.x, p.y) - p.z) * n[2];
        (depth, Vector3::new(n[0], n[1], n[2]))
    }

    /// Foot reaction with a stick-slip tangential spring. `None` when the
    /// foot is not pressed into the ground.
    fn foot_reaction(
        &self,
        p: &Vector3<f64>,
        v: &Vector3<f64>,
        anchor: &mut Option<Vector3<f64>>,
    ) -> Option<Vector3<f64>> {
        let c = &self.contact;
        let (depth, n) = self.surface(p);
        let vn = v.dot(&n);
        let normal = c.stiffness * depth - c.damping * vn;
        if depth <= 0.0 || normal <= 0.0 {
            *anchor = None;
            return None;
        }
        let vt = v - vn * n;
        let a = anchor.get_or_insert(*p);
        let mut slip = *p - *a;
        slip -= slip.dot(&n) * n;
        let mut ft = -c.tangential_stiffness * slip - c.tangential_damping * vt;
        let cap = c.friction * normal;
        let mag = ft.norm();
        if mag > cap {
            // sliding: saturate and drag the anchor along
            ft *= cap / mag;
            *anchor = Some(*p + ft / c.tangential_stiffness);
        }
        Some(normal * n + ft)
    }

    /// Penalty force on a body point with regularised Coulomb friction.
    fn point_reaction(&self, p: &Vector3<f64>, v: &Vector3<f64>) -> Option<Vector3<f64>> {
        let c = &self.contact;
        let (depth, n) = self.surface(p);
        if depth <= 0.0 {
            return None;
        }
        let vn = v.dot(&n);
        let normal = (c.stiffness * depth - c.damping * vn).max(0.0);
        let vt = v - vn * n;
        let ft = -c.friction * normal * vt / (vt.norm() + c.slip_velocity);
        Some(normal * n + ft)
    }

    /// Advances the state by `dt` with PD control toward `target`.
    pub fn substep(&self, s: &mut RobotState, target: &[f64; NUM_JOINTS], external: &Vector3<f64>, dt: f64) {
        let m = &self.model;
        let mass = m.total_mass();
        let rot = s.rot.to_rotation_matrix();
        let mut force = Vector3::new(0.0, 0.0, -mass * m.gravity) + external;
        let mut torque = Vector3::zeros();
        let mut qdd = [0.0; NUM_JOINTS];

        for leg in 0..NUM_LEGS {
            let q = s.leg_angles(leg);
            let jac = leg_jacobian(q, &self.geoms[leg]);
            let rel = rot * (m.hip(leg) + leg_fk(q, &self.geoms[leg]));
            let p = s.pos + rel;
            let v = s.vel + s.omega.cross(&rel) + rot * (jac * s.leg_rates(leg));
            let reaction = self.foot_reaction(&p, &v, &mut s.anchors[leg]);
            s.foot_contact[leg] = reaction.is_some();
            let f = reaction.unwrap_or_else(Vector3::zeros);
            s.foot_force[leg] = f;
            force += f;
            torque += rel.cross(&f);
            let generalized = jac.transpose() * (rot.transpose() * f);
            for k in 0..3 {
                let j = 3 * leg + k;
                let tau = pd_torque(target[j], s.q[j], s.qd[j], m.joint_gains(j), m.torque_limit);
                s.torques[j] = tau;
                let (lo, hi) = (m.joint_limits.lower[k], m.joint_limits.upper[k]);
                let limit = if s.q[j] < lo {
                    m.limit_stiffness * (lo - s.q[j]) - m.limit_damping * s.qd[j].min(0.0)
                } else if s.q[j] > hi {
                    m.limit_stiffness * (hi - s.q[j]) - m.limit_damping * s.qd[j].max(0.0)
                } else {
                    0.0
                };
                qdd[j] = (tau + generalized[k] + limit) / m.joint_inertia;
            }
        }

        let mut touching = 0;
        let knees: [Vector3<f64>; NUM_LEGS] =
            std::array::from_fn(|leg| m.hip(leg) + knee_position(s.leg_angles(leg), &self.geoms[leg]));
        for local in self.corners.iter().chain(knees.iter()) {
            let rel = rot * local;
            let p = s.pos + rel;
            let v = s.vel + s.omega.cross(&rel);
            if let Some(f) = self.point_reaction(&p, &v) {
                touching += 1;
                force += f;
                torque += rel.cross(&f);
            }
        }
        s.unexpected = touching;

        // Semi-implicit Euler; the constant gravity term is integrated exactly.
        s.vel += force / mass * dt;
        s.pos += s.vel * dt;
        s.pos.z += 0.5 * m.gravity * dt * dt;
        s.ang_mom += torque * dt;
        let omega = self.world_inertia_inv(&s.rot) * s.ang_mom;
        s.rot = UnitQuaternion::from_scaled_axis(omega * dt) * s.rot;
        s.rot.renormalize();
        s.omega = self.world_inertia_inv(&s.rot) * s.ang_mom;
        for j in 0..NUM_JOINTS {
            s.qd[j] += qdd[j] * dt;
            s.q[j] += s.qd[j] * dt;
        }
    }
}
