use crate::cpg::NUM_LEGS;
use crate::kinematics::{leg_fk, leg_geometries, JointLimits};
use crate::rbfn::NUM_JOINTS;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

/// Physical parameters of the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotModel {
    pub base_mass: f64,
    /// Mass of each leg, lumped at the middle of the thigh.
    pub leg_mass: f64,
    /// Body box extents (x, y, z) used for inertia and ground checks.
    pub base_size: [f64; 3],
    /// Hip positions in the body frame, LF, RF, LH, RH.
    pub hip_offsets: [[f64; 2]; NUM_LEGS],
    pub torque_limit: f64,
    /// Gains for abduction, hip and knee joints.
    pub gains: [PdGains; 3],
    /// Inertia felt at each joint, reflected rotor plus leg link (kg·m²).
    pub joint_inertia: f64,
    pub joint_limits: JointLimits,
    /// Restoring stiffness (N·m/rad) and damping beyond the joint limits.
    pub limit_stiffness: f64,
    pub limit_damping: f64,
    pub initial_height: f64,
    pub initial_angles: [f64; 3],
    pub gravity: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        Self {
            base_mass: 10.5,
            leg_mass: 2.0,
            base_size: [0.4, 0.12, 0.1],
            hip_offsets: [[0.19, 0.05], [0.19, -0.05], [-0.19, 0.05], [-0.19, -0.05]],
            torque_limit: 33.5,
            gains: [
                PdGains { kp: 80.0, kd: 2.0 },
                PdGains { kp: 120.0, kd: 4.0 },
                PdGains { kp: 90.0, kd: 3.0 },
            ],
            joint_inertia: 0.1,
            joint_limits: JointLimits::default(),
            limit_stiffness: 200.0,
            limit_damping: 2.0,
            initial_height: 0.26,
            initial_angles: [0.0, 0.9, -1.8],
            gravity: 9.81,
        }
    }
}

/// τ = Kp (q̂ − q) − Kd q̇, saturated at ±limit.
pub fn pd_torque(q_hat: f64, q: f64, q_dot: f64, gains: PdGains, limit: f64) -> f64 {
    (gains.kp * (q_hat - q) - gains.kd * q_dot).clamp(-limit, limit)
}

impl RobotModel {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("robot.base_mass", self.base_mass),
            ("robot.leg_mass", self.leg_mass),
            ("robot.torque_limit", self.torque_limit),
            ("robot.joint_inertia", self.joint_inertia),
            ("robot.initial_height", self.initial_height),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.gains.iter().any(|g| !(g.kp >= 0.0 && g.kd >= 0.0)) {
            return Err("robot.gains must be non-negative".into());
        }
        if self.base_size.iter().any(|s| !(*s > 0.0)) {
            return Err("robot.base_size must be positive".into());
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.base_mass + NUM_LEGS as f64 * self.leg_mass
    }

    pub fn hip(&self, leg: usize) -> Vector3<f64> {
        Vector3::new(self.hip_offsets[leg][0], self.hip_offsets[leg][1], 0.0)
    }

    pub fn joint_gains(&self, joint: usize) -> PdGains {
        self.gains[joint % 3]
    }

    /// Body-frame inertia: solid box plus point-mass legs at mid-thigh of
    /// the nominal pose.
    pub fn inertia(&self) -> Matrix3<f64> {
        let [a, b, c] = self.base_size;
        let m = self.base_mass;
        let mut i = Matrix3::from_diagonal(&Vector3::new(
            m * (b * b + c * c) / 12.0,
            m * (a * a + c * c) / 12.0,
            m * (a * a + b * b) / 12.0,
        ));
        let geoms = leg_geometries();
        let q = self.initial_angles;
        for (leg, g) in geoms.iter().enumerate() {
            // mid-thigh: half the thigh, no shank
            let mut half = *g;
            half.thigh_len *= 0.5;
            half.shank_len = 0.0;
            let r = self.hip(leg) + leg_fk([q[0], q[1], 0.0], &half);
            i += self.leg_mass * (Matrix3::identity() * r.norm_squared() - r * r.transpose());
        }
        i
    }

    pub fn initial_joints(&self) -> [f64; NUM_JOINTS] {
        let mut q = [0.0; NUM_JOINTS];
        for leg in 0..NUM_LEGS {
            q[leg * 3..leg * 3 + 3].copy_from_slice(&self.initial_angles);
        }
        q
    }
}

/// Penalty ground contact with an anchored stick-slip friction spring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactModel {
    pub stiffness: f64,
    pub damping: f64,
    pub friction: f64,
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
    /// Velocity scale regularising Coulomb friction on body and knee
    /// contacts (m/s).
    pub slip_velocity: f64,
}

impl Default for ContactModel {
    fn default() -> Self {
        Self {
            stiffness: 3e4,
            damping: 300.0,
            friction: 0.8,
            tangential_stiffness: 2e4,
            tangential_damping: 200.0,
            slip_velocity: 1e-3,
        }
    }
}
