//! Quadruped environment built on the reduced-order dynamics.

pub mod dynamics;
pub mod model;
pub mod terrain;

use crate::cpg::{Cpg, CpgConfig, NUM_LEGS};
use crate::env::{EnvError, Environment, Step};
use crate::rbfn::{JointVector, NUM_JOINTS};
use crate::reward::{compute_reward, power, wsm, RewardBreakdown, RewardConfig, RewardInputs};
use crate::rng::Rng;
use dynamics::{Dynamics, RobotState};
pub use model::{pd_torque, ContactModel, PdGains, RobotModel};
use nalgebra::Vector3;
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};
pub use terrain::{Segment, TerrainError, TerrainSpec};

pub const FULL_OBSERVATION: usize = 49;
pub const PARTIAL_OBSERVATION: usize = 37;
/// Cumulative block ends: v, q̇, ψ, dψ, c_f, F_f, p_f.
pub const BLOCK_ENDS: [usize; 7] = [3, 15, 18, 21, 25, 37, 49];
/// Learner-side scale applied to contact forces.
pub const FORCE_FEATURE_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationMode {
    #[default]
    Full,
    /// Without the foot position block.
    Partial,
}

impl ObservationMode {
    pub fn dim(self) -> usize {
        match self {
            ObservationMode::Full => FULL_OBSERVATION,
            ObservationMode::Partial => PARTIAL_OBSERVATION,
        }
    }
}

/// Horizontal push on the base during every other second: [1, 2), [3, 4), ...
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub magnitude: f64,
    /// Seeds the random direction of each push.
    pub seed: u64,
}

impl Disturbance {
    pub fn force_at(&self, t: f64) -> Vector3<f64> {
        let window = t.floor() as u64;
        if window % 2 == 0 || self.magnitude == 0.0 {
            return Vector3::zeros();
        }
        let mut rng = Rng::seed_from_u64(self.seed.wrapping_add(window));
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        Vector3::new(angle.cos(), angle.sin(), 0.0) * self.magnitude
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub robot: RobotModel,
    pub contact: ContactModel,
    pub terrain: TerrainSpec,
    pub control_dt: f64,
    pub substeps: usize,
    pub max_steps: usize,
    pub fall_height: f64,
    pub fall_angle: f64,
    pub terminate_on_fall: bool,
    /// Half-width of the uniform joint-angle jitter applied at reset (rad).
    pub init_jitter: f64,
    pub reward: RewardConfig,
    // The fields below are filled in by the trainer or the command line.
    #[serde(skip)]
    pub observation: ObservationMode,
    #[serde(skip)]
    pub desired_speed: f64,
    /// Rhythm used to decide the desired number of supporting feet.
    #[serde(skip)]
    pub cpg: CpgConfig,
    #[serde(skip)]
    pub disturbance: Option<Disturbance>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            robot: RobotModel::default(),
            contact: ContactModel::default(),
            terrain: TerrainSpec::flat(),
            control_dt: 0.02,
            substeps: 8,
            max_steps: 300,
            fall_height: 0.12,
            fall_angle: 0.8,
            terminate_on_fall: true,
            init_jitter: 0.02,
            reward: RewardConfig::default(),
            observation: ObservationMode::Full,
            desired_speed: 0.5,
            cpg: CpgConfig::default(),
            disturbance: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.robot.validate()?;
        self.terrain.validate().map_err(|e| e.to_string())?;
        if !(self.control_dt > 0.0) || self.substeps == 0 || self.max_steps == 0 {
            return Err("sim.control_dt, sim.substeps and sim.max_steps must be positive".into());
        }
        if !(self.init_jitter >= 0.0) {
            return Err("sim.init_jitter must be non-negative".into());
        }
        if !self.desired_speed.is_finite() {
            return Err("desired_speed must be finite".into());
        }
        Ok(())
    }
}

/// Everything recorded about the last control step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub reward: RewardBreakdown,
    pub power: f64,
    pub wsm: Option<f64>,
    pub base_position: [f64; 3],
    pub rpy: [f64; 3],
    pub forward_speed: f64,
    pub torques: [f64; NUM_JOINTS],
    pub max_abs_torque: f64,
    pub foot_positions: [[f64; 3]; NUM_LEGS],
    pub foot_contacts: [bool; NUM_LEGS],
    pub unexpected_contacts: usize,
    pub fell: bool,
}

pub struct QuadrupedEnv {
    cfg: SimConfig,
    dynamics: Dynamics,
    cpg: Cpg,
    state: RobotState,
    steps: usize,
    info: Option<StepInfo>,
}

impl QuadrupedEnv {
    pub fn new(cfg: SimConfig) -> Result<Self, String> {
        cfg.validate()?;
        let cpg = Cpg::new(cfg.cpg.clone()).map_err(|e| e.to_string())?;
        let dynamics = Dynamics::new(cfg.robot.clone(), cfg.contact, cfg.terrain.clone());
        let state = dynamics.initial_state(cfg.robot.initial_joints());
        Ok(Self {
            cfg,
            dynamics,
            cpg,
            state,
            steps: 0,
            info: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn info(&self) -> Option<&StepInfo> {
        self.info.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn set_disturbance(&mut self, d: Option<Disturbance>) {
        self.cfg.disturbance = d;
    }

    /// Roll, pitch, yaw.
    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = self.state.rot.euler_angles();
        [r, p, y]
    }

    pub fn observation(&self) -> Vec<f64> {
        build_observation(&self.state, &self.dynamics, self.cfg.observation)
    }

    fn fallen(&self) -> bool {
        let s = &self.state;
        let ground = self.dynamics.terrain.height(s.pos.x, s.pos.y);
        let [roll, pitch, _] = self.rpy();
        s.pos.z - ground < self.cfg.fall_height
            || roll.abs() > self.cfg.fall_angle
            || pitch.abs() > self.cfg.fall_angle
    }

    fn desired_supports(&self, t: f64) -> usize {
        (0..NUM_LEGS).filter(|&j| self.cpg.leg_phase(j, t) < 0.5).count()
    }
}

/// v ⊕ q̇ ⊕ ψ ⊕ dψ ⊕ c_f ⊕ F_f ⊕ p_f, velocities and forces in the body frame.
pub fn build_observation(s: &RobotState, dynamics: &Dynamics, mode: ObservationMode) -> Vec<f64> {
    let inv = s.rot.inverse();
    let mut obs = Vec::with_capacity(FULL_OBSERVATION);
    obs.extend((inv * s.vel).iter());
    obs.extend_from_slice(&s.qd);
    let (r, p, y) = s.rot.euler_angles();
    obs.extend([r, p, y]);
    obs.extend((inv * s.omega).iter());
    obs.extend(s.foot_contact.iter().map(|&c| if c { 1.0 } else { 0.0 }));
    for f in &s.foot_force {
        obs.extend((inv * f).iter());
    }
    if mode == ObservationMode::Full {
        for leg in 0..NUM_LEGS {
            obs.extend(dynamics.foot_body(s, leg).iter());
        }
    }
    obs
}

impl Environment for QuadrupedEnv {
    fn observation_dim(&self) -> usize {
        self.cfg.observation.dim()
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        let mut q = self.cfg.robot.initial_joints();
        if self.cfg.init_jitter > 0.0 {
            let j = self.cfg.init_jitter;
            for a in q.iter_mut() {
                *a += rng.gen_range(-j..=j);
            }
        }
        self.state = self.dynamics.initial_state(q);
        self.steps = 0;
        self.info = None;
        self.observation()
    }

    fn step(&mut self, target: &JointVector) -> Result<Step, EnvError> {
        if target.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction);
        }
        let t0 = self.time();
        let h = self.cfg.control_dt / self.cfg.substeps as f64;
        let mut max_torque: f64 = 0.0;
        let mut unexpected = 0;
        for k in 0..self.cfg.substeps {
            let external = self
                .cfg
                .disturbance
                .map_or_else(Vector3::zeros, |d| d.force_at(t0 + k as f64 * h));
            self.dynamics.substep(&mut self.state, target, &external, h);
            max_torque = self.state.torques.iter().fold(max_torque, |m, t| m.max(t.abs()));
            unexpected = unexpected.max(self.state.unexpected);
        }
        self.steps += 1;
        if !self.state.is_finite() {
            return Err(EnvError::Diverged { time: self.time() });
        }

        let s = &self.state;
        let inv = s.rot.inverse();
        let omega_body = inv * s.omega;
        let foot_velocities: [[f64; 3]; NUM_LEGS] = std::array::from_fn(|leg| {
            let v = self.dynamics.foot_velocity(s, leg);
            [v.x, v.y, v.z]
        });
        let inputs = RewardInputs {
            desired_speed: self.cfg.desired_speed,
            forward_speed: s.vel.x,
            torques: s.torques,
            joint_velocities: s.qd,
            angular_velocity_xy: [omega_body.x, omega_body.y],
            foot_contacts: s.foot_contact,
            foot_velocities,
            desired_supports: self.desired_supports(t0),
            unexpected_contacts: unexpected,
            dt: self.cfg.control_dt,
        };
        let breakdown = compute_reward(&inputs, &self.cfg.reward);
        let foot_positions: [[f64; 3]; NUM_LEGS] = std::array::from_fn(|leg| {
            let p = self.dynamics.foot_world(s, leg);
            [p.x, p.y, p.z]
        });
        // support polygon order LF, RF, RH, LH
        let supports: Vec<[f64; 2]> = [0, 1, 3, 2]
            .iter()
            .filter(|&&leg| s.foot_contact[leg])
            .map(|&leg| [foot_positions[leg][0], foot_positions[leg][1]])
            .collect();
        let fell = self.fallen();
        let info = StepInfo {
            reward: breakdown,
            power: power(&s.torques, &s.qd),
            wsm: wsm([s.pos.x, s.pos.y], &supports),
            base_position: [s.pos.x, s.pos.y, s.pos.z],
            rpy: self.rpy(),
            forward_speed: s.vel.x,
            torques: s.torques,
            max_abs_torque: max_torque,
            foot_positions,
            foot_contacts: s.foot_contact,
            unexpected_contacts: unexpected,
            fell,
        };
        let reward = info.reward.total;
        self.info = Some(info);
        let terminated = fell && self.cfg.terminate_on_fall;
        Ok(Step {
            observation: self.observation(),
            reward,
            terminated,
            truncated: !terminated && self.steps >= self.cfg.max_steps,
        })
    }

    fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.control_dt
    }

    fn feature_scale(&self) -> Vec<f64> {
        let mut scale = vec![1.0; self.observation_dim()];
        for v in &mut scale[BLOCK_ENDS[4]..BLOCK_ENDS[5]] {
            *v = FORCE_FEATURE_SCALE;
        }
        scale
    }
}
