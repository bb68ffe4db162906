//! Interfaces shared by the simulator, the reference optimizer and the trainer.

use crate::rbfn::JointVector;
use crate::rng::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("simulation diverged at t = {time:.3} s")]
    Diverged { time: f64 },
    #[error("non-finite joint target")]
    NonFiniteAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Fall or other terminal condition.
    pub terminated: bool,
    /// Episode cap reached without a terminal condition.
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Episodic environment driven by 12 absolute joint targets.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    /// Starts a new episode; returns the first observation.
    fn reset(&mut self, rng: &mut Rng) -> Vec<f64>;
    fn step(&mut self, target: &JointVector) -> Result<Step, EnvError>;
    /// Seconds elapsed since the last reset.
    fn time(&self) -> f64;
    /// Per-component factors mapping observations to learner features.
    fn feature_scale(&self) -> Vec<f64> {
        vec![1.0; self.observation_dim()]
    }
}

/// Source of the residual action Δa added on top of the reference.
pub trait ResidualPolicy {
    fn residual(&self, observation: &[f64], rng: &mut Rng) -> Vec<f64>;
}

/// Policy that never corrects the reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroResidual;

impl ResidualPolicy for ZeroResidual {
    fn residual(&self, _observation: &[f64], _rng: &mut Rng) -> Vec<f64> {
        vec![0.0; crate::rbfn::NUM_JOINTS]
    }
}
