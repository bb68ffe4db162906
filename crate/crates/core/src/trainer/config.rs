use crate::cpg::CpgConfig;
use crate::rbfn::RbfnConfig;
use crate::sac::SacConfig;
use crate::sim::{ObservationMode, SimConfig};
use crate::trajectory_opt::{GaConfig, InitialTrajectory, UpdateRule};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How the reference trajectory evolves during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Never updated.
    Fixed,
    Genetic,
    /// Candidates drawn from a uniform distribution each generation.
    Uniform,
    /// Candidates drawn from a normal distribution each generation.
    Normal,
}

impl ReferenceMode {
    pub fn update_rule(self) -> Option<UpdateRule> {
        match self {
            ReferenceMode::Fixed => None,
            ReferenceMode::Genetic => Some(UpdateRule::Genetic),
            ReferenceMode::Uniform => Some(UpdateRule::Uniform),
            ReferenceMode::Normal => Some(UpdateRule::Normal),
        }
    }
}

/// Observation mode and reference mode of the six comparison groups.
pub const GROUPS: [(ObservationMode, ReferenceMode); 6] = [
    (ObservationMode::Partial, ReferenceMode::Fixed),
    (ObservationMode::Full, ReferenceMode::Fixed),
    (ObservationMode::Full, ReferenceMode::Genetic),
    (ObservationMode::Full, ReferenceMode::Uniform),
    (ObservationMode::Full, ReferenceMode::Normal),
    (ObservationMode::Partial, ReferenceMode::Genetic),
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn default_max_steps() -> u64 {
    1_000_000
}
fn default_rag_interval() -> u64 {
    50_000
}
fn default_first_rag() -> u64 {
    10_000
}
fn default_workers() -> usize {
    1
}
fn default_checkpoint_interval() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Desired forward speed V_d (m/s). Required.
    pub desired_speed: f64,
    #[serde(default)]
    pub seed: u64,
    /// Learning-phase environment steps to run.
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_rag_interval")]
    pub rag_interval: u64,
    #[serde(default = "default_first_rag")]
    pub first_rag_at: u64,
    /// Steps collected before the first gradient update.
    #[serde(default = "default_first_rag")]
    pub initial_steps: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Comparison group preset, 0 to 5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceMode>,
    /// Learning steps between periodic checkpoints; 0 keeps only the final one.
    #[serde(default = "default_checkpoint_interval")]
    pub checkpoint_interval: u64,
    #[serde(default)]
    pub trajectory: InitialTrajectory,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub sac: SacConfig,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub rbfn: RbfnConfig,
    #[serde(default)]
    pub cpg: CpgConfig,
}

impl TrainConfig {
    /// Defaults everywhere except the desired speed.
    pub fn new(desired_speed: f64) -> Self {
        Self {
            desired_speed,
            seed: 0,
            max_steps: default_max_steps(),
            rag_interval: default_rag_interval(),
            first_rag_at: default_first_rag(),
            initial_steps: default_first_rag(),
            workers: 1,
            group: None,
            observation: None,
            reference: None,
            checkpoint_interval: default_checkpoint_interval(),
            trajectory: InitialTrajectory::default(),
            sim: SimConfig::default(),
            sac: SacConfig::default(),
            ga: GaConfig::default(),
            rbfn: RbfnConfig::default(),
            cpg: CpgConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn observation_mode(&self) -> ObservationMode {
        self.observation
            .or_else(|| self.group.map(|g| GROUPS[g as usize].0))
            .unwrap_or_default()
    }

    pub fn reference_mode(&self) -> ReferenceMode {
        self.reference
            .or_else(|| self.group.map(|g| GROUPS[g as usize].1))
            .unwrap_or(ReferenceMode::Genetic)
    }

    /// Applies a group preset, rejecting explicit settings that disagree.
    pub fn set_group(&mut self, group: u8) -> Result<(), ConfigError> {
        self.group = Some(group);
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !self.desired_speed.is_finite() {
            return bad("desired_speed must be finite".into());
        }
        if let Some(g) = self.group {
            let Some(&(obs, reference)) = GROUPS.get(g as usize) else {
                return bad(format!("group must be 0 to 5, got {g}"));
            };
            if self.observation.is_some_and(|o| o != obs) {
                return bad(format!("group {g} uses {obs:?} observations, contradicting observation"));
            }
            if self.reference.is_some_and(|r| r != reference) {
                return bad(format!("group {g} uses the {reference:?} reference, contradicting reference"));
            }
        }
        if self.rag_interval == 0 {
            return bad("rag_interval must be positive".into());
        }
        if self.first_rag_at < self.initial_steps {
            return bad(format!(
                "first_rag_at ({}) must not precede initial_steps ({})",
                self.first_rag_at, self.initial_steps
            ));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        self.sac.validate().map_err(ConfigError::Invalid)?;
        self.ga.validate().map_err(ConfigError::Invalid)?;
        self.cpg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.sim_config().validate().map_err(ConfigError::Invalid)?;
        if self.rbfn.neurons < 2 || !(self.rbfn.sigma_sq > 0.0) || !(self.rbfn.delta > 0.0) {
            return bad("rbfn needs at least 2 neurons and positive sigma_sq and delta".into());
        }
        Ok(())
    }

    /// Simulator settings with the run-level fields filled in.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            observation: self.observation_mode(),
            desired_speed: self.desired_speed,
            cpg: self.cpg,
            disturbance: None,
            ..self.sim.clone()
        }
    }

    pub fn ga_config(&self) -> GaConfig {
        GaConfig {
            update_rule: self.reference_mode().update_rule().unwrap_or_default(),
            ..self.ga
        }
    }
}
