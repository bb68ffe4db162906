//! Alternating schedule: residual-policy learning interleaved with reference
//! optimization, each phase holding the other's parameters fixed.

pub mod config;
pub mod parallel;
pub mod snapshot;

use crate::checkpoint::Checkpoint;
use crate::cpg::Cpg;
use crate::env::{Environment, ResidualPolicy};
use crate::rbfn::NUM_JOINTS;
use crate::rng::{stream_rng, Rng, Stream};
use crate::sac::buffer::ReplayBuffer;
use crate::sac::policy::Stochastic;
use crate::sac::{Sac, SacGradients};
use crate::sim::{QuadrupedEnv, StepInfo};
use crate::trajectory_opt::evaluate::{compose_action, features, EvalContext};
use crate::trajectory_opt::{fit_reference, optimize_reference, FootTrajectory, GenerationStats, Reference, TrajectoryError};
pub use config::{ConfigError, ReferenceMode, TrainConfig, GROUPS};
pub use parallel::parallel_train;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("environment setup failed: {0}")]
    Environment(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Rl,
    Rag,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Rl => "rl",
            Phase::Rag => "rag",
        }
    }
}

#[derive(Debug)]
pub struct StepRecord<'a> {
    pub step: u64,
    pub episode: u64,
    pub worker: usize,
    pub time: f64,
    pub reward: f64,
    pub info: Option<&'a StepInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub worker: usize,
    /// Learning steps completed when the episode began.
    pub start_step: u64,
    pub steps: usize,
    pub total_reward: f64,
    pub terminated: bool,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub update: u64,
    pub step: u64,
    pub critic_loss: [f64; 2],
    pub policy_loss: f64,
    pub mean_log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RagRecord {
    pub index: u64,
    /// Learning steps completed when the optimization ran.
    pub step: u64,
    pub best_fitness: f64,
    pub improved: bool,
    pub rollout_steps: usize,
    pub history: Vec<GenerationStats>,
    pub trajectory: FootTrajectory,
}

/// Interval during which one phase was active, with parameter checksums of
/// both components at its ends.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpan {
    pub phase: Phase,
    pub start_step: u64,
    pub end_step: u64,
    pub policy_checksum: (u64, u64),
    pub rbfn_checksum: (u64, u64),
}

/// Receives training events. Every method defaults to doing nothing.
pub trait Observer {
    fn on_step(&mut self, _record: &StepRecord<'_>) {}
    fn on_episode(&mut self, _record: &EpisodeRecord) {}
    fn on_update(&mut self, _record: &UpdateRecord) {}
    /// Per-worker gradients of one aggregation round and their mean.
    fn on_gradients(&mut self, _update: u64, _per_worker: &[SacGradients], _mean: &SacGradients) {}
    fn on_rag(&mut self, _record: &RagRecord) {}
    fn on_span(&mut self, _span: &PhaseSpan) {}
    fn on_checkpoint(&mut self, _step: u64, _checkpoint: &Checkpoint) {}
}

impl Observer for () {}

/// Random streams owned by one worker.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerStreams {
    pub env: Rng,
    pub policy: Rng,
    pub batch: Rng,
}

impl WorkerStreams {
    pub fn new(seed: u64, worker: usize) -> Self {
        Self {
            env: stream_rng(seed, Stream::Env, worker),
            policy: stream_rng(seed, Stream::Policy, worker),
            batch: stream_rng(seed, Stream::Batch, worker),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    /// Learning-phase environment steps.
    pub steps: u64,
    /// Environment steps spent in reference-optimization rollouts.
    pub rag_steps: u64,
    pub episodes: u64,
    pub diverged_episodes: u64,
    pub rag_updates: u64,
    pub next_rag: u64,
    pub next_checkpoint: u64,
    pub phase: Phase,
    pub sac: Sac,
    pub reference: Reference,
    pub trajectory: FootTrajectory,
    pub buffer: ReplayBuffer,
    pub ga_rng: Rng,
    pub workers: Vec<WorkerStreams>,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let cpg = Cpg::new(cfg.cpg).map_err(|e| TrainError::Environment(e.to_string()))?;
        let trajectory = cfg.trajectory.build(cfg.ga.waypoints)?;
        let params = fit_reference(&trajectory, &cpg, &cfg.rbfn)?;
        let obs_dim = cfg.observation_mode().dim();
        let mut init = stream_rng(cfg.seed, Stream::Init, 0);
        let sac = Sac::new(obs_dim, NUM_JOINTS, cfg.sac.clone(), &mut init);
        Ok(Self {
            steps: 0,
            rag_steps: 0,
            episodes: 0,
            diverged_episodes: 0,
            rag_updates: 0,
            next_rag: cfg.first_rag_at,
            next_checkpoint: if cfg.checkpoint_interval > 0 {
                cfg.checkpoint_interval
            } else {
                u64::MAX
            },
            phase: Phase::Rl,
            sac,
            reference: Reference { cpg, params },
            trajectory,
            buffer: ReplayBuffer::new(obs_dim, NUM_JOINTS, cfg.sac.buffer_capacity),
            ga_rng: stream_rng(cfg.seed, Stream::Ga, 0),
            workers: (0..cfg.workers).map(|w| WorkerStreams::new(cfg.seed, w)).collect(),
        })
    }

    pub fn rag_due(&self, cfg: &TrainConfig) -> bool {
        cfg.reference_mode() != ReferenceMode::Fixed && self.steps >= self.next_rag
    }

    fn checksums(&self) -> (u64, u64) {
        (self.sac.policy_checksum(), self.reference.params.checksum())
    }

    /// Runs one reference optimization with the policy frozen and installs
    /// the winner.
    pub fn run_rag(&mut self, cfg: &TrainConfig, env: &mut dyn Environment, obs: &mut dyn Observer) -> Result<(), TrainError> {
        self.phase = Phase::Rag;
        let before = self.checksums();
        let policy = Stochastic(&self.sac.policy);
        let mut ctx = EvalContext {
            cpg: &self.reference.cpg,
            rbfn: &cfg.rbfn,
            policy: &policy,
            env,
            buffer: &mut self.buffer,
            steps: cfg.ga.rollout_steps,
        };
        let out = optimize_reference(
            &self.trajectory,
            &self.reference.params,
            &cfg.ga_config(),
            &mut ctx,
            &mut self.ga_rng,
        )?;
        let policy_after = self.sac.policy_checksum();
        self.rag_steps += out.steps as u64;
        self.rag_updates += 1;
        self.reference.params = out.params;
        self.trajectory = out.trajectory;
        obs.on_rag(&RagRecord {
            index: self.rag_updates,
            step: self.steps,
            best_fitness: out.best_fitness,
            improved: out.improved,
            rollout_steps: out.steps,
            history: out.history,
            trajectory: self.trajectory.clone(),
        });
        obs.on_span(&PhaseSpan {
            phase: Phase::Rag,
            start_step: self.steps,
            end_step: self.steps,
            policy_checksum: (before.0, policy_after),
            rbfn_checksum: (before.1, self.reference.params.checksum()),
        });
        self.next_rag += cfg.rag_interval;
        self.phase = Phase::Rl;
        Ok(())
    }

    fn maybe_checkpoint(&mut self, cfg: &TrainConfig, obs: &mut dyn Observer) {
        if self.steps >= self.next_checkpoint {
            while self.next_checkpoint <= self.steps {
                self.next_checkpoint = self.next_checkpoint.saturating_add(cfg.checkpoint_interval);
            }
            obs.on_checkpoint(self.steps, &self.to_checkpoint());
        }
    }
}

/// Tracks the checksums at the start of a learning span.
struct SpanStart {
    step: u64,
    sums: (u64, u64),
}

impl SpanStart {
    fn open(st: &TrainState) -> Self {
        Self {
            step: st.steps,
            sums: st.checksums(),
        }
    }

    fn close(self, st: &TrainState, obs: &mut dyn Observer) {
        let end = st.checksums();
        obs.on_span(&PhaseSpan {
            phase: Phase::Rl,
            start_step: self.step,
            end_step: st.steps,
            policy_checksum: (self.sums.0, end.0),
            rbfn_checksum: (self.sums.1, end.1),
        });
    }
}

pub fn make_env(cfg: &TrainConfig) -> Result<QuadrupedEnv, TrainError> {
    QuadrupedEnv::new(cfg.sim_config()).map_err(TrainError::Environment)
}

/// Single-worker training loop.
pub fn train(cfg: &TrainConfig, obs: &mut dyn Observer) -> Result<TrainState, TrainError> {
    let mut st = TrainState::new(cfg)?;
    let mut env = make_env(cfg)?;
    let mut streams = st.workers[0].clone();
    let mut span = SpanStart::open(&st);
    while st.steps < cfg.max_steps {
        if st.rag_due(cfg) {
            span.close(&st, obs);
            st.run_rag(cfg, &mut env, obs)?;
            span = SpanStart::open(&st);
        }
        let first = env.reset(&mut streams.env);
        let mut state = features(&env, &first);
        let mut rec = EpisodeRecord {
            episode: st.episodes,
            worker: 0,
            start_step: st.steps,
            steps: 0,
            total_reward: 0.0,
            terminated: false,
            diverged: false,
        };
        while st.steps < cfg.max_steps {
            let residual = Stochastic(&st.sac.policy).residual(&state, &mut streams.policy);
            let target = compose_action(&st.reference.at(env.time()), &residual);
            let step = match env.step(&target) {
                Ok(s) => s,
                Err(_) => {
                    rec.diverged = true;
                    break;
                }
            };
            let next = features(&env, &step.observation);
            st.buffer.push(&state, &residual, step.reward, &next, step.terminated);
            st.steps += 1;
            rec.steps += 1;
            rec.total_reward += step.reward;
            obs.on_step(&StepRecord {
                step: st.steps,
                episode: st.episodes,
                worker: 0,
                time: env.time(),
                reward: step.reward,
                info: env.info(),
            });
            if st.steps > cfg.initial_steps {
                if let Some(g) = st.sac.update(&st.buffer, &mut streams.batch) {
                    obs.on_update(&UpdateRecord {
                        update: st.sac.updates,
                        step: st.steps,
                        critic_loss: g.critic_loss,
                        policy_loss: g.policy_loss,
                        mean_log_prob: g.mean_log_prob,
                    });
                }
            }
            state = next;
            if step.done() {
                rec.terminated = step.terminated;
                break;
            }
        }
        st.episodes += 1;
        st.diverged_episodes += rec.diverged as u64;
        obs.on_episode(&rec);
        st.workers[0] = streams.clone();
        st.maybe_checkpoint(cfg, obs);
    }
    span.close(&st, obs);
    st.workers[0] = streams;
    obs.on_checkpoint(st.steps, &st.to_checkpoint());
    Ok(st)
}
