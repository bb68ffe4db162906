use super::ga::{optimize_with, GaConfig, GenerationStats};
use super::{apply_genome, fit_reference, sample_waypoints, FootTrajectory, Genome, Reference, TrajectoryError};
use crate::cpg::Cpg;
use crate::env::{EnvError, Environment, ResidualPolicy};
use crate::rbfn::{JointVector, RbfnConfig, RbfnParams};
use crate::rng::Rng;
use crate::sac::buffer::ReplayBuffer;
use rand::{Rng as _, SeedableRng};

/// Observation rescaled into the learner's feature space.
pub fn features(env: &dyn Environment, obs: &[f64]) -> Vec<f64> {
    let scale = env.feature_scale();
    obs.iter().zip(scale.iter()).map(|(o, s)| o * s).collect()
}

/// a(t) = a_ref(t) + Δa(t).
pub fn compose_action(reference: &JointVector, residual: &[f64]) -> JointVector {
    let mut a = *reference;
    for (x, d) in a.iter_mut().zip(residual) {
        *x += d;
    }
    a
}

#[derive(Debug, Clone)]
pub struct RolloutSummary {
    pub total_reward: f64,
    pub steps: usize,
    pub terminated: bool,
    pub diverged: Option<EnvError>,
}

/// Runs one episode of at most `max_steps` with the given reference and
/// residual policy, appending every executed transition to `buffer`.
pub fn rollout(
    env: &mut dyn Environment,
    reference: &Reference,
    policy: &dyn ResidualPolicy,
    buffer: &mut ReplayBuffer,
    max_steps: usize,
    reset_rng: &mut Rng,
    policy_rng: &mut Rng,
) -> RolloutSummary {
    let first = env.reset(reset_rng);
    let mut obs = features(&*env, &first);
    let mut summary = RolloutSummary {
        total_reward: 0.0,
        steps: 0,
        terminated: false,
        diverged: None,
    };
    for _ in 0..max_steps {
        let residual = policy.residual(&obs, policy_rng);
        let target = compose_action(&reference.at(env.time()), &residual);
        let step = match env.step(&target) {
            Ok(s) => s,
            Err(e) => {
                summary.diverged = Some(e);
                break;
            }
        };
        let next = features(&*env, &step.observation);
        buffer.push(&obs, &residual, step.reward, &next, step.terminated);
        summary.total_reward += step.reward;
        summary.steps += 1;
        obs = next;
        if step.done() {
            summary.terminated = step.terminated;
            break;
        }
    }
    summary
}

#[derive(Debug, Clone)]
pub struct FitnessRecord {
    pub genome: Genome,
    /// Accumulated reward; `f64::NEG_INFINITY` when the candidate failed.
    pub fitness: f64,
    pub params: Option<RbfnParams>,
    pub trajectory: FootTrajectory,
    /// Control steps executed (and transitions appended).
    pub steps: usize,
}

/// Everything a fitness rollout needs besides the candidate itself.
pub struct EvalContext<'a> {
    pub cpg: &'a Cpg,
    pub rbfn: &'a RbfnConfig,
    pub policy: &'a dyn ResidualPolicy,
    pub env: &'a mut dyn Environment,
    pub buffer: &'a mut ReplayBuffer,
    pub steps: usize,
}

/// Fitness of one perturbation: build the candidate path, fit the network,
/// roll it out with the frozen policy and sum the rewards.
pub fn ec_evaluate(
    genome: &Genome,
    base: &FootTrajectory,
    ctx: &mut EvalContext<'_>,
    reset_rng: &mut Rng,
    policy_rng: &mut Rng,
) -> FitnessRecord {
    let trajectory = apply_genome(base, genome);
    let params = match fit_reference(&trajectory, ctx.cpg, ctx.rbfn) {
        Ok(p) => p,
        Err(_) => {
            return FitnessRecord {
                genome: genome.clone(),
                fitness: f64::NEG_INFINITY,
                params: None,
                trajectory,
                steps: 0,
            }
        }
    };
    let reference = Reference {
        cpg: ctx.cpg.clone(),
        params,
    };
    let summary = rollout(
        &mut *ctx.env,
        &reference,
        ctx.policy,
        &mut *ctx.buffer,
        ctx.steps,
        reset_rng,
        policy_rng,
    );
    let fitness = if summary.diverged.is_some() {
        f64::NEG_INFINITY
    } else {
        summary.total_reward
    };
    FitnessRecord {
        genome: genome.clone(),
        fitness,
        params: Some(reference.params),
        trajectory,
        steps: summary.steps,
    }
}

#[derive(Debug, Clone)]
pub struct RagOutcome {
    pub params: RbfnParams,
    pub trajectory: FootTrajectory,
    pub best_fitness: f64,
    /// False when every candidate failed and the current reference was kept.
    pub improved: bool,
    pub best_genome: Option<Genome>,
    pub history: Vec<GenerationStats>,
    /// Rollout steps executed across all candidates.
    pub steps: usize,
}

/// Evolves the current trajectory for `ga.generations` generations and
/// returns the best candidate's network and path. Every candidate starts
/// from the same reset state and policy noise so fitness values compare
/// like for like.
pub fn optimize_reference(
    current: &FootTrajectory,
    current_params: &RbfnParams,
    ga: &GaConfig,
    ctx: &mut EvalContext<'_>,
    rng: &mut Rng,
) -> Result<RagOutcome, TrajectoryError> {
    let base = sample_waypoints(current, ga.waypoints)?;
    let crn_seed: u64 = rng.gen();
    let mut steps = 0;
    let outcome = optimize_with(ga, rng, |g| {
        let mut reset_rng = Rng::seed_from_u64(crn_seed);
        let mut policy_rng = Rng::seed_from_u64(crn_seed);
        policy_rng.set_stream(1);
        let rec = ec_evaluate(g, &base, ctx, &mut reset_rng, &mut policy_rng);
        steps += rec.steps;
        (rec.fitness, rec.params.map(|p| (p, rec.trajectory)))
    });
    Ok(match outcome.best {
        Some((genome, fitness, (params, trajectory))) => RagOutcome {
            params,
            trajectory,
            best_fitness: fitness,
            improved: true,
            best_genome: Some(genome),
            history: outcome.history,
            steps,
        },
        None => RagOutcome {
            params: current_params.clone(),
            trajectory: current.clone(),
            best_fitness: f64::NEG_INFINITY,
            improved: false,
            best_genome: None,
            history: outcome.history,
            steps,
        },
    })
}
