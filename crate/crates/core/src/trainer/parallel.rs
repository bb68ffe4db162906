//! Synchronous multi-worker training. Every round each active worker takes
//! one environment step and computes gradients on its own minibatch at the
//! shared parameter snapshot; the coordinator averages them and applies a
//! single update.

use super::{make_env, EpisodeRecord, Observer, SpanStart, StepRecord, TrainConfig, TrainError, TrainState, UpdateRecord, WorkerStreams};
use crate::env::{Environment, ResidualPolicy};
use crate::sac::policy::Stochastic;
use crate::sac::{GaussianPolicy, Sac, SacGradients};
use crate::sim::{QuadrupedEnv, StepInfo};
use crate::trajectory_opt::evaluate::{compose_action, features};
use crate::trajectory_opt::Reference;
use rayon::prelude::*;

struct Worker {
    id: usize,
    env: QuadrupedEnv,
    streams: WorkerStreams,
    /// Current learner features; `None` between episodes.
    state: Option<Vec<f64>>,
    record: EpisodeRecord,
}

struct Outcome {
    residual: Vec<f64>,
    next: Vec<f64>,
    reward: f64,
    terminated: bool,
    done: bool,
    time: f64,
    info: Option<StepInfo>,
}

impl Worker {
    fn step(&mut self, policy: &GaussianPolicy, reference: &Reference) -> Option<Outcome> {
        let state = self.state.as_ref().expect("active worker");
        let residual = Stochastic(policy).residual(state, &mut self.streams.policy);
        let target = compose_action(&reference.at(self.env.time()), &residual);
        let step = self.env.step(&target).ok()?;
        Some(Outcome {
            residual,
            next: features(&self.env, &step.observation),
            reward: step.reward,
            terminated: step.terminated,
            done: step.done(),
            time: self.env.time(),
            info: self.env.info().cloned(),
        })
    }

    fn gradients(&mut self, sac: &Sac, buffer: &crate::sac::buffer::ReplayBuffer) -> Option<SacGradients> {
        let batch = buffer.sample(sac.cfg.batch_size, &mut self.streams.batch)?;
        Some(sac.gradients(&batch, &mut self.streams.batch))
    }
}

fn finish(w: &mut Worker, st: &mut TrainState, obs: &mut dyn Observer) {
    w.state = None;
    st.episodes += 1;
    st.diverged_episodes += w.record.diverged as u64;
    obs.on_episode(&w.record);
}

pub fn parallel_train(cfg: &TrainConfig, obs: &mut dyn Observer) -> Result<TrainState, TrainError> {
    let mut st = TrainState::new(cfg)?;
    let mut workers = (0..cfg.workers)
        .map(|id| {
            Ok(Worker {
                id,
                env: make_env(cfg)?,
                streams: st.workers[id].clone(),
                state: None,
                record: EpisodeRecord {
                    episode: 0,
                    worker: id,
                    start_step: 0,
                    steps: 0,
                    total_reward: 0.0,
                    terminated: false,
                    diverged: false,
                },
            })
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let mut rag_env = make_env(cfg)?;
    let mut span = SpanStart::open(&st);

    while st.steps < cfg.max_steps {
        let idle = workers.iter().all(|w| w.state.is_none());
        if idle && st.rag_due(cfg) {
            span.close(&st, obs);
            st.run_rag(cfg, &mut rag_env, obs)?;
            span = SpanStart::open(&st);
        }
        // idle workers wait while an optimization is pending
        if !st.rag_due(cfg) {
            for w in workers.iter_mut().filter(|w| w.state.is_none()) {
                let first = w.env.reset(&mut w.streams.env);
                w.state = Some(features(&w.env, &first));
                w.record = EpisodeRecord {
                    episode: st.episodes,
                    worker: w.id,
                    start_step: st.steps,
                    steps: 0,
                    total_reward: 0.0,
                    terminated: false,
                    diverged: false,
                };
            }
        }

        let budget = (cfg.max_steps - st.steps) as usize;
        let mut stepping: Vec<&mut Worker> = workers.iter_mut().filter(|w| w.state.is_some()).take(budget).collect();
        let (policy, reference) = (&st.sac.policy, &st.reference);
        let outcomes: Vec<Option<Outcome>> = stepping.par_iter_mut().map(|w| w.step(policy, reference)).collect();

        let mut contributors = Vec::new();
        for (w, out) in stepping.into_iter().zip(outcomes) {
            match out {
                None => {
                    w.record.diverged = true;
                    finish(w, &mut st, obs);
                }
                Some(o) => {
                    let state = w.state.take().unwrap();
                    st.buffer.push(&state, &o.residual, o.reward, &o.next, o.terminated);
                    st.steps += 1;
                    w.record.steps += 1;
                    w.record.total_reward += o.reward;
                    obs.on_step(&StepRecord {
                        step: st.steps,
                        episode: w.record.episode,
                        worker: w.id,
                        time: o.time,
                        reward: o.reward,
                        info: o.info.as_ref(),
                    });
                    if o.done {
                        w.record.terminated = o.terminated;
                        finish(w, &mut st, obs);
                    } else {
                        w.state = Some(o.next);
                    }
                    contributors.push(w.id);
                }
            }
        }

        if st.steps > cfg.initial_steps && !contributors.is_empty() {
            let (sac, buffer) = (&st.sac, &st.buffer);
            let grads: Vec<SacGradients> = workers
                .par_iter_mut()
                .filter(|w| contributors.contains(&w.id))
                .filter_map(|w| w.gradients(sac, buffer))
                .collect();
            if !grads.is_empty() {
                let mean = SacGradients::average(&grads);
                st.sac.apply(&mean);
                obs.on_gradients(st.sac.updates, &grads, &mean);
                obs.on_update(&UpdateRecord {
                    update: st.sac.updates,
                    step: st.steps,
                    critic_loss: mean.critic_loss,
                    policy_loss: mean.policy_loss,
                    mean_log_prob: mean.mean_log_prob,
                });
            }
        }
        if workers.iter().any(|w| w.state.is_none()) {
            for w in &workers {
                st.workers[w.id] = w.streams.clone();
            }
            st.maybe_checkpoint(cfg, obs);
        }
    }
    for w in workers.iter_mut().filter(|w| w.state.is_some()) {
        finish(w, &mut st, obs);
    }
    span.close(&st, obs);
    for w in &workers {
        st.workers[w.id] = w.streams.clone();
    }
    obs.on_checkpoint(st.steps, &st.to_checkpoint());
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny;
    use super::super::train;
    use super::*;

    #[test]
    fn one_worker_matches_serial() {
        let cfg = tiny(700);
        let a = train(&cfg, &mut ()).unwrap().to_checkpoint().to_bytes();
        let b = parallel_train(&cfg, &mut ()).unwrap().to_checkpoint().to_bytes();
        assert_eq!(a, b);
    }

    struct Grads(Vec<(Vec<SacGradients>, SacGradients)>);

    impl Observer for Grads {
        fn on_gradients(&mut self, _u: u64, per: &[SacGradients], mean: &SacGradients) {
            self.0.push((per.to_vec(), mean.clone()));
        }
    }

    #[test]
    fn four_workers_average_their_gradients() {
        let mut cfg = tiny(600);
        cfg.workers = 4;
        cfg.initial_steps = 100;
        cfg.first_rag_at = 300;
        let mut log = Grads(Vec::new());
        let st = parallel_train(&cfg, &mut log).unwrap();
        assert_eq!(st.steps, 600);
        assert_eq!(st.buffer.insertions(), st.steps + st.rag_steps);
        assert!(!log.0.is_empty());
        for (per, mean) in &log.0 {
            assert_eq!(per.len(), 4);
            assert_ne!(per[0].policy, per[1].policy);
            for i in 0..mean.policy.len() {
                let m = per.iter().map(|g| g.policy[i]).sum::<f64>() / 4.0;
                assert!((m - mean.policy[i]).abs() <= 1e-12 * (1.0 + m.abs()));
            }
        }
    }
}
