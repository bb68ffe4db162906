//! Soft actor-critic with twin critics, target networks and a squashed
//! Gaussian policy producing bounded residual actions.

pub mod adam;
pub mod buffer;
pub mod mlp;
pub mod policy;

use crate::rng::Rng;
use adam::Adam;
use buffer::{Batch, ReplayBuffer};
use mlp::Mlp;
use ndarray::{s, Array2, ArrayView2};
pub use policy::GaussianPolicy;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::hash::{Hash, Hasher};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Entropy temperature, fixed.
    pub alpha: f64,
    pub gamma: f64,
    /// Target-network smoothing factor.
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Bound on each residual action component (rad).
    pub action_scale: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            alpha: 0.2,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            action_scale: 0.2,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err("sac.hidden sizes must be positive".into());
        }
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err("sac.gamma must lie in [0, 1]".into());
        }
        if !(self.tau >= 0.0 && self.tau <= 1.0) {
            return Err("sac.tau must lie in [0, 1]".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err("sac.alpha must be non-negative".into());
        }
        if !(self.actor_lr >= 0.0 && self.critic_lr >= 0.0) {
            return Err("learning rates must be non-negative".into());
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err("sac.batch_size must be positive and not exceed sac.buffer_capacity".into());
        }
        if !(self.action_scale > 0.0 && self.action_scale.is_finite()) {
            return Err("sac.action_scale must be positive".into());
        }
        Ok(())
    }
}

fn concat(states: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, a, b) = (states.nrows(), states.ncols(), actions.ncols());
    assert_eq!(actions.nrows(), n, "row counts");
    let mut out = Array2::zeros((n, a + b));
    out.slice_mut(s![.., ..a]).assign(&states);
    out.slice_mut(s![.., a..]).assign(&actions);
    out
}

pub fn q_values(net: &Mlp, states: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Vec<f64> {
    net.forward(concat(states, actions).view()).column(0).to_vec()
}

fn batch_views(b: &Batch) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>, ArrayView2<'_, f64>) {
    let n = b.len();
    (
        ArrayView2::from_shape((n, b.obs_dim), &b.states).unwrap(),
        ArrayView2::from_shape((n, b.act_dim), &b.actions).unwrap(),
        ArrayView2::from_shape((n, b.obs_dim), &b.next_states).unwrap(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticLoss {
    pub loss: [f64; 2],
    pub grads: [Vec<f64>; 2],
    pub targets: Vec<f64>,
}

/// Soft Bellman targets r + γ(1 − d)(min Q_targ(s′, a′) − α log π(a′|s′)).
pub fn bellman_targets(
    batch: &Batch,
    targets: &[Mlp; 2],
    policy: &GaussianPolicy,
    alpha: f64,
    gamma: f64,
    eps_next: ArrayView2<'_, f64>,
) -> Vec<f64> {
    let (_, _, next) = batch_views(batch);
    let sample = policy.sample_with(next, eps_next);
    let q1 = q_values(&targets[0], next, sample.actions.view());
    let q2 = q_values(&targets[1], next, sample.actions.view());
    (0..batch.len())
        .map(|i| {
            let v = q1[i].min(q2[i]) - alpha * sample.log_probs[i];
            batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * v
        })
        .collect()
}

/// Mean ½(Q − Q̂)² for each critic with gradients on the online networks.
pub fn critic_loss(
    batch: &Batch,
    critics: &[Mlp; 2],
    targets: &[Mlp; 2],
    policy: &GaussianPolicy,
    alpha: f64,
    gamma: f64,
    eps_next: ArrayView2<'_, f64>,
) -> CriticLoss {
    let n = batch.len();
    assert!(n > 0, "empty batch");
    let q_hat = bellman_targets(batch, targets, policy, alpha, gamma, eps_next);
    let (states, actions, _) = batch_views(batch);
    let input = concat(states, actions);
    let mut loss = [0.0; 2];
    let mut grads: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for c in 0..2 {
        let (q, cache) = critics[c].forward_cached(input.view());
        let mut d = Array2::zeros((n, 1));
        for i in 0..n {
            let err = q[(i, 0)] - q_hat[i];
            loss[c] += 0.5 * err * err / n as f64;
            d[(i, 0)] = err / n as f64;
        }
        grads[c] = critics[c].backward(&cache, d.view()).0;
    }
    CriticLoss {
        loss,
        grads,
        targets: q_hat,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub mean_log_prob: f64,
}

/// Mean (α log π(ã|s) − min_i Q_i(s, ã)) with ã reparameterised from `eps`.
pub fn policy_loss(
    states: ArrayView2<'_, f64>,
    policy: &GaussianPolicy,
    critics: &[Mlp; 2],
    alpha: f64,
    eps: ArrayView2<'_, f64>,
) -> PolicyLoss {
    let n = states.nrows();
    assert!(n > 0, "empty batch");
    let k = policy.act_dim;
    let obs = states.ncols();
    let sample = policy.sample_with(states, eps);
    let input = concat(states, sample.actions.view());
    let mut d_action = Array2::zeros((n, k));
    let (q1, c1) = critics[0].forward_cached(input.view());
    let (q2, c2) = critics[1].forward_cached(input.view());
    let mut pick1 = Array2::zeros((n, 1));
    let mut pick2 = Array2::zeros((n, 1));
    let mut loss = 0.0;
    for i in 0..n {
        let (a, b) = (q1[(i, 0)], q2[(i, 0)]);
        loss += (alpha * sample.log_probs[i] - a.min(b)) / n as f64;
        // min picks the first critic on ties
        if a <= b {
            pick1[(i, 0)] = -1.0 / n as f64;
        } else {
            pick2[(i, 0)] = -1.0 / n as f64;
        }
    }
    let (_, dx1) = critics[0].backward(&c1, pick1.view());
    let (_, dx2) = critics[1].backward(&c2, pick2.view());
    d_action += &dx1.slice(s![.., obs..]);
    d_action += &dx2.slice(s![.., obs..]);
    let c_logp = vec![alpha / n as f64; n];
    let grad = policy.backward(&sample, &c_logp, d_action.view());
    PolicyLoss {
        loss,
        grad,
        mean_log_prob: sample.log_probs.iter().sum::<f64>() / n as f64,
    }
}

/// Gradients of one minibatch, all taken at the same parameter snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SacGradients {
    pub critics: [Vec<f64>; 2],
    pub policy: Vec<f64>,
    pub critic_loss: [f64; 2],
    pub policy_loss: f64,
    pub mean_log_prob: f64,
}

impl SacGradients {
    /// Arithmetic mean of gradient sets.
    pub fn average(sets: &[SacGradients]) -> SacGradients {
        assert!(!sets.is_empty(), "nothing to average");
        let mut acc = sets[0].clone();
        for g in &sets[1..] {
            for c in 0..2 {
                for (a, b) in acc.critics[c].iter_mut().zip(&g.critics[c]) {
                    *a += b;
                }
                acc.critic_loss[c] += g.critic_loss[c];
            }
            for (a, b) in acc.policy.iter_mut().zip(&g.policy) {
                *a += b;
            }
            acc.policy_loss += g.policy_loss;
            acc.mean_log_prob += g.mean_log_prob;
        }
        let k = sets.len() as f64;
        for c in 0..2 {
            acc.critics[c].iter_mut().for_each(|v| *v /= k);
            acc.critic_loss[c] /= k;
        }
        acc.policy.iter_mut().for_each(|v| *v /= k);
        acc.policy_loss /= k;
        acc.mean_log_prob /= k;
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sac {
    pub cfg: SacConfig,
    pub policy: GaussianPolicy,
    pub critics: [Mlp; 2],
    pub targets: [Mlp; 2],
    pub policy_opt: Adam,
    pub critic_opts: [Adam; 2],
    pub updates: u64,
}

pub fn hash_params(params: &[f64]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    params.len().hash(&mut h);
    for v in params {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

impl Sac {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: SacConfig, rng: &mut Rng) -> Self {
        let policy = GaussianPolicy::new(obs_dim, act_dim, &cfg.hidden, cfg.action_scale, rng);
        let mut sizes = vec![obs_dim + act_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let critics = [Mlp::new(&sizes, rng), Mlp::new(&sizes, rng)];
        let targets = critics.clone();
        let np = policy.net.params.len();
        let nq = critics[0].params.len();
        Self {
            policy_opt: Adam::new(np, cfg.actor_lr),
            critic_opts: [Adam::new(nq, cfg.critic_lr), Adam::new(nq, cfg.critic_lr)],
            policy,
            critics,
            targets,
            cfg,
            updates: 0,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.obs_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.act_dim
    }

    /// Gradients with caller-supplied noise for the target and policy samples.
    pub fn gradients_with(
        &self,
        batch: &Batch,
        eps_next: ArrayView2<'_, f64>,
        eps_policy: ArrayView2<'_, f64>,
    ) -> SacGradients {
        let c = critic_loss(
            batch,
            &self.critics,
            &self.targets,
            &self.policy,
            self.cfg.alpha,
            self.cfg.gamma,
            eps_next,
        );
        let states = ArrayView2::from_shape((batch.len(), batch.obs_dim), &batch.states).unwrap();
        let p = policy_loss(states, &self.policy, &self.critics, self.cfg.alpha, eps_policy);
        SacGradients {
            critics: c.grads,
            policy: p.grad,
            critic_loss: c.loss,
            policy_loss: p.loss,
            mean_log_prob: p.mean_log_prob,
        }
    }

    pub fn gradients(&self, batch: &Batch, rng: &mut Rng) -> SacGradients {
        let shape = (batch.len(), self.act_dim());
        let eps_next = Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng));
        let eps_policy = Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng));
        self.gradients_with(batch, eps_next.view(), eps_policy.view())
    }

    /// One optimizer step on every network followed by the target update.
    pub fn apply(&mut self, g: &SacGradients) {
        for c in 0..2 {
            self.critic_opts[c].step(&mut self.critics[c].params, &g.critics[c]);
        }
        self.policy_opt.step(&mut self.policy.net.params, &g.policy);
        self.soft_update();
        self.updates += 1;
    }

    fn soft_update(&mut self) {
        let tau = self.cfg.tau;
        for c in 0..2 {
            let online = &self.critics[c].params;
            let target = &mut self.targets[c].params;
            if tau == 1.0 {
                target.copy_from_slice(online);
            } else {
                for (t, o) in target.iter_mut().zip(online) {
                    *t += tau * (o - *t);
                }
            }
        }
    }

    /// Samples a minibatch and takes one step; `None` if the buffer is too small.
    pub fn update(&mut self, buffer: &ReplayBuffer, rng: &mut Rng) -> Option<SacGradients> {
        let batch = buffer.sample(self.cfg.batch_size, rng)?;
        let g = self.gradients(&batch, rng);
        self.apply(&g);
        Some(g)
    }

    pub fn policy_checksum(&self) -> u64 {
        hash_params(&self.policy.net.params)
    }

    /// Hash over every learnable parameter and optimizer moment.
    pub fn checksum(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.policy_checksum().hash(&mut h);
        for c in 0..2 {
            hash_params(&self.critics[c].params).hash(&mut h);
            hash_params(&self.targets[c].params).hash(&mut h);
            hash_params(&self.critic_opts[c].m).hash(&mut h);
            hash_params(&self.critic_opts[c].v).hash(&mut h);
        }
        hash_params(&self.policy_opt.m).hash(&mut h);
        hash_params(&self.policy_opt.v).hash(&mut h);
        self.updates.hash(&mut h);
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use buffer::Transition;

    fn tiny_batch(n: usize, obs: usize, act: usize, seed: u64) -> Batch {
        let mut rng = stream_rng(seed, Stream::Batch, 0);
        use rand::Rng as _;
        let items: Vec<Transition> = (0..n)
            .map(|i| Transition {
                state: (0..obs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                action: (0..act).map(|_| rng.gen_range(-0.2..0.2)).collect(),
                reward: rng.gen_range(-1.0..1.0),
                next_state: (0..obs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                done: i % 3 == 0,
            })
            .collect();
        Batch::from_transitions(obs, act, &items)
    }

    fn tiny_sac(seed: u64) -> Sac {
        let cfg = SacConfig {
            hidden: vec![4, 4],
            batch_size: 8,
            ..SacConfig::default()
        };
        let mut rng = stream_rng(seed, Stream::Init, 0);
        let mut sac = Sac::new(3, 2, cfg, &mut rng);
        // decorrelate targets from online critics so the target path matters
        for t in sac.targets.iter_mut() {
            for p in t.params.iter_mut() {
                *p *= 0.9;
            }
        }
        sac
    }

    fn noise(n: usize, k: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream_rng(seed, Stream::Policy, 0);
        Array2::from_shape_simple_fn((n, k), || StandardNormal.sample(&mut rng))
    }

    fn rel_close(fd: f64, an: f64) -> bool {
        (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3)
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let sac = tiny_sac(1);
        let batch = tiny_batch(8, 3, 2, 2);
        let en = noise(8, 2, 3);
        let out = critic_loss(&batch, &sac.critics, &sac.targets, &sac.policy, 0.2, 0.99, en.view());
        for c in 0..2 {
            for p in 0..sac.critics[c].params.len() {
                let h = 1e-5;
                let mut plus = sac.critics.clone();
                let mut minus = sac.critics.clone();
                plus[c].params[p] += h;
                minus[c].params[p] -= h;
                let lp = critic_loss(&batch, &plus, &sac.targets, &sac.policy, 0.2, 0.99, en.view()).loss[c];
                let lm = critic_loss(&batch, &minus, &sac.targets, &sac.policy, 0.2, 0.99, en.view()).loss[c];
                let fd = (lp - lm) / (2.0 * h);
                assert!(rel_close(fd, out.grads[c][p]), "critic {c} param {p}: {fd} vs {}", out.grads[c][p]);
            }
        }
    }

    #[test]
    fn policy_gradient_matches_finite_differences() {
        let sac = tiny_sac(4);
        let batch = tiny_batch(8, 3, 2, 5);
        let states = ArrayView2::from_shape((8, 3), &batch.states).unwrap();
        let e = noise(8, 2, 6);
        let out = policy_loss(states, &sac.policy, &sac.critics, 0.2, e.view());
        for p in 0..sac.policy.net.params.len() {
            let h = 1e-5;
            let mut plus = sac.policy.clone();
            let mut minus = sac.policy.clone();
            plus.net.params[p] += h;
            minus.net.params[p] -= h;
            let lp = policy_loss(states, &plus, &sac.critics, 0.2, e.view()).loss;
            let lm = policy_loss(states, &minus, &sac.critics, 0.2, e.view()).loss;
            let fd = (lp - lm) / (2.0 * h);
            assert!(rel_close(fd, out.grad[p]), "param {p}: {fd} vs {}", out.grad[p]);
        }
    }

    #[test]
    fn zero_gamma_and_alpha_targets_are_rewards() {
        let sac = tiny_sac(7);
        let batch = tiny_batch(6, 3, 2, 8);
        let en = noise(6, 2, 9);
        let out = critic_loss(&batch, &sac.critics, &sac.targets, &sac.policy, 0.0, 0.0, en.view());
        assert_eq!(out.targets, batch.rewards);
        let (s, a, _) = batch_views(&batch);
        let q = q_values(&sac.critics[0], s, a);
        let expect: f64 = q.iter().zip(&batch.rewards).map(|(q, r)| 0.5 * (q - r).powi(2)).sum::<f64>() / 6.0;
        assert!((out.loss[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_residual_gives_zero_loss() {
        let sac = tiny_sac(10);
        let mut batch = tiny_batch(5, 3, 2, 11);
        let en = noise(5, 2, 12);
        let targets = bellman_targets(&batch, &sac.targets, &sac.policy, 0.2, 0.99, en.view());
        // shift rewards so the critic's own prediction is the target
        let (s, a, _) = batch_views(&batch);
        let q = q_values(&sac.critics[0], s, a);
        for i in 0..5 {
            batch.rewards[i] += q[i] - targets[i];
        }
        let out = critic_loss(&batch, &sac.critics, &sac.targets, &sac.policy, 0.2, 0.99, en.view());
        assert!(out.loss[0] < 1e-28);
        assert!(out.grads[0].iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn swapping_targets_leaves_bellman_target_unchanged() {
        let sac = tiny_sac(13);
        let batch = tiny_batch(6, 3, 2, 14);
        let en = noise(6, 2, 15);
        let a = bellman_targets(&batch, &sac.targets, &sac.policy, 0.2, 0.99, en.view());
        let swapped = [sac.targets[1].clone(), sac.targets[0].clone()];
        let b = bellman_targets(&batch, &swapped, &sac.policy, 0.2, 0.99, en.view());
        assert_eq!(a, b);
    }

    #[test]
    fn constant_critics_push_entropy_up() {
        let mut sac = tiny_sac(16);
        for c in sac.critics.iter_mut() {
            c.params.iter_mut().for_each(|p| *p = 0.0);
        }
        let batch = tiny_batch(8, 3, 2, 17);
        let states = ArrayView2::from_shape((8, 3), &batch.states).unwrap();
        let e = noise(8, 2, 18);
        let out = policy_loss(states, &sac.policy, &sac.critics, 0.2, e.view());
        let s = sac.policy.sample_with(states, e.view());
        let mean_logp = s.log_probs.iter().sum::<f64>() / 8.0;
        assert!((out.loss - 0.2 * mean_logp).abs() < 1e-12);
        // a small descent step must lower the mean log-density
        let mut stepped = sac.policy.clone();
        for (p, g) in stepped.net.params.iter_mut().zip(&out.grad) {
            *p -= 1e-3 * g;
        }
        let after = policy_loss(states, &stepped, &sac.critics, 0.2, e.view());
        assert!(after.loss < out.loss);
    }

    #[test]
    fn zero_learning_rate_keeps_online_parameters() {
        let mut sac = tiny_sac(19);
        sac.cfg.actor_lr = 0.0;
        sac.policy_opt.lr = 0.0;
        sac.critic_opts.iter_mut().for_each(|o| o.lr = 0.0);
        let before = (sac.policy.clone(), sac.critics.clone());
        let batch = tiny_batch(8, 3, 2, 20);
        let mut rng = stream_rng(0, Stream::Batch, 0);
        let g = sac.gradients(&batch, &mut rng);
        sac.apply(&g);
        assert_eq!(sac.policy, before.0);
        assert_eq!(sac.critics, before.1);
    }

    #[test]
    fn unit_tau_copies_online_critics() {
        let mut sac = tiny_sac(21);
        sac.cfg.tau = 1.0;
        let batch = tiny_batch(8, 3, 2, 22);
        let mut rng = stream_rng(0, Stream::Batch, 0);
        let g = sac.gradients(&batch, &mut rng);
        sac.apply(&g);
        assert_eq!(sac.targets, sac.critics);
    }

    #[test]
    fn average_of_identical_sets_is_the_set() {
        let sac = tiny_sac(23);
        let batch = tiny_batch(8, 3, 2, 24);
        let mut rng = stream_rng(0, Stream::Batch, 0);
        let g = sac.gradients(&batch, &mut rng);
        let avg = SacGradients::average(&[g.clone(), g.clone(), g.clone(), g.clone()]);
        for (a, b) in avg.policy.iter().zip(&g.policy) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        let single = SacGradients::average(std::slice::from_ref(&g));
        assert_eq!(single, g);
    }

    #[test]
    fn quadratic_bowl_moves_mean_to_argmax() {
        // α = 0 and Q(s, a) = −(a − 0.1)²: the policy mean should approach atanh(0.1 / 0.2).
        let mut rng = stream_rng(25, Stream::Init, 0);
        let mut pol = GaussianPolicy::new(1, 1, &[4], 0.2, &mut rng);
        // fix log-std near the floor so the sample equals the mean
        let n = pol.net.params.len();
        pol.net.params[n - 1] = -15.0;
        let mut opt = Adam::new(n, 0.01);
        let states = Array2::from_elem((16, 1), 0.5);
        for _ in 0..3000 {
            let e = Array2::zeros((16, 1));
            let sample = pol.sample_with(states.view(), e.view());
            // analytic dQ/da for the bowl
            let d_action = sample.actions.mapv(|a| 2.0 * (a - 0.1) / 16.0);
            let grad = pol.backward(&sample, &[0.0; 16], d_action.view());
            opt.step(&mut pol.net.params, &grad);
        }
        let a = pol.act_deterministic(&[0.5])[0];
        assert!((a - 0.1).abs() < 1e-3, "a = {a}");
    }
}
