use super::mlp::{Mlp, MlpCache};
use crate::env::ResidualPolicy;
use crate::rng::Rng;
use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const LN_2: f64 = std::f64::consts::LN_2;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// log(1 − tanh²u) without cancellation for large |u|.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

/// Squashed Gaussian policy: a = scale · tanh(mean + std · ε).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub act_dim: usize,
    pub action_scale: f64,
}

/// Result of a reparameterised batch sample, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub actions: Array2<f64>,
    pub log_probs: Vec<f64>,
    cache: MlpCache,
    eps: Array2<f64>,
    tanh_u: Array2<f64>,
    std: Array2<f64>,
    clamped: Array2<bool>,
}

impl GaussianPolicy {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], action_scale: f64, rng: &mut Rng) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * act_dim);
        Self {
            net: Mlp::new(&sizes, rng),
            act_dim,
            action_scale,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Actions and log-densities for given standard-normal draws `eps`.
    pub fn sample_with(&self, states: ArrayView2<'_, f64>, eps: ArrayView2<'_, f64>) -> PolicySample {
        let n = states.nrows();
        let k = self.act_dim;
        assert_eq!(eps.dim(), (n, k), "noise shape");
        let (out, cache) = self.net.forward_cached(states);
        let mut actions = Array2::zeros((n, k));
        let mut tanh_u = Array2::zeros((n, k));
        let mut std = Array2::zeros((n, k));
        let mut clamped = Array2::from_elem((n, k), false);
        let mut log_probs = vec![0.0; n];
        let log_scale = self.action_scale.ln();
        for i in 0..n {
            let mut lp = 0.0;
            for j in 0..k {
                let mean = out[(i, j)];
                let raw = out[(i, k + j)];
                let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                clamped[(i, j)] = raw != log_std;
                let s = log_std.exp();
                let e = eps[(i, j)];
                let u = mean + s * e;
                let t = u.tanh();
                actions[(i, j)] = self.action_scale * t;
                tanh_u[(i, j)] = t;
                std[(i, j)] = s;
                lp += -0.5 * e * e - 0.5 * LN_2PI - log_std - log_scale - log_one_minus_tanh_sq(u);
            }
            log_probs[i] = lp;
        }
        PolicySample {
            actions,
            log_probs,
            cache,
            eps: eps.to_owned(),
            tanh_u,
            std,
            clamped,
        }
    }

    /// Parameter gradient of Σ_i (c_logp[i] · logp_i + Σ_j d_action[i,j] · a_ij)
    /// through the reparameterised sample.
    pub fn backward(&self, sample: &PolicySample, c_logp: &[f64], d_action: ArrayView2<'_, f64>) -> Vec<f64> {
        let n = sample.actions.nrows();
        let k = self.act_dim;
        let mut d_out = Array2::zeros((n, 2 * k));
        for i in 0..n {
            for j in 0..k {
                let t = sample.tanh_u[(i, j)];
                let s = sample.std[(i, j)];
                let e = sample.eps[(i, j)];
                // da/du = scale (1 − tanh²u)
                let du = d_action[(i, j)] * self.action_scale * (1.0 - t * t) + c_logp[i] * 2.0 * t;
                d_out[(i, j)] = du;
                let d_log_std = du * s * e - c_logp[i];
                d_out[(i, k + j)] = if sample.clamped[(i, j)] { 0.0 } else { d_log_std };
            }
        }
        self.net.backward(&sample.cache, d_out.view()).0
    }

    pub fn sample(&self, states: ArrayView2<'_, f64>, rng: &mut Rng) -> PolicySample {
        let eps = Array2::from_shape_simple_fn((states.nrows(), self.act_dim), || StandardNormal.sample(rng));
        self.sample_with(states, eps.view())
    }

    /// Stochastic action and its log-density for one observation.
    pub fn act(&self, obs: &[f64], rng: &mut Rng) -> (Vec<f64>, f64) {
        let s = ArrayView2::from_shape((1, obs.len()), obs).unwrap();
        let out = self.sample(s, rng);
        (out.actions.row(0).to_vec(), out.log_probs[0])
    }

    /// Mode of the squashed distribution: scale · tanh(mean).
    pub fn act_deterministic(&self, obs: &[f64]) -> Vec<f64> {
        let s = ArrayView2::from_shape((1, obs.len()), obs).unwrap();
        let out = self.net.forward(s);
        (0..self.act_dim)
            .map(|j| self.action_scale * out[(0, j)].tanh())
            .collect()
    }
}

/// Samples residuals from the policy.
pub struct Stochastic<'a>(pub &'a GaussianPolicy);

/// Uses the distribution's mode.
pub struct Deterministic<'a>(pub &'a GaussianPolicy);

impl ResidualPolicy for Stochastic<'_> {
    fn residual(&self, observation: &[f64], rng: &mut Rng) -> Vec<f64> {
        self.0.act(observation, rng).0
    }
}

impl ResidualPolicy for Deterministic<'_> {
    fn residual(&self, observation: &[f64], _rng: &mut Rng) -> Vec<f64> {
        self.0.act_deterministic(observation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use statrs::distribution::{ContinuousCDF, Normal};

    /// One-input, one-action policy whose mean and raw log-std equal the biases.
    fn constant_policy(mean: f64, log_std: f64, scale: f64) -> GaussianPolicy {
        GaussianPolicy {
            net: Mlp::from_params(&[1, 2], vec![0.0, 0.0, mean, log_std]),
            act_dim: 1,
            action_scale: scale,
        }
    }

    fn logp_at(p: &GaussianPolicy, a: f64) -> f64 {
        // invert the squashing to find the noise that yields `a`
        let out = p.net.forward(ArrayView2::from_shape((1, 1), &[0.0]).unwrap());
        let (mean, ls) = (out[(0, 0)], out[(0, 1)].clamp(LOG_STD_MIN, LOG_STD_MAX));
        let u = (a / p.action_scale).atanh();
        let e = (u - mean) / ls.exp();
        let eps = Array2::from_elem((1, 1), e);
        p.sample_with(ArrayView2::from_shape((1, 1), &[0.0]).unwrap(), eps.view()).log_probs[0]
    }

    #[test]
    fn stable_log_jacobian_matches_naive_form() {
        for u in [-3.0, -0.4, 0.0, 0.7, 2.5] {
            let naive = (1.0 - f64::tanh(u).powi(2)).ln();
            assert!((log_one_minus_tanh_sq(u) - naive).abs() < 1e-12);
        }
        assert!(log_one_minus_tanh_sq(40.0).is_finite());
    }

    #[test]
    fn floor_log_std_is_deterministic() {
        let p = constant_policy(0.3, -50.0, 0.2);
        let mut rng = stream_rng(0, Stream::Policy, 0);
        for _ in 0..10 {
            let (a, _) = p.act(&[0.0], &mut rng);
            assert!((a[0] - 0.2 * 0.3f64.tanh()).abs() < 1e-8);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let p = constant_policy(0.4, -0.3, 0.2);
        let n = 10_000;
        let lo = -0.2 + 1e-9;
        let hi = 0.2 - 1e-9;
        let h = (hi - lo) / (n - 1) as f64;
        let ys: Vec<f64> = (0..n).map(|i| logp_at(&p, lo + i as f64 * h).exp()).collect();
        let integral = h * (ys.iter().sum::<f64>() - 0.5 * (ys[0] + ys[n - 1]));
        assert!((integral - 1.0).abs() < 0.01, "integral {integral}");
    }

    #[test]
    fn density_matches_differentiated_cdf() {
        let (mean, log_std, scale) = (-0.2, -0.5, 0.2);
        let p = constant_policy(mean, log_std, scale);
        let normal = Normal::new(mean, f64::exp(log_std)).unwrap();
        let cdf = |a: f64| normal.cdf((a / scale).atanh());
        let mut rng = stream_rng(5, Stream::Policy, 0);
        for _ in 0..100 {
            let (a, lp) = p.act(&[0.0], &mut rng);
            let a = a[0];
            if a.abs() > 0.199 {
                continue;
            }
            let h = 1e-6;
            let fd = (cdf(a + h) - cdf(a - h)) / (2.0 * h);
            assert!((lp.exp() - fd).abs() / fd < 1e-4, "a {a}");
        }
    }

    #[test]
    fn log_prob_bounded_by_gaussian_plus_jacobian() {
        let mut rng = stream_rng(6, Stream::Init, 0);
        let p = GaussianPolicy::new(3, 2, &[4], 0.2, &mut rng);
        let states = Array2::from_shape_fn((50, 3), |(i, j)| ((i * 3 + j) as f64).sin());
        let s = p.sample(states.view(), &mut rng);
        let out = p.net.forward(states.view());
        for i in 0..50 {
            let mut bound = 0.0;
            for j in 0..2 {
                let ls = out[(i, 2 + j)].clamp(LOG_STD_MIN, LOG_STD_MAX);
                let u = (s.actions[(i, j)] / 0.2).atanh();
                bound += -0.5 * LN_2PI - ls + ((0.2 * (1.0 - u.tanh().powi(2))).ln()).abs();
            }
            assert!(s.log_probs[i] <= bound + 1e-9);
        }
    }
}
