//! Conversion between training state and checkpoint arrays.

use super::TrainState;
use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::cpg::{Cpg, NUM_LEGS};
use crate::rbfn::{RbfnParams, NUM_JOINTS};
use crate::rng::{export_state, import_state, Rng};
use crate::sac::adam::Adam;
use crate::sac::mlp::Mlp;
use crate::sac::GaussianPolicy;
use crate::trajectory_opt::{FootTrajectory, Reference};

fn put_adam(c: &mut Checkpoint, prefix: &str, a: &Adam) {
    c.put_vec(&format!("{prefix}.m"), &a.m);
    c.put_vec(&format!("{prefix}.v"), &a.v);
    c.put_u64s(&format!("{prefix}.t"), &[a.t]);
}

fn put_rng(c: &mut Checkpoint, name: &str, rng: &Rng) {
    c.put_u64s(name, &export_state(rng));
}

pub fn put_rbfn(c: &mut Checkpoint, p: &RbfnParams) {
    let h = p.neurons();
    c.put("rbfn.means", &[h, NUM_LEGS], p.means.iter().flatten().copied().collect());
    c.put_vec("rbfn.sigma_sq", &[p.sigma_sq]);
    c.put("rbfn.weights", &[h, NUM_JOINTS], p.weights.iter().flatten().copied().collect());
    c.put_vec("rbfn.bias", &p.bias);
}

pub fn put_trajectory(c: &mut Checkpoint, t: &FootTrajectory) {
    c.put("trajectory.waypoints", &[NUM_LEGS, t.waypoint_count(), 2], t.to_flat());
}

impl TrainState {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.put_u64s(
            "meta.counters",
            &[
                self.steps,
                self.rag_steps,
                self.episodes,
                self.diverged_episodes,
                self.rag_updates,
                self.next_rag,
                self.sac.updates,
                self.buffer.insertions(),
            ],
        );
        let sizes: Vec<f64> = self.sac.policy.net.sizes().iter().map(|s| *s as f64).collect();
        c.put_vec("policy.sizes", &sizes);
        c.put_vec("policy.action_scale", &[self.sac.policy.action_scale]);
        c.put_vec("policy.params", &self.sac.policy.net.params);
        put_adam(&mut c, "policy.adam", &self.sac.policy_opt);
        for k in 0..2 {
            c.put_vec(&format!("critic{k}.params"), &self.sac.critics[k].params);
            c.put_vec(&format!("critic{k}.target"), &self.sac.targets[k].params);
            put_adam(&mut c, &format!("critic{k}.adam"), &self.sac.critic_opts[k]);
        }
        put_rbfn(&mut c, &self.reference.params);
        put_trajectory(&mut c, &self.trajectory);
        put_rng(&mut c, "rng.ga", &self.ga_rng);
        for (w, s) in self.workers.iter().enumerate() {
            put_rng(&mut c, &format!("rng.worker{w}.env"), &s.env);
            put_rng(&mut c, &format!("rng.worker{w}.policy"), &s.policy);
            put_rng(&mut c, &format!("rng.worker{w}.batch"), &s.batch);
        }
        c
    }
}

/// What evaluation needs from a checkpoint.
#[derive(Debug, Clone)]
pub struct PolicyBundle {
    pub policy: GaussianPolicy,
    pub reference: Reference,
    pub trajectory: FootTrajectory,
    pub steps: u64,
}

impl PolicyBundle {
    pub fn obs_dim(&self) -> usize {
        self.policy.obs_dim()
    }

    pub fn from_checkpoint(c: &Checkpoint, cpg: Cpg) -> Result<Self, CheckpointError> {
        let bad = |m: &str| CheckpointError::Malformed(m.to_string());
        let sizes: Vec<usize> = c.data("policy.sizes")?.iter().map(|s| *s as usize).collect();
        if sizes.len() < 2 || sizes[sizes.len() - 1] != 2 * NUM_JOINTS {
            return Err(bad("policy.sizes"));
        }
        let params = c.data("policy.params")?.to_vec();
        if params.len() != crate::sac::mlp::param_count(&sizes) {
            return Err(bad("policy.params length"));
        }
        let action_scale = *c.data("policy.action_scale")?.first().ok_or_else(|| bad("policy.action_scale"))?;
        let policy = GaussianPolicy {
            net: Mlp::from_params(&sizes, params),
            act_dim: NUM_JOINTS,
            action_scale,
        };
        let means = &c.get("rbfn.means")?;
        let h = *means.shape.first().ok_or_else(|| bad("rbfn.means"))?;
        let means_data = c.data_shaped("rbfn.means", &[h, NUM_LEGS])?;
        let weights = c.data_shaped("rbfn.weights", &[h, NUM_JOINTS])?;
        let bias = c.data_shaped("rbfn.bias", &[NUM_JOINTS])?;
        let sigma_sq = *c.data_shaped("rbfn.sigma_sq", &[1])?.first().unwrap();
        let params = RbfnParams {
            means: means_data.chunks_exact(NUM_LEGS).map(|m| m.try_into().unwrap()).collect(),
            sigma_sq,
            weights: weights.chunks_exact(NUM_JOINTS).map(|w| w.try_into().unwrap()).collect(),
            bias: bias.try_into().unwrap(),
        };
        let traj = c.get("trajectory.waypoints")?;
        let k = *traj.shape.get(1).ok_or_else(|| bad("trajectory.waypoints"))?;
        let trajectory = FootTrajectory::from_flat(&traj.data, k).ok_or_else(|| bad("trajectory.waypoints"))?;
        let steps = c.u64("meta.counters")?;
        Ok(Self {
            policy,
            reference: Reference { cpg, params },
            trajectory,
            steps,
        })
    }
}

/// Restores a stream saved under `name`.
pub fn load_rng(c: &Checkpoint, name: &str) -> Result<Rng, CheckpointError> {
    import_state(&c.u64s(name)?).map_err(|e| CheckpointError::Malformed(e.to_string()))
}
