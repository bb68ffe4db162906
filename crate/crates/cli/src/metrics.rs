//! CSV sinks for training events.
//!
//! Column orders are fixed by the header constants below.

use anyhow::Result;
use gaitevo_core::checkpoint::Checkpoint;
use gaitevo_core::trainer::{EpisodeRecord, Observer, PhaseSpan, RagRecord, StepRecord, UpdateRecord};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

type Sink = csv::Writer<BufWriter<File>>;

pub const STEP_COLUMNS: [&str; 24] = [
    "step", "episode", "worker", "time", "reward", "r_v", "r_e", "r_b", "r_f", "r_c", "r_u", "curriculum",
    "power", "wsm", "forward_speed", "x", "y", "z", "roll", "pitch", "yaw", "max_abs_torque",
    "unexpected_contacts", "fell",
];
pub const EPISODE_COLUMNS: [&str; 7] = ["episode", "worker", "start_step", "steps", "total_reward", "terminated", "diverged"];
pub const LOSS_COLUMNS: [&str; 6] = ["update", "step", "critic1_loss", "critic2_loss", "policy_loss", "mean_log_prob"];
pub const RAG_COLUMNS: [&str; 11] = [
    "rag", "step", "best_fitness", "improved", "rollout_steps", "generation", "gen_best", "gen_mean", "gen_worst",
    "best_so_far", "failures",
];
pub const PHASE_COLUMNS: [&str; 7] = [
    "phase", "start_step", "end_step", "policy_before", "policy_after", "rbfn_before", "rbfn_after",
];

fn sink(path: &Path, header: &[&str]) -> Result<Sink> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    Ok(w)
}

/// Formats an optional value as an empty cell when missing.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub struct RunLog {
    steps: Sink,
    episodes: Sink,
    losses: Sink,
    rag: Sink,
    phases: Sink,
    checkpoints: PathBuf,
    pub checkpoints_written: Vec<PathBuf>,
    error: Option<anyhow::Error>,
}

impl RunLog {
    pub fn create(dir: &Path) -> Result<Self> {
        let checkpoints = dir.join("checkpoints");
        std::fs::create_dir_all(&checkpoints)?;
        Ok(Self {
            steps: sink(&dir.join("steps.csv"), &STEP_COLUMNS)?,
            episodes: sink(&dir.join("episodes.csv"), &EPISODE_COLUMNS)?,
            losses: sink(&dir.join("losses.csv"), &LOSS_COLUMNS)?,
            rag: sink(&dir.join("rag.csv"), &RAG_COLUMNS)?,
            phases: sink(&dir.join("phases.csv"), &PHASE_COLUMNS)?,
            checkpoints,
            checkpoints_written: Vec::new(),
            error: None,
        })
    }

    fn keep(&mut self, r: Result<()>) {
        if let Err(e) = r {
            self.error.get_or_insert(e);
        }
    }

    /// Flushes every file and reports the first write failure, if any.
    pub fn finish(mut self) -> Result<Vec<PathBuf>> {
        for w in [&mut self.steps, &mut self.episodes, &mut self.losses, &mut self.rag, &mut self.phases] {
            w.flush()?;
        }
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.checkpoints_written),
        }
    }
}

fn write_step(w: &mut Sink, r: &StepRecord<'_>) -> Result<()> {
    let mut row = vec![
        r.step.to_string(),
        r.episode.to_string(),
        r.worker.to_string(),
        r.time.to_string(),
        r.reward.to_string(),
    ];
    match r.info {
        Some(i) => {
            row.extend(i.reward.components.iter().map(|c| c.to_string()));
            row.push(i.reward.curriculum.to_string());
            row.push(i.power.to_string());
            row.push(opt(i.wsm));
            row.push(i.forward_speed.to_string());
            row.extend(i.base_position.iter().map(|c| c.to_string()));
            row.extend(i.rpy.iter().map(|c| c.to_string()));
            row.push(i.max_abs_torque.to_string());
            row.push(i.unexpected_contacts.to_string());
            row.push(i.fell.to_string());
        }
        None => row.resize(STEP_COLUMNS.len(), String::new()),
    }
    w.write_record(&row)?;
    Ok(())
}

impl Observer for RunLog {
    fn on_step(&mut self, r: &StepRecord<'_>) {
        let res = write_step(&mut self.steps, r);
        self.keep(res);
    }

    fn on_episode(&mut self, r: &EpisodeRecord) {
        let res = self.episodes.write_record(&[
            r.episode.to_string(),
            r.worker.to_string(),
            r.start_step.to_string(),
            r.steps.to_string(),
            r.total_reward.to_string(),
            r.terminated.to_string(),
            r.diverged.to_string(),
        ]);
        self.keep(res.map_err(Into::into));
    }

    fn on_update(&mut self, r: &UpdateRecord) {
        let res = self.losses.write_record(&[
            r.update.to_string(),
            r.step.to_string(),
            r.critic_loss[0].to_string(),
            r.critic_loss[1].to_string(),
            r.policy_loss.to_string(),
            r.mean_log_prob.to_string(),
        ]);
        self.keep(res.map_err(Into::into));
    }

    fn on_rag(&mut self, r: &RagRecord) {
        let mut res = Ok(());
        for g in &r.history {
            res = res.and_then(|_| {
                self.rag.write_record(&[
                    r.index.to_string(),
                    r.step.to_string(),
                    r.best_fitness.to_string(),
                    r.improved.to_string(),
                    r.rollout_steps.to_string(),
                    g.generation.to_string(),
                    g.best.to_string(),
                    g.mean.to_string(),
                    g.worst.to_string(),
                    g.best_so_far.to_string(),
                    g.failures.to_string(),
                ])
            });
        }
        self.keep(res.map_err(Into::into));
    }

    fn on_span(&mut self, s: &PhaseSpan) {
        let res = self.phases.write_record(&[
            s.phase.name().to_string(),
            s.start_step.to_string(),
            s.end_step.to_string(),
            format!("{:016x}", s.policy_checksum.0),
            format!("{:016x}", s.policy_checksum.1),
            format!("{:016x}", s.rbfn_checksum.0),
            format!("{:016x}", s.rbfn_checksum.1),
        ]);
        self.keep(res.map_err(Into::into));
    }

    fn on_checkpoint(&mut self, step: u64, c: &Checkpoint) {
        let path = self.checkpoints.join(format!("step_{step:09}.ckpt"));
        let res = c
            .save(&path)
            .and_then(|_| c.save(&self.checkpoints.join("final.ckpt")))
            .map_err(anyhow::Error::from);
        if res.is_ok() {
            self.checkpoints_written.push(path);
        }
        self.keep(res);
    }
}
