//! Command implementations behind the `gaitevo` binary.

pub mod metrics;

use anyhow::{anyhow, Context};
use gaitevo_core::checkpoint::Checkpoint;
use gaitevo_core::cpg::Cpg;
use gaitevo_core::env::{Environment, ResidualPolicy};
use gaitevo_core::rng::{stream_rng, Stream};
use gaitevo_core::sac::policy::Deterministic;
use gaitevo_core::sim::terrain::PRESETS;
use gaitevo_core::sim::{Disturbance, ObservationMode, QuadrupedEnv, TerrainSpec};
use gaitevo_core::trainer::snapshot::PolicyBundle;
use gaitevo_core::trainer::{parallel_train, train, TrainConfig};
use gaitevo_core::trajectory_opt::evaluate::{compose_action, features};
use metrics::opt;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Failure of a command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or incompatible inputs (exit 2).
    Config(String),
    /// Anything that went wrong while running (exit 1).
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub type CliResult<T> = Result<T, CliError>;

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub group: Option<u8>,
    pub observation: Option<ObservationMode>,
    pub max_steps: Option<u64>,
}

/// Reads a training config from TOML, or from the `config` entry of a run
/// manifest when the file ends in `.json`.
pub fn load_config(path: &Path) -> CliResult<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text).map_err(config_err)?;
        let c = v.get("config").ok_or_else(|| config_err("manifest has no config entry"))?;
        let cfg: TrainConfig = serde_json::from_value(c.clone()).map_err(config_err)?;
        cfg.validate().map_err(config_err)?;
        return Ok(cfg);
    }
    TrainConfig::from_toml(&text).map_err(config_err)
}

pub fn apply_overrides(cfg: &mut TrainConfig, o: &Overrides) -> CliResult<()> {
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(w) = o.workers {
        cfg.workers = w;
    }
    if let Some(m) = o.observation {
        cfg.observation = Some(m);
    }
    if let Some(n) = o.max_steps {
        cfg.max_steps = n;
    }
    if let Some(g) = o.group {
        cfg.group = Some(g);
    }
    cfg.validate().map_err(config_err)
}

#[derive(Debug, Serialize)]
struct Seeds {
    master: u64,
    streams: Vec<&'static str>,
    workers: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a TrainConfig,
    seeds: Seeds,
    start_unix: f64,
    end_unix: Option<f64>,
    steps: Option<u64>,
    rag_steps: Option<u64>,
    final_checkpoint: Option<String>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write_manifest(dir: &Path, m: &Manifest<'_>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(m)?;
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// Summary of a finished training run.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub steps: u64,
    pub rag_steps: u64,
    pub episodes: u64,
    pub rag_updates: u64,
    pub final_checkpoint: PathBuf,
}

pub fn cmd_train(cfg: &TrainConfig, out_dir: &Path) -> CliResult<TrainSummary> {
    cfg.validate().map_err(config_err)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml()).context("writing config.toml")?;
    let mut manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        seeds: Seeds {
            master: cfg.seed,
            streams: Stream::ALL.iter().map(|s| s.name()).collect(),
            workers: cfg.workers,
        },
        start_unix: now(),
        end_unix: None,
        steps: None,
        rag_steps: None,
        final_checkpoint: None,
    };
    write_manifest(out_dir, &manifest)?;

    let mut log = metrics::RunLog::create(out_dir)?;
    let st = if cfg.workers == 1 {
        train(cfg, &mut log)
    } else {
        parallel_train(cfg, &mut log)
    }
    .map_err(|e| CliError::Runtime(e.into()))?;
    log.finish()?;

    let final_checkpoint = out_dir.join("checkpoints").join("final.ckpt");
    manifest.end_unix = Some(now());
    manifest.steps = Some(st.steps);
    manifest.rag_steps = Some(st.rag_steps);
    manifest.final_checkpoint = Some("checkpoints/final.ckpt".into());
    write_manifest(out_dir, &manifest)?;
    Ok(TrainSummary {
        steps: st.steps,
        rag_steps: st.rag_steps,
        episodes: st.episodes,
        rag_updates: st.rag_updates,
        final_checkpoint,
    })
}

/// A preset name or a TOML file holding a terrain description.
pub fn resolve_terrain(arg: &str) -> CliResult<TerrainSpec> {
    if PRESETS.contains(&arg) {
        return TerrainSpec::preset(arg).map_err(config_err);
    }
    let path = Path::new(arg);
    if !path.is_file() {
        return Err(config_err(format!(
            "unknown terrain {arg:?}; expected one of {} or a TOML file",
            PRESETS.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(config_err)?;
    let spec: TerrainSpec = toml::from_str(&text).map_err(config_err)?;
    spec.validate().map_err(config_err)?;
    Ok(spec)
}

/// Writes `x,z` samples every centimetre over [0, span]; returns the row count.
pub fn cmd_terrain(spec: &TerrainSpec, span: f64, out: &Path) -> CliResult<usize> {
    spec.validate().map_err(config_err)?;
    if !(span >= 0.0 && span.is_finite()) {
        return Err(config_err("span must be a non-negative number of metres"));
    }
    let rows = spec.profile(span, 0.01);
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(["x", "z"]).map_err(anyhow::Error::from)?;
    for (x, z) in &rows {
        w.write_record([x.to_string(), z.to_string()]).map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    Ok(rows.len())
}

/// The run configuration stored next to a checkpoint in a run directory.
pub fn config_near(checkpoint: &Path) -> Option<PathBuf> {
    checkpoint
        .ancestors()
        .skip(1)
        .take(2)
        .map(|d| d.join("config.toml"))
        .find(|p| p.is_file())
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub terrain: Option<TerrainSpec>,
    pub steps: usize,
    pub disturb: Option<f64>,
    pub seed: u64,
    pub observation: Option<ObservationMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub steps: usize,
    pub total_reward: f64,
    pub mean_speed: f64,
    pub mean_power: f64,
    /// Over the steps where a support polygon existed.
    pub mean_wsm: Option<f64>,
    pub distance: f64,
    pub fell: bool,
}

pub const LEG_NAMES: [&str; 4] = ["lf", "rf", "lh", "rh"];

pub fn eval_columns() -> Vec<String> {
    let mut c: Vec<String> = ["step", "time", "reward", "r_v", "r_e", "r_b", "r_f", "r_c", "r_u", "curriculum", "power", "wsm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    c.extend(["x", "y", "z", "roll", "pitch", "yaw", "forward_speed"].map(String::from));
    for leg in LEG_NAMES {
        for j in ["abd", "hip", "knee"] {
            c.push(format!("q_{leg}_{j}"));
        }
    }
    for leg in LEG_NAMES {
        for a in ["x", "y", "z"] {
            c.push(format!("foot_{leg}_{a}"));
        }
        c.push(format!("contact_{leg}"));
    }
    c
}

/// Rolls out the deterministic policy from a checkpoint and writes one CSV
/// row per control step.
pub fn cmd_eval(checkpoint: &Path, cfg: &TrainConfig, opts: &EvalOptions, out: &Path) -> CliResult<EvalSummary> {
    let ckpt = Checkpoint::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let cpg = Cpg::new(cfg.cpg).map_err(config_err)?;
    let bundle = PolicyBundle::from_checkpoint(&ckpt, cpg).map_err(|e| CliError::Runtime(e.into()))?;
    let mut sim = cfg.sim_config();
    if let Some(m) = opts.observation {
        sim.observation = m;
    }
    if bundle.obs_dim() != sim.observation.dim() {
        return Err(config_err(format!(
            "checkpoint policy expects {} observations but {:?} mode provides {}",
            bundle.obs_dim(),
            sim.observation,
            sim.observation.dim()
        )));
    }
    if let Some(t) = &opts.terrain {
        sim.terrain = t.clone();
    }
    sim.max_steps = opts.steps.max(1);
    if let Some(m) = opts.disturb {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(config_err("disturbance magnitude must be non-negative"));
        }
        sim.disturbance = Some(Disturbance {
            magnitude: m,
            seed: opts.seed,
        });
    }
    let mut env = QuadrupedEnv::new(sim).map_err(config_err)?;
    let mut rng = stream_rng(opts.seed, Stream::Rollout, 0);
    let policy = Deterministic(&bundle.policy);

    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(eval_columns()).map_err(anyhow::Error::from)?;
    let first = env.reset(&mut rng);
    let start_x = env.state().pos.x;
    let mut state = features(&env, &first);
    let mut s = EvalSummary {
        steps: 0,
        total_reward: 0.0,
        mean_speed: 0.0,
        mean_power: 0.0,
        mean_wsm: None,
        distance: 0.0,
        fell: false,
    };
    let (mut wsm_sum, mut wsm_n) = (0.0, 0usize);
    while s.steps < opts.steps {
        let residual = policy.residual(&state, &mut rng);
        let target = compose_action(&bundle.reference.at(env.time()), &residual);
        let step = env.step(&target).map_err(|e| CliError::Runtime(e.into()))?;
        s.steps += 1;
        let info = env.info().ok_or_else(|| anyhow!("simulator produced no step info"))?;
        let mut row = vec![s.steps.to_string(), env.time().to_string(), step.reward.to_string()];
        row.extend(info.reward.components.iter().map(|c| c.to_string()));
        row.push(info.reward.curriculum.to_string());
        row.push(info.power.to_string());
        row.push(opt(info.wsm));
        row.extend(info.base_position.iter().map(|c| c.to_string()));
        row.extend(info.rpy.iter().map(|c| c.to_string()));
        row.push(info.forward_speed.to_string());
        row.extend(env.state().q.iter().map(|c| c.to_string()));
        for (p, c) in info.foot_positions.iter().zip(info.foot_contacts) {
            row.extend(p.iter().map(|v| v.to_string()));
            row.push((c as u8).to_string());
        }
        w.write_record(&row).map_err(anyhow::Error::from)?;

        s.total_reward += step.reward;
        s.mean_speed += info.forward_speed;
        s.mean_power += info.power;
        if let Some(m) = info.wsm {
            wsm_sum += m;
            wsm_n += 1;
        }
        s.fell |= info.fell;
        state = features(&env, &step.observation);
        if step.terminated {
            break;
        }
    }
    w.flush().map_err(anyhow::Error::from)?;
    if s.steps > 0 {
        s.mean_speed /= s.steps as f64;
        s.mean_power /= s.steps as f64;
        s.distance = env.state().pos.x - start_x;
    }
    s.mean_wsm = (wsm_n > 0).then(|| wsm_sum / wsm_n as f64);
    Ok(s)
}
