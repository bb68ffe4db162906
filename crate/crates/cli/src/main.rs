use clap::{Parser, Subcommand, ValueEnum};
use gaitevo_cli::{
    apply_overrides, cmd_eval, cmd_terrain, cmd_train, config_near, load_config, resolve_terrain, CliError, CliResult,
    EvalOptions, Overrides,
};
use gaitevo_core::sim::ObservationMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gaitevo", version, about = "Train, evaluate and inspect evolved-reference gait policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Observation {
    Full,
    Partial,
}

impl From<Observation> for ObservationMode {
    fn from(o: Observation) -> Self {
        match o {
            Observation::Full => ObservationMode::Full,
            Observation::Partial => ObservationMode::Partial,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run training and write checkpoints, metrics and a manifest.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Comparison group preset, 0 to 5.
        #[arg(long)]
        group: Option<u8>,
        #[arg(long, value_enum)]
        observation: Option<Observation>,
        /// Override the learning-step budget.
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Roll out the deterministic policy of a checkpoint.
    Eval {
        checkpoint: PathBuf,
        /// Training config; defaults to the config.toml of the run directory.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset name or terrain TOML file.
        #[arg(long)]
        terrain: Option<String>,
        #[arg(long, default_value_t = 300)]
        steps: usize,
        /// Push magnitude (N) applied every other second.
        #[arg(long)]
        disturb: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        observation: Option<Observation>,
        #[arg(long, default_value = "eval.csv")]
        out: PathBuf,
    },
    /// Export a terrain height profile at 1 cm resolution.
    Terrain {
        /// Preset name or terrain TOML file.
        spec: String,
        #[arg(long, default_value = "terrain.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        span: f64,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train {
            config,
            out_dir,
            seed,
            workers,
            group,
            observation,
            max_steps,
        } => {
            let mut cfg = load_config(&config)?;
            let o = Overrides {
                seed,
                workers,
                group,
                observation: observation.map(Into::into),
                max_steps,
            };
            apply_overrides(&mut cfg, &o)?;
            let s = cmd_train(&cfg, &out_dir)?;
            println!(
                "steps {} rag_steps {} episodes {} rag_updates {} checkpoint {}",
                s.steps,
                s.rag_steps,
                s.episodes,
                s.rag_updates,
                s.final_checkpoint.display()
            );
        }
        Command::Eval {
            checkpoint,
            config,
            terrain,
            steps,
            disturb,
            seed,
            observation,
            out,
        } => {
            let path = config
                .or_else(|| config_near(&checkpoint))
                .ok_or_else(|| CliError::Config("no --config given and no config.toml beside the checkpoint".into()))?;
            let cfg = load_config(&path)?;
            let opts = EvalOptions {
                terrain: terrain.as_deref().map(resolve_terrain).transpose()?,
                steps,
                disturb,
                seed,
                observation: observation.map(Into::into),
            };
            let s = cmd_eval(&checkpoint, &cfg, &opts, &out)?;
            let wsm = s.mean_wsm.map(|m| format!("{m:.4}")).unwrap_or_else(|| "n/a".into());
            println!(
                "steps {} reward {:.3} mean_speed {:.4} mean_power {:.3} mean_wsm {} distance {:.3} fell {}",
                s.steps, s.total_reward, s.mean_speed, s.mean_power, wsm, s.distance, s.fell
            );
        }
        Command::Terrain { spec, out, span } => {
            let t = resolve_terrain(&spec)?;
            let n = cmd_terrain(&t, span, &out)?;
            println!("{n} rows written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
