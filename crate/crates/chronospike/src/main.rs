use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use chronospike_core::baselines::FeatureMode;
use chronospike::{exit_code, Command, RunConfig, RunFlags};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "chronospike", version, about = "Spiking network that learns to predict rare events")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the ping-pong world and write the episode trace.
    RecordEpisode(Common),
    /// Compute equal-probability velocity bin edges.
    Calibrate(Common),
    /// Train a network on an episode and score its predictions.
    Train(Common),
    /// Score a saved network on an episode with plasticity frozen.
    Eval(Common),
    /// Genetic search over the network hyperparameters.
    Ga {
        #[command(flatten)]
        common: Common,
        /// Continue from the GA state file in the output directory.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        population: Option<usize>,
        /// Stop after this many generations even without a stall.
        #[arg(long)]
        generations: Option<u32>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Train and score the decision-tree baseline.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        features: Option<FeatureArg>,
        #[arg(long)]
        max_depth: Option<u32>,
        #[arg(long)]
        min_leaf: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureArg {
    /// Input nodes that spiked at the step.
    Spikes,
    /// Input nodes whose receptive field holds the state.
    Active,
}

impl From<FeatureArg> for FeatureMode {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Spikes => FeatureMode::Spikes,
            FeatureArg::Active => FeatureMode::Active,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: u64,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: PathBuf,
    /// Episode CSV; overrides the config
    #[arg(long)]
    episode: Option<PathBuf>,
    /// Calibration file; overrides the config
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Network snapshot; overrides the config
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Simulated run length in seconds
    #[arg(long)]
    sim_seconds: Option<u64>,
    /// Scored window at the end of the run, seconds
    #[arg(long)]
    eval_seconds: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.seed = self.seed;
        cfg.out = self.out.clone();
        if let Some(p) = &self.episode {
            cfg.episode = p.clone();
        }
        if let Some(p) = &self.calibration {
            cfg.calibration = p.clone();
        }
        if let Some(p) = &self.snapshot {
            cfg.snapshot = p.clone();
        }
        if let Some(s) = self.sim_seconds {
            cfg.protocol.sim_ms = (s * 1000) as usize;
        }
        if let Some(s) = self.eval_seconds {
            cfg.protocol.eval_ms = (s * 1000) as usize;
        }
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let (command, cfg, flags) = match cli.command {
        Cmd::RecordEpisode(c) => (Command::RecordEpisode, c.resolve()?, RunFlags::default()),
        Cmd::Calibrate(c) => (Command::Calibrate, c.resolve()?, RunFlags::default()),
        Cmd::Train(c) => (Command::Train, c.resolve()?, RunFlags::default()),
        Cmd::Eval(c) => (Command::Eval, c.resolve()?, RunFlags::default()),
        Cmd::Ga { common, resume, population, generations, threads } => {
            let mut cfg = common.resolve()?;
            if let Some(p) = population {
                cfg.ga.population = p;
            }
            if generations.is_some() {
                cfg.ga.max_generations = generations;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            (Command::Ga, cfg, RunFlags { resume })
        }
        Cmd::Baseline { common, features, max_depth, min_leaf } => {
            let mut cfg = common.resolve()?;
            if let Some(f) = features {
                cfg.baseline.features = f.into();
            }
            if let Some(d) = max_depth {
                cfg.baseline.max_depth = d;
            }
            if let Some(m) = min_leaf {
                cfg.baseline.min_leaf = m;
            }
            (Command::Baseline, cfg, RunFlags::default())
        }
    };
    let manifest = chronospike::run(command, &cfg, flags)?;
    println!("{}: wrote {} files to {}", command.name(), manifest.files.len(), cfg.out.display());
    let summary = cfg.out.join(chronospike::commands::SUMMARY_FILE);
    if let Ok(text) = std::fs::read_to_string(summary) {
        print!("{text}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
