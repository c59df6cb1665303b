//! The pipelines behind the CLI subcommands. Each writes its artifacts, the
//! resolved config and a hashed manifest into the output directory.

use std::cell::Cell;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use chronospike_core::baselines::{evaluate_tree, train_tree, Dataset, FeatureMode};
use chronospike_core::columnar::EpisodeOptions;
use chronospike_core::encoding::{calibrate_velocity_edges, sample_velocities, EncodedEpisode, EncoderLayout, SECTION_OFFSETS};
use chronospike_core::experiment::{drive, fitness, network_params, train_eval, Protocol, RunSeeds, TrainEval};
use chronospike_core::gasearch::{Chromosome, GaState};
use chronospike_core::pingpong::World;
use chronospike_core::{derive_seed, Time};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, Needs, RunConfig};
use crate::dataset::{export_tree, write_dataset};
use crate::formats::{self, Calibration, Manifest, MANIFEST_FILE};
use crate::snapshot::NetworkSnapshot;

const CALIBRATION_STREAM: u64 = 0xCA1;
const GA_STREAM: u64 = 0x6A;

pub const EPISODE_FILE: &str = "episode.csv";
pub const CALIBRATION_FILE: &str = "calibration.toml";
pub const SNAPSHOT_FILE: &str = "network.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const GA_STATE_FILE: &str = "ga_state.json";
pub const GA_LOG_FILE: &str = "ga_log.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    RecordEpisode,
    Calibrate,
    Train,
    Eval,
    Ga,
    Baseline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RecordEpisode => "record-episode",
            Command::Calibrate => "calibrate",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Ga => "ga",
            Command::Baseline => "baseline",
        }
    }

    pub fn needs(self) -> Needs {
        let encodes = !matches!(self, Command::RecordEpisode | Command::Calibrate);
        Needs { episode: encodes, calibration: encodes, snapshot: self == Command::Eval }
    }
}

/// Options that are not part of the run config.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunFlags {
    /// Continue a GA from the state file in the output directory.
    pub resume: bool,
}

/// Validate `cfg` for `command`, run it and return the manifest.
pub fn run(command: Command, cfg: &RunConfig, flags: RunFlags) -> Result<Manifest> {
    cfg.validate(command.needs())?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let files = match command {
        Command::RecordEpisode => record_episode(cfg)?,
        Command::Calibrate => calibrate(cfg)?,
        Command::Train => train(cfg)?,
        Command::Eval => eval(cfg)?,
        Command::Ga => ga(cfg, flags)?,
        Command::Baseline => baseline(cfg)?,
    };
    finish(command, cfg, files)
}

fn finish(command: Command, cfg: &RunConfig, mut files: Vec<PathBuf>) -> Result<Manifest> {
    let config_path = cfg.out.join(CONFIG_FILE);
    std::fs::write(&config_path, cfg.to_toml())?;
    files.push(config_path);
    let manifest = Manifest::build(command.name(), &cfg.out, &files)?;
    formats::save_json(&cfg.out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn write_summary<T: Serialize>(cfg: &RunConfig, summary: &T, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = cfg.out.join(SUMMARY_FILE);
    formats::save_json(&path, summary)?;
    files.push(path);
    Ok(())
}

fn record_episode(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut world = World::new(cfg.world.clone(), cfg.seed).map_err(|e| ConfigError(format!("world: {e}")))?;
    let path = cfg.out.join(EPISODE_FILE);
    let counts = formats::record_episode(&mut world, cfg.protocol.sim_ms, &path)?;
    let mut files = vec![path];
    write_summary(cfg, &counts, &mut files)?;
    Ok(files)
}

/// Velocity bin edges from a world run on the calibration stream of the
/// config seed.
pub fn calibrate_edges(cfg: &RunConfig) -> Result<Calibration> {
    let seed = derive_seed(cfg.seed, CALIBRATION_STREAM);
    let mut world = World::new(cfg.world.clone(), seed).map_err(|e| ConfigError(format!("world: {e}")))?;
    let steps = (cfg.calibration_run.seconds * 1000) as usize;
    let sample = sample_velocities(&mut world, steps);
    let (ex, ey) = calibrate_velocity_edges(&sample).context("calibrating velocity bins")?;
    Ok(Calibration::new(cfg.seed, sample.len(), ex, ey))
}

fn calibrate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let path = cfg.out.join(CALIBRATION_FILE);
    calibrate_edges(cfg)?.save(&path)?;
    Ok(vec![path])
}

/// Calibrated layout and the encoded episode named by the config.
pub fn load_inputs(cfg: &RunConfig) -> Result<(EncoderLayout, EncodedEpisode)> {
    let cal = Calibration::load(&cfg.calibration)?;
    let layout = cfg.layout(cal.vel_x_edges, cal.vel_y_edges)?;
    let rows = formats::read_episode(&cfg.episode)?;
    let episode = formats::encode_episode(&rows, &layout);
    Ok((layout, episode))
}

fn require_length(episode: &EncodedEpisode, steps: usize, what: &str) -> Result<()> {
    if episode.len() < steps {
        return Err(ConfigError(format!("{what}: needs {steps} episode steps, episode has {}", episode.len())).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    r_squared: Option<f64>,
    r_squared_error: Option<String>,
    eval_window_ms: (usize, usize),
    rewards: usize,
    output_spikes_per_column: Vec<usize>,
    first_output_ms: Vec<Option<Time>>,
    max_resource_drift: f64,
    degenerate_skips: u64,
}

impl RunSummary {
    fn new(run: &TrainEval, protocol: &Protocol, episode: &EncodedEpisode) -> Self {
        let levels = protocol.levels;
        let mut per_column = vec![0usize; levels as usize];
        for &(_, k) in &run.log.outputs {
            per_column[k as usize - 1] += 1;
        }
        Self {
            r_squared: run.r_squared.as_ref().ok().copied(),
            r_squared_error: run.r_squared.as_ref().err().map(ToString::to_string),
            eval_window_ms: protocol.eval_window(),
            rewards: episode.rewards.iter().filter(|&&t| (t as usize) < protocol.sim_ms).count(),
            output_spikes_per_column: per_column,
            first_output_ms: run.log.first_output(levels),
            max_resource_drift: run.log.max_resource_drift,
            degenerate_skips: run.log.degenerate_skips,
        }
    }
}

fn train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (layout, episode) = load_inputs(cfg)?;
    require_length(&episode, cfg.protocol.sim_ms, "protocol.sim_ms")?;
    let seeds = RunSeeds::new(cfg.seed);
    let params = network_params(&cfg.chromosome, &cfg.protocol, seeds.network)
        .map_err(|e| ConfigError(format!("chromosome: {e}")))?;
    let opts = EpisodeOptions { bin_ms: cfg.traces.bin_ms, record_spikes: cfg.traces.spikes };
    let run = train_eval(&params, &episode, &layout, seeds.encoder, &cfg.protocol, &opts)?;
    let out = &cfg.out;
    let mut files = Vec::new();
    let mut emit = |on: bool, name: &str, write: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        if on {
            let path = out.join(name);
            write(&path)?;
            files.push(path);
        }
        Ok(())
    };
    emit(cfg.traces.spikes, "spikes.csv", &|p| formats::write_spikes(p, &run.log, &run.network))?;
    emit(cfg.traces.prediction, "prediction.csv", &|p| formats::write_prediction(p, &run.trace))?;
    emit(cfg.traces.firing_rates, "firing_rates.csv", &|p| formats::write_firing_rates(p, &run.log))?;
    emit(cfg.traces.weights, "weight_change.csv", &|p| formats::write_weight_change(p, &run.log))?;
    emit(cfg.traces.stability, "stability.csv", &|p| formats::write_stability(p, &run.log))?;
    if cfg.traces.resources {
        files.extend(formats::write_resources(out, &run.network)?);
    }
    let snapshot = out.join(SNAPSHOT_FILE);
    formats::save_json(&snapshot, &NetworkSnapshot::capture(&run.network, &params))?;
    files.push(snapshot);
    write_summary(cfg, &RunSummary::new(&run, &cfg.protocol, &episode), &mut files)?;
    Ok(files)
}

fn eval(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (layout, episode) = load_inputs(cfg)?;
    require_length(&episode, cfg.protocol.sim_ms, "protocol.sim_ms")?;
    let snapshot: NetworkSnapshot = formats::load_json(&cfg.snapshot)?;
    let mut network = snapshot.restore()?;
    if network.levels() != cfg.protocol.levels {
        return Err(ConfigError(format!(
            "protocol.levels: snapshot has {} columns, config asks for {}",
            network.levels(),
            cfg.protocol.levels
        ))
        .into());
    }
    network.network.set_learning(false);
    let seeds = RunSeeds::new(cfg.seed);
    let opts = EpisodeOptions { bin_ms: cfg.traces.bin_ms, record_spikes: cfg.traces.spikes };
    let run = drive(network, &episode, &layout, seeds.encoder, &cfg.protocol, &opts)?;
    let mut files = Vec::new();
    if cfg.traces.prediction {
        let path = cfg.out.join("prediction.csv");
        formats::write_prediction(&path, &run.trace)?;
        files.push(path);
    }
    if cfg.traces.spikes {
        let path = cfg.out.join("spikes.csv");
        formats::write_spikes(&path, &run.log, &run.network)?;
        files.push(path);
    }
    write_summary(cfg, &RunSummary::new(&run, &cfg.protocol, &episode), &mut files)?;
    Ok(files)
}

/// Protocol of one GA fitness run.
pub fn ga_protocol(cfg: &RunConfig) -> Protocol {
    Protocol { sim_ms: (cfg.ga.sim_seconds * 1000) as usize, eval_ms: (cfg.ga.eval_seconds * 1000) as usize, ..cfg.protocol.clone() }
}

/// Base seed of the fitness runs of individual `index` in `generation`.
pub fn fitness_seed(seed: u64, generation: u32, index: usize) -> u64 {
    derive_seed(derive_seed(seed ^ GA_STREAM, generation as u64), index as u64)
}

/// Evaluate a population in parallel. Results are in population order, so
/// the thread count never changes the outcome.
pub fn evaluate_population(
    genes: &[Chromosome],
    seed: u64,
    generation: u32,
    cfg: &RunConfig,
    episode: &EncodedEpisode,
    layout: &EncoderLayout,
) -> Vec<f64> {
    let protocol = ga_protocol(cfg);
    genes
        .par_iter()
        .enumerate()
        .map(|(i, c)| fitness(c, fitness_seed(seed, generation, i), cfg.ga.runs_per_fitness, episode, layout, &protocol))
        .collect()
}

#[derive(Serialize)]
struct GaSummary {
    generations: u32,
    best_fitness: f64,
    best: Chromosome,
    stopped_by: &'static str,
}

fn ga(cfg: &RunConfig, flags: RunFlags) -> Result<Vec<PathBuf>> {
    let (layout, episode) = load_inputs(cfg)?;
    let protocol = ga_protocol(cfg);
    protocol.validate().map_err(|e| ConfigError(format!("ga: {e}")))?;
    require_length(&episode, protocol.sim_ms, "ga.sim_seconds")?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    let state_path = cfg.out.join(GA_STATE_FILE);
    let log_path = cfg.out.join(GA_LOG_FILE);
    let generation = Cell::new(0u32);
    let evaluate = |genes: &[Chromosome]| {
        let g = generation.get();
        generation.set(g + 1);
        pool.install(|| evaluate_population(genes, cfg.seed, g, cfg, &episode, &layout))
    };
    let save = |state: &GaState| -> Result<()> {
        formats::save_json(&state_path, state)?;
        formats::write_ga_log(&log_path, state)
    };
    let mut state = if flags.resume && state_path.is_file() {
        let state: GaState = formats::load_json(&state_path)?;
        ensure!(state.seed == cfg.seed, "{}: state was started with seed {}", state_path.display(), state.seed);
        generation.set(state.generations);
        state
    } else {
        let state = GaState::start(&cfg.ga, cfg.seed, evaluate)?;
        save(&state)?;
        state
    };
    while !state.finished(&cfg.ga) {
        state.advance(&cfg.ga, evaluate);
        save(&state)?;
    }
    let stopped_by = if state.stall >= cfg.ga.stall_generations { "stall" } else { "max_generations" };
    let best_path = cfg.out.join("best.toml");
    #[derive(Serialize)]
    struct Best<'a> {
        chromosome: &'a Chromosome,
    }
    std::fs::write(&best_path, toml::to_string(&Best { chromosome: &state.best.genes })?)?;
    let mut files = vec![state_path.clone(), log_path.clone(), best_path];
    let summary = GaSummary {
        generations: state.generations,
        best_fitness: state.best.fitness,
        best: state.best.genes.clone(),
        stopped_by,
    };
    write_summary(cfg, &summary, &mut files)?;
    Ok(files)
}

/// Name of input node `f`, e.g. `ball_y[12]`.
pub fn input_name(f: u16) -> String {
    const NAMES: [&str; 6] = ["ball_x", "ball_y", "vx", "vy", "racket_y", "close_zone"];
    let f = f as usize;
    let section = SECTION_OFFSETS.iter().rposition(|&o| o <= f).unwrap_or(0);
    format!("{}[{}]", NAMES[section], f - SECTION_OFFSETS[section])
}

#[derive(Serialize)]
struct BaselineSummary {
    features: FeatureMode,
    train_rows: usize,
    test_rows: usize,
    train_r_squared: Option<f64>,
    test_r_squared: Option<f64>,
    test_r_squared_error: Option<String>,
    depth: u32,
    leaves: usize,
}

/// The dataset the tree baseline trains on.
pub fn baseline_dataset(cfg: &RunConfig, layout: &EncoderLayout, episode: &EncodedEpisode) -> Result<Dataset> {
    let p = &cfg.protocol;
    let data = match cfg.baseline.features {
        FeatureMode::Spikes => {
            Dataset::from_episode(episode, layout, RunSeeds::new(cfg.seed).encoder, p.sim_ms, p.levels, p.interval)?
        }
        FeatureMode::Active => Dataset::from_active_nodes(episode, p.sim_ms, p.levels, p.interval)?,
    };
    Ok(data)
}

fn baseline(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (layout, episode) = load_inputs(cfg)?;
    require_length(&episode, cfg.protocol.sim_ms, "protocol.sim_ms")?;
    let data = baseline_dataset(cfg, &layout, &episode)?;
    let (split, end) = cfg.protocol.eval_window();
    ensure!(split > 0, "protocol: no training rows before the evaluation window");
    let tree = train_tree(&data, 0..split, &cfg.baseline.tree_params())?;
    let test = evaluate_tree(&tree, &data, split..end);
    let dataset_path = cfg.out.join("dataset.bin");
    write_dataset(&dataset_path, &data)?;
    let tree_path = cfg.out.join("tree.txt");
    std::fs::write(&tree_path, export_tree(&tree, input_name))?;
    let mut files = vec![dataset_path, tree_path];
    let summary = BaselineSummary {
        features: cfg.baseline.features,
        train_rows: split,
        test_rows: end - split,
        train_r_squared: evaluate_tree(&tree, &data, 0..split).ok(),
        test_r_squared: test.as_ref().ok().copied(),
        test_r_squared_error: test.as_ref().err().map(ToString::to_string),
        depth: tree.depth(),
        leaves: tree.leaves(),
    };
    write_summary(cfg, &summary, &mut files)?;
    Ok(files)
}
