//! CSV, TOML and JSON artifacts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use chronospike_core::columnar::{ColumnarNetwork, EpisodeLog};
use chronospike_core::encoding::{EncodedEpisode, EncoderLayout, SECTION_OFFSETS, SECTION_SIZES};
use chronospike_core::engine::Role;
use chronospike_core::gasearch::{GaState, GENE_NAMES};
use chronospike_core::pingpong::{World, WorldState};
use chronospike_core::prediction::PredictionTrace;
use chronospike_core::Time;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(csv::Reader::from_reader(BufReader::new(file)))
}

/// One world step of an episode trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub time_ms: Time,
    pub ball_x: f64,
    pub ball_y: f64,
    pub vx: f64,
    pub vy: f64,
    pub racket_y: f64,
    pub reward: u8,
    pub punishment: u8,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EpisodeCounts {
    pub steps: usize,
    pub rewards: usize,
    pub punishments: usize,
}

/// Step `world` for `steps` steps and write one row per step. Frame `t` is
/// the state after step `t`.
pub fn record_episode(world: &mut World, steps: usize, path: &Path) -> Result<EpisodeCounts> {
    let mut w = csv_writer(path)?;
    let mut counts = EpisodeCounts { steps, ..Default::default() };
    for t in 0..steps {
        let out = world.step();
        let s = &world.state;
        counts.rewards += out.reward as usize;
        counts.punishments += out.punishment as usize;
        w.serialize(EpisodeRow {
            time_ms: t as Time,
            ball_x: s.ball_x,
            ball_y: s.ball_y,
            vx: s.ball_vx,
            vy: s.ball_vy,
            racket_y: s.racket_y,
            reward: out.reward as u8,
            punishment: out.punishment as u8,
        })?;
    }
    w.flush()?;
    Ok(counts)
}

pub fn read_episode(path: &Path) -> Result<Vec<EpisodeRow>> {
    let mut rows = Vec::new();
    for (i, row) in csv_reader(path)?.deserialize::<EpisodeRow>().enumerate() {
        let row = row.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        ensure!(row.time_ms == i as Time, "{}: row {} has time_ms {}, expected {i}", path.display(), i + 1, row.time_ms);
        ensure!(row.reward <= 1 && row.punishment <= 1, "{}: row {}: flags must be 0 or 1", path.display(), i + 1);
        rows.push(row);
    }
    Ok(rows)
}

/// Encode an episode trace with `layout`.
pub fn encode_episode(rows: &[EpisodeRow], layout: &EncoderLayout) -> EncodedEpisode {
    let mut ep = EncodedEpisode { active: Vec::with_capacity(rows.len()), rewards: Vec::new(), punishments: Vec::new() };
    for r in rows {
        let state = WorldState {
            ball_x: r.ball_x,
            ball_y: r.ball_y,
            ball_vx: r.vx,
            ball_vy: r.vy,
            racket_y: r.racket_y,
            ..WorldState::default()
        };
        ep.push(&state, r.reward == 1, r.punishment == 1, r.time_ms, layout);
    }
    ep
}

/// Velocity bin edges and the input layout they were computed for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    /// Base seed of the calibration run.
    pub seed: u64,
    pub samples: usize,
    pub vel_x_edges: [f64; 8],
    pub vel_y_edges: [f64; 8],
    /// First node of each input section: ball x, ball y, vx, vy, racket y,
    /// close zone.
    pub section_offsets: [usize; 6],
    pub section_sizes: [usize; 6],
}

impl Calibration {
    pub fn new(seed: u64, samples: usize, vel_x_edges: [f64; 8], vel_y_edges: [f64; 8]) -> Self {
        Self { seed, samples, vel_x_edges, vel_y_edges, section_offsets: SECTION_OFFSETS, section_sizes: SECTION_SIZES }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, toml::to_string(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let c: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if c.section_offsets != SECTION_OFFSETS || c.section_sizes != SECTION_SIZES {
            bail!("{}: input layout does not match this build", path.display());
        }
        Ok(c)
    }
}

pub fn write_spikes(path: &Path, log: &EpisodeLog, net: &ColumnarNetwork) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time_ms", "neuron_id", "role", "column_index"])?;
    for &(t, n) in &log.spikes {
        let role = net.network.role(n);
        let column = if role == Role::Target { 0 } else { net.network.column(n) };
        w.write_record([t.to_string(), n.to_string(), role.as_str().to_owned(), column.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_prediction(path: &Path, trace: &PredictionTrace) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time_ms", "P", "P_star"])?;
    for (t, (p, q)) in trace.truth.iter().zip(&trace.predicted).enumerate() {
        w.write_record([t.to_string(), p.to_string(), q.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// L-neuron firing rate per bin, Hz.
pub fn write_firing_rates(path: &Path, log: &EpisodeLog) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time_ms", "neuron_id", "column_index", "rate_hz"])?;
    let hz = 1000.0 / log.bin_ms as f64;
    for s in &log.learners {
        for (b, &n) in s.spikes.iter().enumerate() {
            let t = b as Time * log.bin_ms;
            w.write_record([t.to_string(), s.neuron.to_string(), s.column.to_string(), (n as f64 * hz).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Sum of |Δw| over each column's L neurons per bin.
pub fn write_weight_change(path: &Path, log: &EpisodeLog) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time_ms", "column_index", "sum_abs_dw"])?;
    let columns = log.learners.iter().map(|s| s.column).max().unwrap_or(0);
    let bins = log.learners.first().map_or(0, |s| s.weight_change.len());
    for c in 1..=columns {
        for b in 0..bins {
            let sum: f64 = log.learners.iter().filter(|s| s.column == c).map(|s| s.weight_change[b]).sum();
            w.write_record([(b as Time * log.bin_ms).to_string(), c.to_string(), sum.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Stability of every L neuron at the end of each bin.
pub fn write_stability(path: &Path, log: &EpisodeLog) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time_ms", "neuron_id", "column_index", "stability"])?;
    for s in &log.learners {
        for (b, v) in s.stability.iter().enumerate() {
            let t = (b as Time + 1) * log.bin_ms;
            w.write_record([t.to_string(), s.neuron.to_string(), s.column.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One resource snapshot per L neuron: connected synapses by input index,
/// then the silent ones.
pub fn write_resources(dir: &Path, net: &ColumnarNetwork) -> Result<Vec<PathBuf>> {
    let params = net.network.params();
    let mut paths = Vec::new();
    for (_, l) in net.learners() {
        let learner = net.network.learner(l).context("L neuron without plastic state")?;
        let path = dir.join(format!("resources_L{l}.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record(["synapse_index", "resource", "weight"])?;
        for (i, (&r, &wt)) in learner.resources().iter().zip(learner.weights()).enumerate() {
            w.write_record([i.to_string(), r.to_string(), wt.to_string()])?;
        }
        let silent = learner.silent();
        let silent_w = chronospike_core::plasticity::resource_to_weight(silent.resource_each, params.w_min, params.w_max);
        for k in 0..silent.count as usize {
            let i = learner.len() + k;
            w.write_record([i.to_string(), silent.resource_each.to_string(), silent_w.to_string()])?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn write_ga_log(path: &Path, state: &GaState) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["generation", "best_fitness", "mean_fitness"];
    header.extend(GENE_NAMES);
    w.write_record(&header)?;
    for r in &state.log {
        let mut row = vec![r.generation.to_string(), r.best_fitness.to_string(), r.mean_fitness.to_string()];
        row.extend(r.best.genes().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Every artifact of a run with its content hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let mut file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok((bytes, hex::encode(hasher.finalize())))
}

impl Manifest {
    /// Hash `files` (paths inside `dir`) into a manifest, sorted by path.
    pub fn build(command: &str, dir: &Path, files: &[PathBuf]) -> Result<Self> {
        let mut entries = Vec::with_capacity(files.len());
        for f in files {
            let (bytes, sha256) = sha256_file(f)?;
            let rel = f.strip_prefix(dir).unwrap_or(f);
            entries.push(ManifestEntry { path: rel.to_string_lossy().into_owned(), bytes, sha256 });
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        entries.dedup_by(|a, b| a.path == b.path);
        Ok(Self { command: command.to_owned(), files: entries })
    }

    /// Check that every listed file exists under `dir` with its recorded hash.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for e in &self.files {
            let (bytes, sha) = sha256_file(&dir.join(&e.path))?;
            ensure!(bytes == e.bytes && sha == e.sha256, "{} does not match the manifest", e.path);
        }
        Ok(())
    }
}
