//! One training-and-evaluation run of a chromosome on a recorded episode,
//! and the GA fitness built from several such runs.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::columnar::{build_network, run_episode, ColumnarNetwork, EpisodeLog, EpisodeOptions, NetworkParams};
use crate::encoding::{encode_active, EncodedEpisode, EncoderLayout, INPUT_COUNT};
use crate::gasearch::Chromosome;
use crate::plasticity::PlasticityParams;
use crate::prediction::{decode, ground_truth, PredictionTrace};
use crate::{derive_seed, Error, Result, Time};

/// Fitness assigned to runs whose R² is undefined.
pub const UNDEFINED_FITNESS: f64 = -1.0;

const NETWORK_STREAM: u64 = 0;
const ENCODER_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Protocol {
    /// Column count `N`.
    pub levels: u8,
    /// Prediction interval `L`, ms.
    pub interval: Time,
    /// Simulated steps per run.
    pub sim_ms: usize,
    /// R² is taken over the last `eval_ms` steps.
    pub eval_ms: usize,
    /// Initial resources are uniform on `(0, init_fraction · (w_max - w_min))`.
    pub init_fraction: f64,
    /// See [`NetworkParams::target_blocks_outputs`].
    pub target_blocks_outputs: bool,
}

impl Default for Protocol {
    fn default() -> Self {
        Self { levels: 3, interval: 100, sim_ms: 2_000_000, eval_ms: 600_000, init_fraction: 0.1, target_blocks_outputs: false }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::param("levels", "must be at least 1"));
        }
        if self.interval == 0 {
            return Err(Error::param("interval", "must be at least 1 ms"));
        }
        if self.eval_ms == 0 || self.eval_ms > self.sim_ms {
            return Err(Error::param("eval_ms", "must lie in 1..=sim_ms"));
        }
        if !(0.0..=1.0).contains(&self.init_fraction) {
            return Err(Error::param("init_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn eval_window(&self) -> (usize, usize) {
        (self.sim_ms - self.eval_ms, self.sim_ms)
    }
}

/// Seeds of run `run` derived from a base seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSeeds {
    pub network: u64,
    pub encoder: u64,
}

impl RunSeeds {
    pub fn new(base: u64) -> Self {
        Self { network: derive_seed(base, NETWORK_STREAM), encoder: derive_seed(base, ENCODER_STREAM) }
    }
}

pub fn network_params(c: &Chromosome, protocol: &Protocol, seed: u64) -> Result<NetworkParams> {
    c.validate()?;
    protocol.validate()?;
    let plasticity =
        PlasticityParams::new(c.w_min, c.w_max, c.d_h_bar, c.r_s, c.tau, protocol.interval, c.n_s)?;
    let hi = protocol.init_fraction * (c.w_max - c.w_min);
    Ok(NetworkParams {
        columns: protocol.levels as u32,
        per_column: c.n0,
        input_count: INPUT_COUNT as u32,
        tau: c.tau,
        interval: protocol.interval,
        plasticity,
        init_resource: (0.0, hi),
        seed,
        block_duration: protocol.interval,
        target_blocks_outputs: protocol.target_blocks_outputs,
    })
}

pub struct TrainEval {
    /// `Err` when the evaluation window has no variance in `P`.
    pub r_squared: Result<f64>,
    pub trace: PredictionTrace,
    pub log: EpisodeLog,
    pub network: ColumnarNetwork,
}

/// Train a fresh network on `episode` with learning on throughout and score
/// `P*` against `P` on the protocol's evaluation window.
pub fn train_eval(
    params: &NetworkParams,
    episode: &EncodedEpisode,
    layout: &EncoderLayout,
    encoder_seed: u64,
    protocol: &Protocol,
    opts: &EpisodeOptions,
) -> Result<TrainEval> {
    let network = build_network(params)?;
    drive(network, episode, layout, encoder_seed, protocol, opts)
}

/// Run an existing network over `episode` from its current state and score
/// it. Plasticity follows the network's learning flag.
pub fn drive(
    mut network: ColumnarNetwork,
    episode: &EncodedEpisode,
    layout: &EncoderLayout,
    encoder_seed: u64,
    protocol: &Protocol,
    opts: &EpisodeOptions,
) -> Result<TrainEval> {
    protocol.validate()?;
    layout.validate()?;
    if episode.len() < protocol.sim_ms {
        return Err(Error::LengthMismatch { left: episode.len(), right: protocol.sim_ms });
    }
    if network.levels() != protocol.levels {
        return Err(Error::param("levels", "network column count differs from protocol levels"));
    }
    let start = network.network.now();
    let mut rng = ChaCha8Rng::seed_from_u64(encoder_seed);
    let rewards = episode.reward_flags();
    let log = run_episode(
        &mut network,
        protocol.sim_ms,
        |t, out| {
            let step = (t - start) as usize;
            encode_active(layout, episode.active[step], &mut rng, step as Time, out);
            rewards[step]
        },
        opts,
    );
    let reward_times: Vec<Time> =
        episode.rewards.iter().copied().filter(|&t| (t as usize) < protocol.sim_ms).collect();
    let outputs: Vec<(Time, u8)> =
        log.output_values(protocol.levels).into_iter().map(|(t, n)| (t - start, n)).collect();
    let truth = ground_truth(&reward_times, protocol.sim_ms, protocol.levels, protocol.interval);
    let predicted = decode(&outputs, &reward_times, protocol.sim_ms, protocol.levels, protocol.interval);
    let trace = PredictionTrace::new(truth, predicted, protocol.levels, protocol.interval)?;
    let (start, end) = protocol.eval_window();
    let r_squared = trace.r_squared(start, end);
    Ok(TrainEval { r_squared, trace, log, network })
}

/// R² of one run, or [`UNDEFINED_FITNESS`] if it cannot be computed.
pub fn run_score(
    c: &Chromosome,
    run_seed: u64,
    episode: &EncodedEpisode,
    layout: &EncoderLayout,
    protocol: &Protocol,
) -> f64 {
    let seeds = RunSeeds::new(run_seed);
    let score = network_params(c, protocol, seeds.network).and_then(|p| {
        train_eval(&p, episode, layout, seeds.encoder, protocol, &EpisodeOptions::default())
    });
    match score.and_then(|r| r.r_squared) {
        Ok(r) if r.is_finite() => r,
        _ => UNDEFINED_FITNESS,
    }
}

/// Mean R² over `runs` runs seeded `base_seed + i`.
pub fn fitness(
    c: &Chromosome,
    base_seed: u64,
    runs: u32,
    episode: &EncodedEpisode,
    layout: &EncoderLayout,
    protocol: &Protocol,
) -> f64 {
    let runs = runs.max(1);
    (0..runs)
        .map(|i| run_score(c, base_seed.wrapping_add(i as u64), episode, layout, protocol))
        .sum::<f64>()
        / runs as f64
}
