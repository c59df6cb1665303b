//! Rate coding of the ping-pong world into 133 input nodes.
//!
//! | nodes   | section                                        |
//! |---------|------------------------------------------------|
//! | 0–29    | ball x, 30 equal bins over the box             |
//! | 30–59   | ball y, 30 equal bins                          |
//! | 60–68   | ball vx, 9 equal-probability bins              |
//! | 69–77   | ball vy, 9 equal-probability bins              |
//! | 78–107  | racket y, 30 equal bins                        |
//! | 108–132 | 5×5 grid of a 3×3 cm field attached to racket |
//!
//! Exactly one node per section is active (the close-zone section may have
//! none); an active node fires at 300 Hz.

use alloc::vec::Vec;

use rand::Rng;

use crate::pingpong::{World, WorldState};
use crate::{Error, NeuronId, Result, Time};

pub const INPUT_COUNT: usize = 133;
pub const SECTION_OFFSETS: [usize; 6] = [0, 30, 60, 69, 78, 108];
pub const SECTION_SIZES: [usize; 6] = [30, 30, 9, 9, 30, 25];
pub const VELOCITY_BINS: usize = 9;
pub const MIN_CALIBRATION_SAMPLES: usize = 10_000;

const BOX_HALF: f64 = 5.0;
const POSITION_BINS: f64 = 30.0;
const FIELD_SIZE: f64 = 3.0;
const FIELD_CELLS: f64 = 5.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SpikeMode {
    /// Independent Bernoulli draw per active node and step.
    #[default]
    Bernoulli,
    /// Deterministic firing every 1/rate steps (phase shifted per node).
    Periodic,
    /// Deterministic firing every 1/rate steps, all nodes in phase.
    Synchronous,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderLayout {
    pub vel_x_edges: [f64; VELOCITY_BINS - 1],
    pub vel_y_edges: [f64; VELOCITY_BINS - 1],
    /// Firing rate of an active node in Hz.
    pub rate_hz: f64,
    pub mode: SpikeMode,
}

impl EncoderLayout {
    pub fn new(vel_x_edges: [f64; 8], vel_y_edges: [f64; 8]) -> Result<Self> {
        let layout = Self { vel_x_edges, vel_y_edges, rate_hz: 300.0, mode: SpikeMode::Bernoulli };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if !strictly_increasing(&self.vel_x_edges) {
            return Err(Error::param("vel_x_edges", "must be finite and strictly increasing"));
        }
        if !strictly_increasing(&self.vel_y_edges) {
            return Err(Error::param("vel_y_edges", "must be finite and strictly increasing"));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz <= 1000.0) {
            return Err(Error::param("rate_hz", "must lie in (0, 1000]"));
        }
        Ok(())
    }

    /// Spike probability of an active node per 1 ms step.
    pub fn spike_probability(&self) -> f64 {
        self.rate_hz / 1000.0
    }

    /// The active node of every section for `state`.
    pub fn active_nodes(&self, state: &WorldState) -> ActiveNodes {
        let mut nodes = [ActiveNodes::NONE; 6];
        nodes[0] = position_bin(state.ball_x) as u8;
        nodes[1] = (SECTION_OFFSETS[1] + position_bin(state.ball_y)) as u8;
        nodes[2] = (SECTION_OFFSETS[2] + edge_bin(state.ball_vx, &self.vel_x_edges)) as u8;
        nodes[3] = (SECTION_OFFSETS[3] + edge_bin(state.ball_vy, &self.vel_y_edges)) as u8;
        nodes[4] = (SECTION_OFFSETS[4] + position_bin(state.racket_y)) as u8;
        if let Some(cell) = close_zone_cell(state) {
            nodes[5] = (SECTION_OFFSETS[5] + cell) as u8;
        }
        ActiveNodes(nodes)
    }
}

fn strictly_increasing(edges: &[f64]) -> bool {
    edges.iter().all(|e| e.is_finite()) && edges.windows(2).all(|w| w[0] < w[1])
}

/// Bin of a coordinate over `[-5, 5]` cut into 30 equal bins.
pub fn position_bin(x: f64) -> usize {
    let b = libm::floor((x + BOX_HALF) * POSITION_BINS / (2.0 * BOX_HALF));
    b.clamp(0.0, POSITION_BINS - 1.0) as usize
}

/// Half-open bins `[e_{i-1}, e_i)`: a value on an edge goes to the upper bin.
pub fn edge_bin(v: f64, edges: &[f64]) -> usize {
    edges.iter().take_while(|&&e| e <= v).count()
}

/// Cell index `row * 5 + col` of the ball inside the 3×3 cm field whose left
/// border is centered on the racket, or `None` outside the field.
pub fn close_zone_cell(state: &WorldState) -> Option<usize> {
    let cell = FIELD_SIZE / FIELD_CELLS;
    let col = libm::floor((state.ball_x + BOX_HALF) / cell);
    let row = libm::floor((state.ball_y - (state.racket_y - FIELD_SIZE / 2.0)) / cell);
    let inside = (0.0..FIELD_CELLS).contains(&col) && (0.0..FIELD_CELLS).contains(&row);
    inside.then(|| (row as usize) * FIELD_CELLS as usize + col as usize)
}

/// Active node per section, `NONE` for an empty close zone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActiveNodes(pub [u8; 6]);

impl ActiveNodes {
    pub const NONE: u8 = u8::MAX;

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().filter(|&&n| n != Self::NONE).map(|&n| n as usize)
    }
}

/// Input nodes firing at step `t`, appended to `out`.
pub fn encode_active<R: Rng + ?Sized>(
    layout: &EncoderLayout,
    active: ActiveNodes,
    rng: &mut R,
    t: Time,
    out: &mut Vec<NeuronId>,
) {
    let p = layout.spike_probability();
    for node in active.iter() {
        let fires = match layout.mode {
            SpikeMode::Bernoulli => rng.random_bool(p),
            SpikeMode::Periodic => {
                let phase = (t + node as Time * 7) as f64;
                libm::floor((phase + 1.0) * p) > libm::floor(phase * p)
            }
            SpikeMode::Synchronous => {
                let phase = t as f64;
                libm::floor((phase + 1.0) * p) > libm::floor(phase * p)
            }
        };
        if fires {
            out.push(node as NeuronId);
        }
    }
}

pub fn encode_state<R: Rng + ?Sized>(
    layout: &EncoderLayout,
    state: &WorldState,
    rng: &mut R,
    t: Time,
    out: &mut Vec<NeuronId>,
) {
    encode_active(layout, layout.active_nodes(state), rng, t, out);
}

/// `bins - 1` cut points giving `bins` equal-mass bins of `values`. Each cut
/// lies midway between the two order statistics it separates.
pub fn equal_mass_edges(values: &mut [f64], bins: usize) -> Vec<f64> {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    (1..bins)
        .map(|i| {
            let k = libm::round((i * n) as f64 / bins as f64) as usize;
            let k = k.clamp(1, n.saturating_sub(1).max(1));
            0.5 * (values[k - 1] + values[k.min(n - 1)])
        })
        .collect()
}

/// Equal-probability velocity bin edges from a sample of `(vx, vy)`.
pub fn calibrate_velocity_edges(sample: &[(f64, f64)]) -> Result<([f64; 8], [f64; 8])> {
    if sample.len() < MIN_CALIBRATION_SAMPLES {
        return Err(Error::SampleTooSmall { got: sample.len(), min: MIN_CALIBRATION_SAMPLES });
    }
    let mut vx: Vec<f64> = sample.iter().map(|s| s.0).collect();
    let mut vy: Vec<f64> = sample.iter().map(|s| s.1).collect();
    let ex = to_edges(equal_mass_edges(&mut vx, VELOCITY_BINS), "vx")?;
    let ey = to_edges(equal_mass_edges(&mut vy, VELOCITY_BINS), "vy")?;
    Ok((ex, ey))
}

fn to_edges(v: Vec<f64>, component: &'static str) -> Result<[f64; 8]> {
    let edges: [f64; 8] = v.try_into().map_err(|_| Error::DegenerateDistribution { component })?;
    if !strictly_increasing(&edges) {
        return Err(Error::DegenerateDistribution { component });
    }
    Ok(edges)
}

/// Run `world` for `steps` steps and collect the ball velocity after each.
pub fn sample_velocities(world: &mut World, steps: usize) -> Vec<(f64, f64)> {
    (0..steps)
        .map(|_| {
            world.step();
            (world.state.ball_vx, world.state.ball_vy)
        })
        .collect()
}

/// A recorded world run reduced to what the network needs: the active input
/// nodes of every step and the reward/punishment times.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedEpisode {
    pub active: Vec<ActiveNodes>,
    pub rewards: Vec<Time>,
    pub punishments: Vec<Time>,
}

impl EncodedEpisode {
    /// Step `world` `steps` times; frame `t` is the state after step `t`.
    pub fn record(world: &mut World, steps: usize, layout: &EncoderLayout) -> Self {
        let mut ep = Self {
            active: Vec::with_capacity(steps),
            rewards: Vec::new(),
            punishments: Vec::new(),
        };
        for t in 0..steps {
            let out = world.step();
            ep.push(&world.state, out.reward, out.punishment, t as Time, layout);
        }
        ep
    }

    pub fn push(
        &mut self,
        state: &WorldState,
        reward: bool,
        punishment: bool,
        t: Time,
        layout: &EncoderLayout,
    ) {
        self.active.push(layout.active_nodes(state));
        if reward {
            self.rewards.push(t);
        }
        if punishment {
            self.punishments.push(t);
        }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Reward flag per step.
    pub fn reward_flags(&self) -> Vec<bool> {
        let mut flags = alloc::vec![false; self.len()];
        for &t in &self.rewards {
            flags[t as usize] = true;
        }
        flags
    }

    /// Copy of the first `steps` steps.
    pub fn truncated(&self, steps: usize) -> Self {
        let steps = steps.min(self.len());
        Self {
            active: self.active[..steps].to_vec(),
            rewards: self.rewards.iter().copied().filter(|&t| (t as usize) < steps).collect(),
            punishments: self
                .punishments
                .iter()
                .copied()
                .filter(|&t| (t as usize) < steps)
                .collect(),
        }
    }
}
