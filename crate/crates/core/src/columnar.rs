//! The columnar predictor network.
//!
//! `N` columns, one per prediction interval; column 1 (leftmost) stands for
//! the soonest interval and emits value `N`, column `k` emits `N + 1 - k`.
//! Each column holds `n0` triplets `L → WTA → GATE` plus one `V` and one
//! `SECREW` neuron:
//!
//! * every sensory input projects to every L neuron through a plastic synapse
//!   with a 3 ms delay; all other synapses have a 1 ms delay;
//! * `L_i` forces `WTA_i`; a firing WTA blocks the other WTAs and the other
//!   GATEs of its column and forces `V`, which forces `SECREW`;
//! * `V` and `SECREW` of column `k` block the `SECREW` of every column to the
//!   right;
//! * `GATE_i` feeds the dopamine synapse of `L_i`; the target node forces the
//!   GATEs of column 1 and `SECREW_k` forces the GATEs of column `k + 1`.

use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{Network, NetworkBuilder, Role, SynapseKind};
use crate::plasticity::PlasticityParams;
use crate::{Error, NeuronId, Result, Time};

pub const INPUT_DELAY: u32 = 3;
pub const LINK_DELAY: u32 = 1;
pub const FORCING_WEIGHT: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkParams {
    /// Column count `N`.
    pub columns: u32,
    /// Triplets per column `n0`.
    pub per_column: u32,
    pub input_count: u32,
    /// L-neuron membrane time constant, ms.
    pub tau: f64,
    /// Prediction interval `L`, ms.
    pub interval: Time,
    pub plasticity: PlasticityParams,
    /// Initial plastic resources are drawn uniformly from this range.
    pub init_resource: (f64, f64),
    pub seed: u64,
    /// Duration of every blocking synapse, ms.
    pub block_duration: Time,
    /// The target node also blocks every SECREW, like the SECREW of a
    /// column to the left of column 1.
    #[cfg_attr(feature = "serde", serde(default))]
    pub target_blocks_outputs: bool,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        if self.columns == 0 || self.columns > u8::MAX as u32 {
            return Err(Error::param("columns", "must lie in 1..=255"));
        }
        if self.per_column == 0 {
            return Err(Error::param("per_column", "must be at least 1"));
        }
        if self.interval == 0 {
            return Err(Error::param("interval", "must be positive"));
        }
        if !(self.tau >= 1.0) {
            return Err(Error::param("tau", "must be at least 1 ms"));
        }
        let (lo, hi) = self.init_resource;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param("init_resource", "need finite lo <= hi"));
        }
        if self.block_duration == 0 {
            return Err(Error::param("block_duration", "must be positive"));
        }
        self.plasticity.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub l: Vec<NeuronId>,
    pub wta: Vec<NeuronId>,
    pub gate: Vec<NeuronId>,
    pub v: NeuronId,
    pub secrew: NeuronId,
}

#[derive(Clone, Debug)]
pub struct ColumnarNetwork {
    pub network: Network,
    pub inputs: Range<NeuronId>,
    pub target: NeuronId,
    pub columns: Vec<Column>,
}

impl ColumnarNetwork {
    pub fn levels(&self) -> u8 {
        self.columns.len() as u8
    }

    /// Predicted proximity value of a 1-based column.
    pub fn column_value(&self, column: u32) -> u8 {
        (self.columns.len() as u32 + 1 - column) as u8
    }

    /// L neurons in column order.
    pub fn learners(&self) -> impl Iterator<Item = (u32, NeuronId)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.l.iter().map(move |&l| (k as u32 + 1, l)))
    }
}

pub fn build_network(params: &NetworkParams) -> Result<ColumnarNetwork> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut b = NetworkBuilder::new();
    let n0 = params.per_column as usize;

    let inputs = 0..params.input_count;
    for _ in inputs.clone() {
        b.add_neuron(Role::Input, 0, 1.0);
    }
    let target = b.add_neuron(Role::Target, 0, 1.0);

    let mut columns = Vec::with_capacity(params.columns as usize);
    for k in 1..=params.columns {
        let l: Vec<_> = (0..n0).map(|_| b.add_neuron(Role::L, k, params.tau)).collect();
        let wta: Vec<_> = (0..n0).map(|_| b.add_neuron(Role::Wta, k, 1.0)).collect();
        let gate: Vec<_> = (0..n0).map(|_| b.add_neuron(Role::Gate, k, 1.0)).collect();
        let v = b.add_neuron(Role::V, k, 1.0);
        let secrew = b.add_neuron(Role::Secrew, k, 1.0);
        columns.push(Column { l, wta, gate, v, secrew });
    }

    let (lo, hi) = params.init_resource;
    let block = params.block_duration as f64;
    for col in &columns {
        for &l in &col.l {
            for input in inputs.clone() {
                let r = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                b.add_plastic(input, l, INPUT_DELAY, r);
            }
        }
        for i in 0..n0 {
            b.add_synapse(col.l[i], col.wta[i], SynapseKind::FixedExcitatory, LINK_DELAY, FORCING_WEIGHT);
            for j in (0..n0).filter(|&j| j != i) {
                b.add_synapse(col.wta[i], col.wta[j], SynapseKind::Blocking, LINK_DELAY, block);
                b.add_synapse(col.wta[i], col.gate[j], SynapseKind::Blocking, LINK_DELAY, block);
            }
            b.add_synapse(col.wta[i], col.v, SynapseKind::FixedExcitatory, LINK_DELAY, FORCING_WEIGHT);
            b.add_synapse(col.gate[i], col.l[i], SynapseKind::Dopamine, LINK_DELAY, 0.0);
        }
        b.add_synapse(col.v, col.secrew, SynapseKind::FixedExcitatory, LINK_DELAY, FORCING_WEIGHT);
    }

    for (k, col) in columns.iter().enumerate() {
        for right in &columns[k + 1..] {
            b.add_synapse(col.v, right.secrew, SynapseKind::Blocking, LINK_DELAY, block);
            b.add_synapse(col.secrew, right.secrew, SynapseKind::Blocking, LINK_DELAY, block);
        }
        if let Some(next) = columns.get(k + 1) {
            for &g in &next.gate {
                b.add_synapse(col.secrew, g, SynapseKind::FixedExcitatory, LINK_DELAY, FORCING_WEIGHT);
            }
        }
    }
    for &g in &columns[0].gate {
        b.add_synapse(target, g, SynapseKind::FixedExcitatory, LINK_DELAY, FORCING_WEIGHT);
    }
    if params.target_blocks_outputs {
        for col in &columns {
            b.add_synapse(target, col.secrew, SynapseKind::Blocking, LINK_DELAY, block);
        }
    }

    let network = b.build(params.plasticity.clone())?;
    Ok(ColumnarNetwork { network, inputs, target, columns })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOptions {
    /// Width of the diagnostic time bins, ms.
    pub bin_ms: Time,
    /// Keep every non-input spike in [`EpisodeLog::spikes`].
    pub record_spikes: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self { bin_ms: 1000, record_spikes: false }
    }
}

/// Per-L-neuron diagnostic series, one entry per time bin.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearnerSeries {
    pub neuron: NeuronId,
    pub column: u32,
    pub spikes: Vec<u32>,
    pub weight_change: Vec<f64>,
    /// Stability at the end of each bin.
    pub stability: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeLog {
    /// SECREW spikes as `(time, column)`, column 1-based.
    pub outputs: Vec<(Time, u32)>,
    /// Non-input spikes `(time, neuron)` when requested.
    pub spikes: Vec<(Time, NeuronId)>,
    pub bin_ms: Time,
    pub learners: Vec<LearnerSeries>,
    /// Largest relative change of any L neuron's total resource seen at a bin
    /// boundary.
    pub max_resource_drift: f64,
    pub degenerate_skips: u64,
}

impl EpisodeLog {
    /// Output spikes as decoder input `(time, value)`.
    pub fn output_values(&self, levels: u8) -> Vec<(Time, u8)> {
        self.outputs.iter().map(|&(t, k)| (t, levels + 1 - k as u8)).collect()
    }

    /// Time of the first output spike of every column.
    pub fn first_output(&self, levels: u8) -> Vec<Option<Time>> {
        let mut first = alloc::vec![None; levels as usize];
        for &(t, k) in &self.outputs {
            first[k as usize - 1].get_or_insert(t);
        }
        first
    }
}

/// Drive `net` for `steps` steps starting at its current time.
///
/// `env(t, inputs)` pushes the sensory input indices firing at `t` and
/// returns whether the target event happens at `t`.
pub fn run_episode<F>(
    net: &mut ColumnarNetwork,
    steps: usize,
    mut env: F,
    opts: &EpisodeOptions,
) -> EpisodeLog
where
    F: FnMut(Time, &mut Vec<NeuronId>) -> bool,
{
    let bin_ms = opts.bin_ms.max(1);
    let learner_ids: Vec<(u32, NeuronId)> = net.learners().collect();
    let mut log = EpisodeLog {
        bin_ms,
        learners: learner_ids
            .iter()
            .map(|&(column, neuron)| LearnerSeries { neuron, column, ..Default::default() })
            .collect(),
        ..Default::default()
    };
    let totals0: Vec<f64> = learner_ids
        .iter()
        .map(|&(_, l)| net.network.learner(l).map_or(0.0, |x| x.total_resource()))
        .collect();
    let skips0: u64 = net.network.learners().iter().map(|l| l.degenerate_skips()).sum();
    let mut bin_spikes = alloc::vec![0u32; learner_ids.len()];
    let slot_of: Vec<usize> = {
        let mut m = alloc::vec![usize::MAX; net.network.len()];
        for (i, &(_, l)) in learner_ids.iter().enumerate() {
            m[l as usize] = i;
        }
        m
    };

    let column_of: Vec<u32> = (0..net.network.len() as NeuronId).map(|n| net.network.column(n)).collect();
    let start = net.network.now();
    let mut inputs: Vec<NeuronId> = Vec::new();
    for step in 0..steps {
        let t = start + step as Time;
        inputs.clear();
        if env(t, &mut inputs) {
            inputs.push(net.target);
        }
        let fired = net.network.step(t, &inputs);
        for s in fired {
            match s.role {
                Role::Input => continue,
                Role::Secrew => log.outputs.push((t, column_of[s.neuron as usize])),
                Role::L => bin_spikes[slot_of[s.neuron as usize]] += 1,
                _ => {}
            }
            if opts.record_spikes {
                log.spikes.push((t, s.neuron));
            }
        }

        let bin_end = (t + 1 - start) % bin_ms == 0 || step + 1 == steps;
        if bin_end {
            for (i, series) in log.learners.iter_mut().enumerate() {
                let l = net.network.learner_mut(series.neuron).expect("L neuron has plastic state");
                series.spikes.push(core::mem::take(&mut bin_spikes[i]));
                series.weight_change.push(l.take_weight_change());
                series.stability.push(l.stability().s);
                let total = l.total_resource();
                let scale = libm::fabs(totals0[i]).max(f64::MIN_POSITIVE);
                let drift = libm::fabs(total - totals0[i]) / scale;
                log.max_resource_drift = log.max_resource_drift.max(drift);
            }
        }
    }
    let skips: u64 = net.network.learners().iter().map(|l| l.degenerate_skips()).sum();
    log.degenerate_skips = skips - skips0;
    log
}
