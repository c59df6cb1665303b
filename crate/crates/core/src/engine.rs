//! Clocked spiking substrate with a 1 ms step.
//!
//! Neurons are leaky integrate-and-fire with current-based delta synapses and
//! a firing threshold of 1. Besides excitatory synapses there are blocking
//! synapses, whose weight is a duration during which the target ignores all
//! input, and dopamine synapses, which trigger potentiation on an L neuron.
//!
//! Within a step, deliveries are processed blocking first, then dopamine,
//! then excitatory; neurons are integrated in ascending id order.

use alloc::vec;
use alloc::vec::Vec;

use crate::plasticity::{Learner, PlasticityParams};
use crate::{Error, NeuronId, Result, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Role {
    Input,
    L,
    Wta,
    Gate,
    V,
    Secrew,
    Target,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Input => "INPUT",
            Role::L => "L",
            Role::Wta => "WTA",
            Role::Gate => "GATE",
            Role::V => "V",
            Role::Secrew => "SECREW",
            Role::Target => "TARGET",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Some(match s {
            "INPUT" => Role::Input,
            "L" => Role::L,
            "WTA" => Role::Wta,
            "GATE" => Role::Gate,
            "V" => Role::V,
            "SECREW" => Role::Secrew,
            "TARGET" => Role::Target,
            _ => return None,
        })
    }
}

/// Per-step multiplicative decay `max(0, 1 - 1/tau)` (forward Euler, 1 ms).
pub fn decay_factor(tau: f64) -> f64 {
    (1.0 - 1.0 / tau).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NeuronState {
    pub u: f64,
    pub tau: f64,
    /// Incoming spikes are ignored while `t < inactive_until`.
    pub inactive_until: Time,
    /// Step at which `u` was last brought up to date. Decay between updates
    /// is applied lazily.
    pub last_update: Time,
}

impl NeuronState {
    pub fn new(tau: f64) -> Self {
        Self { u: 0.0, tau, inactive_until: 0, last_update: 0 }
    }

    /// Advance to step `t` with the summed increment `input` of this step.
    /// Returns whether the neuron fires.
    pub fn advance(&mut self, input: f64, t: Time) -> bool {
        let steps = t.saturating_sub(self.last_update);
        if steps > 0 && self.u != 0.0 {
            let f = decay_factor(self.tau);
            self.u *= if steps == 1 { f } else { libm::pow(f, steps as f64) };
        }
        self.last_update = t;
        if t < self.inactive_until {
            return false;
        }
        self.u += input;
        if self.u >= 1.0 {
            self.u = 0.0;
            true
        } else {
            false
        }
    }

    pub fn apply_block(&mut self, duration: Time, t: Time) {
        self.inactive_until = self.inactive_until.max(t + duration);
    }

    pub fn is_blocked(&self, t: Time) -> bool {
        t < self.inactive_until
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SynapseKind {
    PlasticExcitatory,
    FixedExcitatory,
    Blocking,
    Dopamine,
}

impl SynapseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SynapseKind::PlasticExcitatory => "plastic",
            SynapseKind::FixedExcitatory => "fixed",
            SynapseKind::Blocking => "blocking",
            SynapseKind::Dopamine => "dopamine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "plastic" => SynapseKind::PlasticExcitatory,
            "fixed" => SynapseKind::FixedExcitatory,
            "blocking" => SynapseKind::Blocking,
            "dopamine" => SynapseKind::Dopamine,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Synapse {
    pub source: NeuronId,
    pub target: NeuronId,
    pub kind: SynapseKind,
    pub delay: u32,
    /// Potential increment for fixed synapses, block duration in ms for
    /// blocking ones. Unused for plastic synapses, whose weight lives in the
    /// target's [`Learner`], and for dopamine synapses.
    pub weight: f64,
    /// Slot of a plastic synapse inside the target learner.
    pub slot: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpikeEvent {
    pub arrival: Time,
    pub synapse: u32,
}

/// Ring of per-step delivery buckets; capacity is `max_delay + 1` steps.
#[derive(Clone, Debug)]
struct SpikeQueue {
    buckets: Vec<Vec<SpikeEvent>>,
}

impl SpikeQueue {
    fn new(max_delay: u32) -> Self {
        Self { buckets: vec![Vec::new(); max_delay as usize + 1] }
    }

    fn push(&mut self, ev: SpikeEvent) {
        let n = self.buckets.len() as u64;
        self.buckets[(ev.arrival % n) as usize].push(ev);
    }

    fn take(&mut self, t: Time) -> Vec<SpikeEvent> {
        let n = self.buckets.len() as u64;
        core::mem::take(&mut self.buckets[(t % n) as usize])
    }

    fn give_back(&mut self, t: Time, mut buf: Vec<SpikeEvent>) {
        let n = self.buckets.len() as u64;
        let slot = &mut self.buckets[(t % n) as usize];
        if slot.is_empty() {
            buf.clear();
            *slot = buf;
        }
    }

    fn pending(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Spike {
    pub neuron: NeuronId,
    pub role: Role,
}

#[derive(Clone, Debug, Default)]
pub struct NetworkBuilder {
    roles: Vec<Role>,
    columns: Vec<u32>,
    taus: Vec<f64>,
    synapses: Vec<Synapse>,
    initial_resources: Vec<Vec<f64>>,
    learner_of: Vec<Option<u32>>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a neuron. `column` is 1-based; 0 means "not part of a column".
    pub fn add_neuron(&mut self, role: Role, column: u32, tau: f64) -> NeuronId {
        let id = self.roles.len() as NeuronId;
        self.roles.push(role);
        self.columns.push(column);
        self.taus.push(tau);
        if role == Role::L {
            self.learner_of.push(Some(self.initial_resources.len() as u32));
            self.initial_resources.push(Vec::new());
        } else {
            self.learner_of.push(None);
        }
        id
    }

    pub fn add_synapse(
        &mut self,
        source: NeuronId,
        target: NeuronId,
        kind: SynapseKind,
        delay: u32,
        weight: f64,
    ) {
        self.synapses.push(Synapse { source, target, kind, delay, weight, slot: 0 });
    }

    /// Add a plastic synapse with its initial resource. The target must be an
    /// L neuron.
    pub fn add_plastic(&mut self, source: NeuronId, target: NeuronId, delay: u32, resource: f64) {
        let slot = match self.learner_of.get(target as usize).copied().flatten() {
            Some(li) => {
                let res = &mut self.initial_resources[li as usize];
                res.push(resource);
                res.len() as u32 - 1
            }
            None => u32::MAX,
        };
        self.synapses.push(Synapse {
            source,
            target,
            kind: SynapseKind::PlasticExcitatory,
            delay,
            weight: 0.0,
            slot,
        });
    }

    pub fn neuron_count(&self) -> usize {
        self.roles.len()
    }

    pub fn build(self, params: PlasticityParams) -> Result<Network> {
        params.validate()?;
        let n = self.roles.len();
        for (index, s) in self.synapses.iter().enumerate() {
            if s.source as usize >= n || s.target as usize >= n {
                return Err(Error::InvalidSynapse { index, reason: "endpoint out of range" });
            }
            if s.delay == 0 {
                return Err(Error::InvalidSynapse { index, reason: "delay must be at least 1 ms" });
            }
            let target_is_l = self.roles[s.target as usize] == Role::L;
            match s.kind {
                SynapseKind::FixedExcitatory if !(s.weight >= 1.0) => {
                    return Err(Error::InvalidSynapse { index, reason: "fixed weight below 1" });
                }
                SynapseKind::Blocking if !(s.weight >= 1.0) || libm::trunc(s.weight) != s.weight => {
                    return Err(Error::InvalidSynapse {
                        index,
                        reason: "block duration must be a positive whole number of ms",
                    });
                }
                SynapseKind::PlasticExcitatory | SynapseKind::Dopamine if !target_is_l => {
                    return Err(Error::InvalidSynapse { index, reason: "target is not an L neuron" });
                }
                _ => {}
            }
        }
        if self.taus.iter().any(|&tau| !(tau >= 1.0)) {
            return Err(Error::param("tau", "must be at least one step (1 ms)"));
        }

        let max_delay = self.synapses.iter().map(|s| s.delay).max().unwrap_or(1);
        let mut offsets = vec![0u32; n + 1];
        for s in &self.synapses {
            offsets[s.source as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut outgoing = vec![0u32; self.synapses.len()];
        for (id, s) in self.synapses.iter().enumerate() {
            let at = &mut fill[s.source as usize];
            outgoing[*at as usize] = id as u32;
            *at += 1;
        }

        let learners = self
            .initial_resources
            .into_iter()
            .map(|r| Learner::new(r, &params))
            .collect();

        Ok(Network {
            neurons: self.taus.iter().map(|&tau| NeuronState::new(tau)).collect(),
            roles: self.roles,
            columns: self.columns,
            synapses: self.synapses,
            out_offsets: offsets,
            outgoing,
            learner_of: self.learner_of,
            learners,
            params,
            queue: SpikeQueue::new(max_delay),
            learning: true,
            next_t: 0,
            pending: vec![0.0; n],
            touched_flag: vec![false; n],
            touched: Vec::new(),
            fired: Vec::new(),
        })
    }
}

/// Neurons, synapse adjacency, the delayed-spike queue and the plastic state
/// of the L neurons.
#[derive(Clone, Debug)]
pub struct Network {
    neurons: Vec<NeuronState>,
    roles: Vec<Role>,
    columns: Vec<u32>,
    synapses: Vec<Synapse>,
    out_offsets: Vec<u32>,
    outgoing: Vec<u32>,
    learner_of: Vec<Option<u32>>,
    learners: Vec<Learner>,
    params: PlasticityParams,
    queue: SpikeQueue,
    learning: bool,
    next_t: Time,
    pending: Vec<f64>,
    touched_flag: Vec<bool>,
    touched: Vec<NeuronId>,
    fired: Vec<Spike>,
}

impl Network {
    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn role(&self, id: NeuronId) -> Role {
        self.roles[id as usize]
    }

    pub fn column(&self, id: NeuronId) -> u32 {
        self.columns[id as usize]
    }

    pub fn neuron(&self, id: NeuronId) -> &NeuronState {
        &self.neurons[id as usize]
    }

    pub fn neuron_mut(&mut self, id: NeuronId) -> &mut NeuronState {
        &mut self.neurons[id as usize]
    }

    pub fn synapses(&self) -> &[Synapse] {
        &self.synapses
    }

    pub fn outgoing(&self, id: NeuronId) -> impl Iterator<Item = &Synapse> + '_ {
        let lo = self.out_offsets[id as usize] as usize;
        let hi = self.out_offsets[id as usize + 1] as usize;
        self.outgoing[lo..hi].iter().map(move |&s| &self.synapses[s as usize])
    }

    /// Effective weight of a synapse; plastic weights are read from the
    /// target learner.
    pub fn synapse_weight(&self, s: &Synapse) -> f64 {
        match s.kind {
            SynapseKind::PlasticExcitatory => self
                .learner(s.target)
                .map(|l| l.weight(s.slot as usize))
                .unwrap_or(f64::NAN),
            _ => s.weight,
        }
    }

    pub fn params(&self) -> &PlasticityParams {
        &self.params
    }

    pub fn learner(&self, id: NeuronId) -> Option<&Learner> {
        self.learner_of[id as usize].map(|li| &self.learners[li as usize])
    }

    pub fn learner_mut(&mut self, id: NeuronId) -> Option<&mut Learner> {
        self.learner_of[id as usize].map(move |li| &mut self.learners[li as usize])
    }

    pub fn learners(&self) -> &[Learner] {
        &self.learners
    }

    pub fn learners_mut(&mut self) -> &mut [Learner] {
        &mut self.learners
    }

    pub fn learning(&self) -> bool {
        self.learning
    }

    /// Enable or freeze plasticity (inference-only runs).
    pub fn set_learning(&mut self, on: bool) {
        self.learning = on;
    }

    /// Time of the next step to run.
    pub fn now(&self) -> Time {
        self.next_t
    }

    pub fn pending_spikes(&self) -> usize {
        self.queue.pending()
    }

    /// Run step `t`. `external` neurons (input nodes) fire unconditionally.
    /// Returns every neuron that fired at `t` in ascending id order.
    ///
    /// # Panics
    /// If `t` is not the step following the previous call.
    pub fn step(&mut self, t: Time, external: &[NeuronId]) -> &[Spike] {
        assert_eq!(t, self.next_t, "network steps must be consecutive");
        self.next_t = t + 1;
        self.fired.clear();

        let due = self.queue.take(t);

        for ev in &due {
            debug_assert_eq!(ev.arrival, t);
            let s = &self.synapses[ev.synapse as usize];
            if s.kind == SynapseKind::Blocking {
                self.neurons[s.target as usize].apply_block(s.weight as Time, t);
            }
        }

        if self.learning {
            for ev in &due {
                let s = &self.synapses[ev.synapse as usize];
                if s.kind == SynapseKind::Dopamine {
                    if let Some(li) = self.learner_of[s.target as usize] {
                        self.learners[li as usize].apply_dopamine(t, &self.params);
                    }
                }
            }
        }

        for ev in &due {
            let s = &self.synapses[ev.synapse as usize];
            let w = match s.kind {
                SynapseKind::FixedExcitatory => s.weight,
                SynapseKind::PlasticExcitatory => {
                    let li = self.learner_of[s.target as usize].expect("plastic target is an L neuron");
                    let l = &mut self.learners[li as usize];
                    l.record_arrival(s.slot as usize, t);
                    l.weight(s.slot as usize)
                }
                _ => continue,
            };
            let target = s.target as usize;
            self.pending[target] += w;
            if !self.touched_flag[target] {
                self.touched_flag[target] = true;
                self.touched.push(s.target);
            }
        }
        self.queue.give_back(t, due);

        self.touched.sort_unstable();
        for &id in &self.touched {
            let i = id as usize;
            let input = core::mem::take(&mut self.pending[i]);
            self.touched_flag[i] = false;
            if self.neurons[i].advance(input, t) {
                self.fired.push(Spike { neuron: id, role: self.roles[i] });
            }
        }
        self.touched.clear();

        if !external.is_empty() {
            for &id in external {
                self.fired.push(Spike { neuron: id, role: self.roles[id as usize] });
            }
            self.fired.sort_unstable_by_key(|s| s.neuron);
            self.fired.dedup_by_key(|s| s.neuron);
        }

        for k in 0..self.fired.len() {
            let id = self.fired[k].neuron;
            if self.learning {
                if let Some(li) = self.learner_of[id as usize] {
                    self.learners[li as usize].on_post_spike(t, &self.params);
                }
            }
            let lo = self.out_offsets[id as usize] as usize;
            let hi = self.out_offsets[id as usize + 1] as usize;
            for &sid in &self.outgoing[lo..hi] {
                let delay = self.synapses[sid as usize].delay as Time;
                self.queue.push(SpikeEvent { arrival: t + delay, synapse: sid });
            }
        }

        &self.fired
    }
}
