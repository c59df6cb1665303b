//! Network snapshot: a JSON document listing neurons, synapses and the plastic
//! state of every L neuron.
//!
//! Reloading rebuilds the topology from the stored parameters, checks it
//! against the listed neurons and synapses, and restores resources and
//! stability. Membrane potentials, in-flight spikes and TSS bookkeeping are
//! not stored, so a reloaded network starts from rest at time 0.

use anyhow::{ensure, Context, Result};
use chronospike_core::columnar::{build_network, ColumnarNetwork, NetworkParams};
use chronospike_core::engine::{Role, SynapseKind};
use chronospike_core::NeuronId;
use serde::{Deserialize, Serialize};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronEntry {
    pub id: NeuronId,
    pub role: Role,
    pub column: u32,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynapseEntry {
    pub source: NeuronId,
    pub target: NeuronId,
    pub kind: SynapseKind,
    pub delay: u32,
    /// Effective weight; block duration in ms for blocking synapses.
    pub weight: f64,
    /// Resource of plastic synapses.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resource: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerEntry {
    pub neuron: NeuronId,
    pub resources: Vec<f64>,
    pub silent_count: u32,
    pub silent_resource_each: f64,
    pub stability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub version: u32,
    /// Simulated time when the snapshot was taken, ms.
    pub time_ms: u64,
    pub params: NetworkParams,
    pub neurons: Vec<NeuronEntry>,
    pub synapses: Vec<SynapseEntry>,
    pub learners: Vec<LearnerEntry>,
}

impl NetworkSnapshot {
    pub fn capture(net: &ColumnarNetwork, params: &NetworkParams) -> Self {
        let (neurons, synapses) = topology(net);
        let learners = net
            .learners()
            .map(|(_, id)| {
                let l = net.network.learner(id).expect("L neuron has plastic state");
                LearnerEntry {
                    neuron: id,
                    resources: l.resources().to_vec(),
                    silent_count: l.silent().count,
                    silent_resource_each: l.silent().resource_each,
                    stability: l.stability().s,
                }
            })
            .collect();
        Self { version: SNAPSHOT_VERSION, time_ms: net.network.now(), params: params.clone(), neurons, synapses, learners }
    }

    /// Rebuild the network and restore its plastic state.
    pub fn restore(&self) -> Result<ColumnarNetwork> {
        ensure!(self.version == SNAPSHOT_VERSION, "unsupported snapshot version {}", self.version);
        let mut net = build_network(&self.params).context("snapshot parameters")?;
        let params = net.network.params().clone();
        for e in &self.learners {
            let l = net
                .network
                .learner_mut(e.neuron)
                .with_context(|| format!("neuron {} is not an L neuron", e.neuron))?;
            ensure!(e.silent_count == l.silent().count, "neuron {}: silent synapse count differs", e.neuron);
            l.restore(e.resources.clone(), e.silent_resource_each, e.stability, &params)
                .with_context(|| format!("restoring neuron {}", e.neuron))?;
        }
        ensure!(self.learners.len() == net.learners().count(), "snapshot lists the wrong number of L neurons");
        let (neurons, synapses) = topology(&net);
        ensure!(neurons == self.neurons, "neuron list does not match the stored parameters");
        ensure!(synapses.len() == self.synapses.len(), "synapse count does not match the stored parameters");
        for (i, (a, b)) in synapses.iter().zip(&self.synapses).enumerate() {
            let same_shape = a.source == b.source && a.target == b.target && a.kind == b.kind && a.delay == b.delay;
            let same_value = match a.kind {
                SynapseKind::PlasticExcitatory => a.resource == b.resource,
                _ => a.weight == b.weight,
            };
            ensure!(same_shape && same_value, "synapse {i} does not match the stored network");
        }
        Ok(net)
    }
}

fn topology(net: &ColumnarNetwork) -> (Vec<NeuronEntry>, Vec<SynapseEntry>) {
    let n = &net.network;
    let neurons = (0..n.len() as NeuronId)
        .map(|id| NeuronEntry { id, role: n.role(id), column: n.column(id), tau: n.neuron(id).tau })
        .collect();
    let synapses = n
        .synapses()
        .iter()
        .map(|s| {
            let resource = (s.kind == SynapseKind::PlasticExcitatory)
                .then(|| n.learner(s.target).map(|l| l.resources()[s.slot as usize]))
                .flatten();
            SynapseEntry {
                source: s.source,
                target: s.target,
                kind: s.kind,
                delay: s.delay,
                weight: n.synapse_weight(s),
                resource,
            }
        })
        .collect();
    (neurons, synapses)
}
