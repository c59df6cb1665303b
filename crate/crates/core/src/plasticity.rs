//! Weight dynamics of the learning (L) neurons.
//!
//! Plasticity acts on an unbounded synaptic *resource* `W`; the effective
//! weight is the saturating map [`resource_to_weight`]. Two rules change the
//! resource:
//!
//! * anti-Hebbian depression, bound to tight spike sequences (TSS) of the
//!   postsynaptic neuron: every synapse that received input during the TSS
//!   (or shortly before its onset) is depressed once per TSS;
//! * dopamine potentiation: a spike on the dopamine synapse potentiates every
//!   synapse that received input within the look-back window.
//!
//! Both step sizes shrink as the neuron's stability grows, and every change is
//! compensated on the remaining synapses (silent reservoir included) so that
//! the neuron's total resource never changes.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, Time};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlasticityParams {
    pub w_min: f64,
    pub w_max: f64,
    /// Maximum anti-Hebbian resource step.
    pub d_h_bar: f64,
    /// Maximum dopamine resource step. Kept equal to `d_h_bar`.
    pub d_d_bar: f64,
    /// Stability step.
    pub d_s: f64,
    /// TSS tightness bound in ms.
    pub isi_max: Time,
    /// Eligibility window before a TSS onset, ms.
    pub t_h: f64,
    /// Dopamine look-back window, ms.
    pub t_p: f64,
    /// Number of silent (unconnected reservoir) synapses per neuron.
    pub silent: u32,
    pub stability_enabled: bool,
}

impl PlasticityParams {
    /// Derive the full parameter set from the searched hyperparameters.
    ///
    /// `r_s` is the ratio `d_s / d_h_bar`; a negative ratio disables the
    /// stability mechanism. `tau` is the L-neuron time constant and
    /// `interval` the prediction interval length, both in ms.
    pub fn new(
        w_min: f64,
        w_max: f64,
        d_h_bar: f64,
        r_s: f64,
        tau: f64,
        interval: Time,
        silent: u32,
    ) -> Result<Self> {
        let stability_enabled = r_s >= 0.0;
        let params = Self {
            w_min,
            w_max,
            d_h_bar,
            d_d_bar: d_h_bar,
            d_s: if stability_enabled { r_s * d_h_bar } else { 0.0 },
            isi_max: interval,
            t_h: 3.0 * tau,
            t_p: interval as f64 + 3.0 * tau,
            silent,
            stability_enabled,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_min < 0.0) || !self.w_min.is_finite() {
            return Err(Error::param("w_min", "must be finite and negative"));
        }
        if !(self.w_max > 0.0) || !self.w_max.is_finite() {
            return Err(Error::param("w_max", "must be finite and positive"));
        }
        if !(self.d_h_bar >= 0.0) || !self.d_h_bar.is_finite() {
            return Err(Error::param("d_h_bar", "must be finite and non-negative"));
        }
        if self.d_d_bar != self.d_h_bar {
            return Err(Error::param("d_d_bar", "must equal d_h_bar"));
        }
        if !(self.d_s >= 0.0) || !self.d_s.is_finite() {
            return Err(Error::param("d_s", "must be finite and non-negative"));
        }
        if self.isi_max == 0 {
            return Err(Error::param("isi_max", "must be positive"));
        }
        if !(self.t_h >= 0.0) || !(self.t_p >= 0.0) {
            return Err(Error::param("t_h/t_p", "windows must be non-negative"));
        }
        Ok(())
    }
}

/// Saturating resource → weight map.
///
/// Constant `w_min` for `W <= 0`, strictly increasing for `W > 0` and
/// approaching `w_max` from below as `W` grows.
pub fn resource_to_weight(resource: f64, w_min: f64, w_max: f64) -> f64 {
    let span = w_max - w_min;
    let r = if resource > 0.0 { resource } else { 0.0 };
    w_min + span * r / (span + r)
}

/// Plasticity step scale `min(2^-s, 1)`.
pub fn stability_scale(s: f64) -> f64 {
    libm::exp2(-s).min(1.0)
}

/// Effective anti-Hebbian and dopamine steps `(d_h, d_d)` for a neuron.
pub fn effective_rates(stability: &StabilityState, params: &PlasticityParams) -> (f64, f64) {
    let scale = if stability.enabled { stability_scale(stability.s) } else { 1.0 };
    (params.d_h_bar * scale, params.d_d_bar * scale)
}

/// Online segmentation of a postsynaptic spike train into tight spike
/// sequences.
///
/// The set of synapses already depressed in the current TSS is stored by the
/// owning [`Learner`] as per-synapse epoch stamps; `epoch` increments at every
/// onset, which clears that set.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TssTracker {
    pub last_post_spike: Option<Time>,
    pub current_tss_onset: Option<Time>,
    pub epoch: u32,
}

impl TssTracker {
    /// Register a postsynaptic spike; returns whether it starts a new TSS.
    pub fn record(&mut self, t: Time, isi_max: Time) -> bool {
        let onset = match self.last_post_spike {
            None => true,
            Some(prev) => t - prev > isi_max,
        };
        if onset {
            self.current_tss_onset = Some(t);
            self.epoch += 1;
        }
        self.last_post_spike = Some(t);
        onset
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityState {
    pub s: f64,
    pub enabled: bool,
}

impl StabilityState {
    pub fn new(enabled: bool) -> Self {
        Self { s: 0.0, enabled }
    }

    /// Stability adjustment factor for a dopamine spike arriving `since_onset`
    /// ms after the most recent TSS onset (`None`: no TSS yet).
    pub fn dopamine_factor(since_onset: Option<Time>, isi_max: Time) -> f64 {
        match since_onset {
            None => -1.0,
            Some(dt) => {
                let isi = isi_max as f64;
                let dev = libm::fabs(dt as f64 - isi) / isi;
                (2.0 - dev).max(-1.0)
            }
        }
    }
}

/// Register a post spike in the tracker and apply the
/// per-TSS stability decrement.
pub fn on_post_spike(
    tracker: &mut TssTracker,
    stability: &mut StabilityState,
    t: Time,
    params: &PlasticityParams,
) -> bool {
    let onset = tracker.record(t, params.isi_max);
    if onset && stability.enabled {
        stability.s -= params.d_s;
    }
    onset
}

/// Resource reservoir of the silent synapses of one neuron.
///
/// Silent synapses start at zero and are never the direct target of a
/// plasticity act, so all of them always carry the same resource.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SilentPool {
    pub count: u32,
    pub resource_each: f64,
}

impl SilentPool {
    pub fn total(&self) -> f64 {
        self.count as f64 * self.resource_each
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conservation {
    /// Nothing changed, nothing to compensate.
    Idle,
    /// Compensation distributed over the unchanged synapses.
    Balanced,
    /// Every synapse changed and there is no silent reservoir: skipped.
    Degenerate,
}

/// Keep the total resource constant after a plasticity act.
///
/// `changed[i]` marks the synapses modified by the act and `applied_delta` is
/// the signed sum of their modifications. Every other synapse, silent ones
/// included, receives an equal share of `-applied_delta`.
pub fn conserve_total_resource(
    resources: &mut [f64],
    changed: &[bool],
    silent: &mut SilentPool,
    applied_delta: f64,
) -> Conservation {
    debug_assert_eq!(resources.len(), changed.len());
    if applied_delta == 0.0 {
        return Conservation::Idle;
    }
    let unchanged = changed.iter().filter(|c| !**c).count() + silent.count as usize;
    if unchanged == 0 {
        return Conservation::Degenerate;
    }
    let share = -applied_delta / unchanged as f64;
    for (r, c) in resources.iter_mut().zip(changed) {
        if !*c {
            *r += share;
        }
    }
    silent.resource_each += share;
    Conservation::Balanced
}

/// Plastic state of one L neuron: one slot per input synapse plus the silent
/// reservoir, the TSS tracker and the stability value.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Learner {
    resources: Vec<f64>,
    weights: Vec<f64>,
    /// Most recent presynaptic arrival per synapse. Every eligibility query
    /// asks "any arrival in [from, now]", for which the latest arrival is
    /// sufficient.
    last_arrival: Vec<Option<Time>>,
    depressed_epoch: Vec<u32>,
    silent: SilentPool,
    tracker: TssTracker,
    stability: StabilityState,
    #[cfg_attr(feature = "serde", serde(skip))]
    changed: Vec<bool>,
    weight_change: f64,
    degenerate_skips: u64,
}

impl Learner {
    pub fn new(resources: Vec<f64>, params: &PlasticityParams) -> Self {
        let n = resources.len();
        let weights = resources
            .iter()
            .map(|&r| resource_to_weight(r, params.w_min, params.w_max))
            .collect();
        Self {
            resources,
            weights,
            last_arrival: vec![None; n],
            depressed_epoch: vec![0; n],
            silent: SilentPool { count: params.silent, resource_each: 0.0 },
            tracker: TssTracker::default(),
            stability: StabilityState::new(params.stability_enabled),
            changed: vec![false; n],
            weight_change: 0.0,
            degenerate_skips: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn weight(&self, slot: usize) -> f64 {
        self.weights[slot]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn resources(&self) -> &[f64] {
        &self.resources
    }

    pub fn silent(&self) -> &SilentPool {
        &self.silent
    }

    pub fn tracker(&self) -> &TssTracker {
        &self.tracker
    }

    pub fn stability(&self) -> &StabilityState {
        &self.stability
    }

    pub fn degenerate_skips(&self) -> u64 {
        self.degenerate_skips
    }

    /// Connected plus silent resource.
    pub fn total_resource(&self) -> f64 {
        self.resources.iter().sum::<f64>() + self.silent.total()
    }

    /// Sum of |Δw| since the last call.
    pub fn take_weight_change(&mut self) -> f64 {
        core::mem::take(&mut self.weight_change)
    }

    /// Log a presynaptic spike arrival on `slot` at time `t`.
    pub fn record_arrival(&mut self, slot: usize, t: Time) {
        self.last_arrival[slot] = Some(t);
    }

    /// Restore plastic state, e.g. from a snapshot.
    pub fn restore(
        &mut self,
        resources: Vec<f64>,
        silent_each: f64,
        stability: f64,
        params: &PlasticityParams,
    ) -> Result<()> {
        if resources.len() != self.resources.len() {
            return Err(Error::LengthMismatch { left: resources.len(), right: self.resources.len() });
        }
        self.resources = resources;
        self.silent.resource_each = silent_each;
        self.stability.s = if self.stability.enabled { stability } else { 0.0 };
        self.refresh_weights(params);
        self.weight_change = 0.0;
        Ok(())
    }

    /// Postsynaptic spike at `t`: TSS bookkeeping, stability decrement, then
    /// anti-Hebbian depression. Returns whether the spike opened a new TSS.
    pub fn on_post_spike(&mut self, t: Time, params: &PlasticityParams) -> bool {
        let onset = on_post_spike(&mut self.tracker, &mut self.stability, t, params);
        self.apply_anti_hebbian(t, params);
        onset
    }

    /// Depress every synapse with an arrival in `[onset - T_H, t]` that was
    /// not yet depressed in the current TSS. Returns the applied delta.
    pub fn apply_anti_hebbian(&mut self, t: Time, params: &PlasticityParams) -> f64 {
        let Some(onset) = self.tracker.current_tss_onset else {
            return 0.0;
        };
        let (d_h, _) = effective_rates(&self.stability, params);
        let from = onset as f64 - params.t_h;
        let epoch = self.tracker.epoch;
        let mut count = 0usize;
        for i in 0..self.resources.len() {
            let eligible = matches!(self.last_arrival[i], Some(a) if a <= t && a as f64 >= from);
            let fresh = self.depressed_epoch[i] != epoch;
            self.changed[i] = eligible && fresh;
            if self.changed[i] {
                self.resources[i] -= d_h;
                self.depressed_epoch[i] = epoch;
                count += 1;
            }
        }
        let delta = -d_h * count as f64;
        self.finish_act(delta, params);
        delta
    }

    /// Dopamine spike at `t`: potentiate synapses with an arrival in
    /// `[t - T_p, t]`, then adjust stability. Returns the applied delta.
    pub fn apply_dopamine(&mut self, t: Time, params: &PlasticityParams) -> f64 {
        let (_, d_d) = effective_rates(&self.stability, params);
        let from = t as f64 - params.t_p;
        let mut count = 0usize;
        for i in 0..self.resources.len() {
            let eligible = matches!(self.last_arrival[i], Some(a) if a <= t && a as f64 >= from);
            self.changed[i] = eligible;
            if eligible {
                self.resources[i] += d_d;
                count += 1;
            }
        }
        let delta = d_d * count as f64;
        self.finish_act(delta, params);
        if self.stability.enabled {
            let since = self.tracker.current_tss_onset.map(|o| t - o);
            self.stability.s += params.d_s * StabilityState::dopamine_factor(since, params.isi_max);
        }
        delta
    }

    fn finish_act(&mut self, delta: f64, params: &PlasticityParams) {
        if delta == 0.0 {
            return;
        }
        let outcome =
            conserve_total_resource(&mut self.resources, &self.changed, &mut self.silent, delta);
        if outcome == Conservation::Degenerate {
            self.degenerate_skips += 1;
        }
        self.refresh_weights(params);
    }

    fn refresh_weights(&mut self, params: &PlasticityParams) {
        let mut change = 0.0;
        for (w, &r) in self.weights.iter_mut().zip(&self.resources) {
            let next = resource_to_weight(r, params.w_min, params.w_max);
            change += libm::fabs(next - *w);
            *w = next;
        }
        self.weight_change += change;
    }
}
