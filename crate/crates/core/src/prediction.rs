//! Ground-truth proximity `P(t)`, the iterative decoder `P*(t)` over output
//! spikes, and the coefficient of determination between the two.
//!
//! With `T(t)` the time from `t` to the next target event,
//! `P(t) = max(N - floor(T(t) / L), 0)`: `N` within the next `L` ms, `0` when
//! the next event is more than `N·L` ms away.
//!
//! The decoder starts from `P*(0) = 0` and for every step computes
//! `P*(t+1)` from the first matching rule:
//!
//! 1. a target event happens at `t` → `0`;
//! 2. an output neuron of value `n` fires at `t+1` → `n` (the largest value
//!    if several fire);
//! 3. no output spike in `[t - L, t + 1]` → `0`;
//! 4. otherwise hold `P*(t)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, Time};

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionTrace {
    pub truth: Vec<u8>,
    pub predicted: Vec<u8>,
    pub levels: u8,
    pub interval: Time,
}

impl PredictionTrace {
    pub fn new(truth: Vec<u8>, predicted: Vec<u8>, levels: u8, interval: Time) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch { left: truth.len(), right: predicted.len() });
        }
        if truth.iter().chain(&predicted).any(|&v| v > levels) {
            return Err(Error::param("trace", "value above level count"));
        }
        Ok(Self { truth, predicted, levels, interval })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn r_squared(&self, start: usize, end: usize) -> Result<f64> {
        r_squared(&self.truth, &self.predicted, start, end)
    }
}

/// Proximity `max(N - floor(T(t)/L), 0)` for every `t` in `0..horizon`.
/// After the last event `T(t)` is infinite.
pub fn ground_truth(reward_times: &[Time], horizon: usize, levels: u8, interval: Time) -> Vec<u8> {
    debug_assert!(reward_times.windows(2).all(|w| w[0] <= w[1]));
    let mut out = vec![0u8; horizon];
    let mut next = 0usize;
    for (t, p) in out.iter_mut().enumerate() {
        let t = t as Time;
        while next < reward_times.len() && reward_times[next] < t {
            next += 1;
        }
        if let Some(&r) = reward_times.get(next) {
            let bins = (r - t) / interval;
            *p = (levels as Time).saturating_sub(bins) as u8;
        }
    }
    out
}

/// Decode output spikes `(time, value)` into `P*`. Values must lie in
/// `1..=levels`; spikes need not be sorted.
pub fn decode(
    output_spikes: &[(Time, u8)],
    reward_times: &[Time],
    horizon: usize,
    levels: u8,
    interval: Time,
) -> Vec<u8> {
    let mut spikes = output_spikes.to_vec();
    spikes.sort_unstable();
    let mut rewards = reward_times.to_vec();
    rewards.sort_unstable();
    debug_assert!(spikes.iter().all(|&(_, n)| n >= 1 && n <= levels));

    let mut out = vec![0u8; horizon];
    if horizon == 0 {
        return out;
    }
    let mut si = 0usize;
    let mut ri = 0usize;
    let mut last_spike: Option<Time> = None;
    // Spikes at time 0 never enter a case; they only count as recent activity.
    while si < spikes.len() && spikes[si].0 == 0 {
        last_spike = Some(0);
        si += 1;
    }
    for t in 0..(horizon as Time - 1) {
        while ri < rewards.len() && rewards[ri] < t {
            ri += 1;
        }
        let reward_now = ri < rewards.len() && rewards[ri] == t;

        let mut fresh: Option<u8> = None;
        while si < spikes.len() && spikes[si].0 == t + 1 {
            fresh = Some(fresh.map_or(spikes[si].1, |n| n.max(spikes[si].1)));
            si += 1;
        }

        let prev = out[t as usize];
        let next = if reward_now {
            0
        } else if let Some(n) = fresh {
            n
        } else if last_spike.is_none_or(|s| s + interval < t) {
            0
        } else {
            prev
        };
        out[t as usize + 1] = next;
        if fresh.is_some() {
            last_spike = Some(t + 1);
        }
    }
    out
}

/// `1 - Var(pred - truth) / Var(truth)` over `start..end`, with population
/// variances.
///
/// Integer-valued inputs (all proximity traces) are scored from exact
/// integer moments, so shifted or constant predictions give exactly the
/// expected value. Other inputs use two-pass floating-point variances.
pub fn r_squared<T: Copy + Into<f64>>(
    truth: &[T],
    predicted: &[T],
    start: usize,
    end: usize,
) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch { left: truth.len(), right: predicted.len() });
    }
    if start >= end || end > truth.len() {
        return Err(Error::BadWindow { start, end, len: truth.len() });
    }
    let truth = &truth[start..end];
    let predicted = &predicted[start..end];
    if let Some(r) = integer_r_squared(truth, predicted) {
        return r;
    }
    let var_truth = variance(truth.iter().map(|&v| v.into()));
    if var_truth == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let var_err = variance(truth.iter().zip(predicted).map(|(&a, &b)| b.into() - a.into()));
    Ok(1.0 - var_err / var_truth)
}

/// Largest magnitude for which integer moments cannot overflow `i128`.
const EXACT_LIMIT: f64 = (1u64 << 31) as f64;

fn as_integer(v: f64) -> Option<i128> {
    (libm::trunc(v) == v && libm::fabs(v) < EXACT_LIMIT).then_some(v as i128)
}

/// `n² · Var` from exact sums, or `None` if a value is not a small integer.
fn scaled_variance(values: impl Iterator<Item = f64>) -> Option<i128> {
    let (mut n, mut sum, mut sq) = (0i128, 0i128, 0i128);
    for v in values {
        let x = as_integer(v)?;
        n += 1;
        sum += x;
        sq += x * x;
    }
    Some(n * sq - sum * sum)
}

fn integer_r_squared<T: Copy + Into<f64>>(truth: &[T], predicted: &[T]) -> Option<Result<f64>> {
    let var_truth = scaled_variance(truth.iter().map(|&v| v.into()))?;
    let var_err = scaled_variance(truth.iter().zip(predicted).map(|(&a, &b)| b.into() - a.into()))?;
    if var_truth == 0 {
        return Some(Err(Error::ZeroVariance));
    }
    Some(Ok(1.0 - var_err as f64 / var_truth as f64))
}

/// Population variance, two-pass.
fn variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}
