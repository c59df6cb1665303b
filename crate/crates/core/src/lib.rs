//! Spiking network that learns to predict how soon a rare target event will
//! happen.
//!
//! The crate is `no_std` (it only needs `alloc`). It contains the clocked
//! spiking substrate, the plasticity rules of the learning neurons, the
//! columnar network builder, the ping-pong environment with its spike
//! encoder, the prediction decoder and R² score, the genetic hyperparameter
//! search and the decision-tree baseline. File formats, the CLI and parallel
//! execution live in the `chronospike` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod columnar;
pub mod encoding;
pub mod engine;
mod error;
pub mod experiment;
pub mod gasearch;
pub mod pingpong;
pub mod plasticity;
pub mod prediction;

pub use error::{Error, Result};

/// Simulation time in milliseconds. One engine step is one millisecond.
pub type Time = u64;

/// Index of a neuron or input node inside a [`engine::Network`].
pub type NeuronId = u32;

/// Derive an independent seed for a named sub-stream from a base seed.
///
/// SplitMix64 finalizer over `base ^ stream`, so streams that share a base
/// seed never share a generator state.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
