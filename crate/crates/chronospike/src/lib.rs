//! Std companion of `chronospike-core`: run configuration, file formats,
//! network snapshots, the parallel GA driver and the command pipelines used
//! by the `chronospike` binary.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod formats;
pub mod snapshot;

pub use commands::{run, Command, RunFlags};
pub use config::{ConfigError, RunConfig};

/// Exit code for a failed run: 2 when the cause is a configuration problem,
/// 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let config = err.chain().any(|e| {
        e.is::<ConfigError>()
            || e.downcast_ref::<chronospike_core::Error>()
                .is_some_and(|c| matches!(c, chronospike_core::Error::InvalidParam { .. }))
    });
    if config {
        2
    } else {
        1
    }
}
