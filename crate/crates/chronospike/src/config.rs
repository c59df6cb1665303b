//! Run configuration: one TOML file with nested sections.
//!
//! Every field has a default, so an empty file is a valid config. Unknown
//! keys are rejected. The shipped `configs/default.toml` lists every field
//! with its default value.

use std::fmt;
use std::path::{Path, PathBuf};

use chronospike_core::baselines::{FeatureMode, LeafMode, TreeParams};
use chronospike_core::encoding::{EncoderLayout, SpikeMode};
use chronospike_core::experiment::Protocol;
use chronospike_core::gasearch::{
    Chromosome, GaConfig, D_H_RANGE, N0_RANGE, SILENT_RANGE, TAU_RANGE, W_MAX_RANGE, W_MIN_ABS_RANGE,
};
use chronospike_core::pingpong::WorldConfig;
use serde::{Deserialize, Serialize};

/// A configuration problem. The CLI maps it to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: impl fmt::Display, reason: impl fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {reason}"))
}

/// Prefix a core validation error with its config section.
fn in_section(section: &str, err: chronospike_core::Error) -> ConfigError {
    match err {
        chronospike_core::Error::InvalidParam { field, reason } => invalid(format!("{section}.{field}"), reason),
        other => invalid(section, other),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Firing rate of an active input node, Hz.
    pub rate_hz: f64,
    pub mode: SpikeMode,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { rate_hz: 300.0, mode: SpikeMode::Bernoulli }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Length of the world run whose velocities set the bin edges, seconds.
    pub seconds: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { seconds: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub max_depth: u32,
    pub min_leaf: usize,
    pub leaf: LeafMode,
    pub features: FeatureMode,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let t = TreeParams::default();
        Self { max_depth: t.max_depth, min_leaf: t.min_leaf, leaf: t.leaf, features: FeatureMode::Spikes }
    }
}

impl BaselineConfig {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams { max_depth: self.max_depth, min_leaf: self.min_leaf, leaf: self.leaf }
    }
}

/// Which trace files `train` writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Every non-input spike. Large: about 10 MB per 2000 s run.
    pub spikes: bool,
    pub firing_rates: bool,
    pub weights: bool,
    pub stability: bool,
    pub resources: bool,
    pub prediction: bool,
    /// Bin width of the rate, weight-change and stability series, ms.
    pub bin_ms: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            spikes: false,
            firing_rates: true,
            weights: true,
            stability: true,
            resources: true,
            prediction: true,
            bin_ms: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed of every stochastic stream.
    pub seed: u64,
    /// Output directory.
    pub out: PathBuf,
    /// Episode CSV: written by `record-episode`, read by the other commands.
    pub episode: PathBuf,
    /// Calibration file: written by `calibrate`, read by every run that
    /// encodes the episode.
    pub calibration: PathBuf,
    /// Network snapshot read by `eval`.
    pub snapshot: PathBuf,
    /// Worker threads for GA fitness evaluation; 0 uses all cores.
    pub threads: usize,
    pub world: WorldConfig,
    #[serde(rename = "calibrate")]
    pub calibration_run: CalibrationConfig,
    pub encoder: EncoderConfig,
    pub protocol: Protocol,
    pub chromosome: Chromosome,
    pub ga: GaConfig,
    pub baseline: BaselineConfig,
    pub traces: TraceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            episode: PathBuf::from("out/episode.csv"),
            calibration: PathBuf::from("out/calibration.toml"),
            snapshot: PathBuf::from("out/network.json"),
            threads: 0,
            world: WorldConfig::default(),
            calibration_run: CalibrationConfig::default(),
            encoder: EncoderConfig::default(),
            protocol: Protocol::default(),
            chromosome: Chromosome::default(),
            ga: GaConfig::default(),
            baseline: BaselineConfig::default(),
            traces: TraceConfig::default(),
        }
    }
}

/// Input files a command needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Needs {
    pub episode: bool,
    pub calibration: bool,
    pub snapshot: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_owned()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(path.display(), format!("cannot read config: {e}")))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Check every section; file references are checked against `needs`.
    pub fn validate(&self, needs: Needs) -> Result<(), ConfigError> {
        if self.seed > i64::MAX as u64 {
            return Err(invalid("seed", format!("must not exceed {} (TOML integer range)", i64::MAX)));
        }
        self.world.validate().map_err(|e| in_section("world", e))?;
        self.protocol.validate().map_err(|e| in_section("protocol", e))?;
        validate_chromosome(&self.chromosome)?;
        self.ga.validate().map_err(|e| in_section("ga", e))?;
        if let Some(0) = self.ga.max_generations {
            return Err(invalid("ga.max_generations", "must be at least 1"));
        }
        if !(self.encoder.rate_hz > 0.0 && self.encoder.rate_hz <= 1000.0) {
            return Err(invalid("encoder.rate_hz", "must lie in (0, 1000]"));
        }
        if self.calibration_run.seconds == 0 {
            return Err(invalid("calibrate.seconds", "must be at least 1"));
        }
        if self.baseline.min_leaf == 0 {
            return Err(invalid("baseline.min_leaf", "must be at least 1"));
        }
        if self.traces.bin_ms == 0 {
            return Err(invalid("traces.bin_ms", "must be at least 1"));
        }
        let require = |on: bool, key: &str, path: &Path| {
            if on && !path.is_file() {
                Err(invalid(key, format!("file `{}` does not exist", path.display())))
            } else {
                Ok(())
            }
        };
        require(needs.episode, "episode", &self.episode)?;
        require(needs.calibration, "calibration", &self.calibration)?;
        require(needs.snapshot, "snapshot", &self.snapshot)?;
        Ok(())
    }

    /// Encoder layout from calibrated velocity edges and the encoder section.
    pub fn layout(&self, vel_x_edges: [f64; 8], vel_y_edges: [f64; 8]) -> Result<EncoderLayout, ConfigError> {
        let layout =
            EncoderLayout { vel_x_edges, vel_y_edges, rate_hz: self.encoder.rate_hz, mode: self.encoder.mode };
        layout.validate().map_err(|e| in_section("calibration", e))?;
        Ok(layout)
    }
}

fn validate_chromosome(c: &Chromosome) -> Result<(), ConfigError> {
    fn within<T: PartialOrd + fmt::Display + Copy>(gene: &str, v: T, (lo, hi): (T, T)) -> Result<(), ConfigError> {
        if v >= lo && v <= hi {
            Ok(())
        } else {
            Err(invalid(format!("chromosome.{gene}"), format!("{v} outside [{lo}, {hi}]")))
        }
    }
    within("n0", c.n0, N0_RANGE)?;
    within("tau", c.tau, TAU_RANGE)?;
    within("n_s", c.n_s, SILENT_RANGE)?;
    within("d_h_bar", c.d_h_bar, D_H_RANGE)?;
    within("w_min", c.w_min, (-W_MIN_ABS_RANGE.1, -W_MIN_ABS_RANGE.0))?;
    within("w_max", c.w_max, W_MAX_RANGE)?;
    if !c.r_s.is_finite() {
        return Err(invalid("chromosome.r_s", "must be finite"));
    }
    Ok(())
}
