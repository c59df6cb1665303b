//! Ping-pong world: a ball in a 10×10 cm box with walls at the top, bottom
//! and right, and a 1.8 cm racket moving chaotically along the left border.
//!
//! Coordinates are in cm with the box spanning `[-5, 5]` on both axes,
//! velocities in cm/s, one step is 1 ms.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::{Error, Result};

const DT: f64 = 0.001;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WorldConfig {
    pub half_size: f64,
    pub racket_half: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    /// Lower bound on |vx| after a reset.
    pub min_vx: f64,
    /// Only launch the ball rightward after a reset.
    pub rightward_only: bool,
    /// Racket velocity is redrawn uniformly from `[-max, max]`.
    pub racket_max_speed: f64,
    /// Mean of the exponential hold time between racket velocity draws, ms.
    pub racket_mean_hold_ms: f64,
    /// Gain (1/s) of the pull of the racket toward the ball height, added to
    /// the random velocity.
    pub racket_tracking: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            half_size: 5.0,
            racket_half: 0.9,
            min_speed: 10.0,
            max_speed: 33.3,
            min_vx: 10.0,
            rightward_only: false,
            racket_max_speed: 15.0,
            racket_mean_hold_ms: 250.0,
            racket_tracking: 0.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_size > 0.0) {
            return Err(Error::param("half_size", "must be positive"));
        }
        if !(self.racket_half > 0.0 && self.racket_half < self.half_size) {
            return Err(Error::param("racket_half", "must lie in (0, half_size)"));
        }
        if !(self.min_speed > 0.0 && self.min_speed <= self.max_speed) {
            return Err(Error::param("min_speed", "need 0 < min_speed <= max_speed"));
        }
        if !(self.min_vx >= 0.0 && self.min_vx <= self.min_speed) {
            return Err(Error::param("min_vx", "need 0 <= min_vx <= min_speed"));
        }
        if !(self.racket_max_speed >= 0.0) {
            return Err(Error::param("racket_max_speed", "must be non-negative"));
        }
        if !(self.racket_tracking >= 0.0 && self.racket_tracking.is_finite()) {
            return Err(Error::param("racket_tracking", "must be finite and non-negative"));
        }
        if !(self.racket_mean_hold_ms >= 1.0) {
            return Err(Error::param("racket_mean_hold_ms", "must be at least 1 ms"));
        }
        Ok(())
    }

    pub fn racket_limit(&self) -> f64 {
        self.half_size - self.racket_half
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorldState {
    pub ball_x: f64,
    pub ball_y: f64,
    pub ball_vx: f64,
    pub ball_vy: f64,
    /// Racket center.
    pub racket_y: f64,
    pub racket_vy: f64,
    /// Steps left before the racket velocity is redrawn.
    pub racket_hold: u32,
}

impl WorldState {
    pub fn speed(&self) -> f64 {
        libm::hypot(self.ball_vx, self.ball_vy)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub reward: bool,
    pub punishment: bool,
}

/// Ball position and velocity after a miss: middle vertical line, random
/// speed, random direction with a guaranteed horizontal component.
pub fn reset_ball<R: Rng + ?Sized>(state: &mut WorldState, cfg: &WorldConfig, rng: &mut R) {
    let h = cfg.half_size;
    state.ball_x = 0.0;
    state.ball_y = rng.random_range(-h..h);
    let speed = if cfg.max_speed > cfg.min_speed {
        rng.random_range(cfg.min_speed..=cfg.max_speed)
    } else {
        cfg.min_speed
    };
    // Directions with |cos θ| >= min_vx / speed form two arcs of half-width
    // alpha around the horizontal axis.
    let alpha = libm::acos((cfg.min_vx / speed).min(1.0));
    let theta = if alpha > 0.0 { rng.random_range(-alpha..=alpha) } else { 0.0 };
    let rightward = cfg.rightward_only || rng.random_bool(0.5);
    let vx = (speed * libm::cos(theta)).max(cfg.min_vx);
    let vy = libm::sqrt((speed * speed - vx * vx).max(0.0));
    state.ball_vx = if rightward { vx } else { -vx };
    state.ball_vy = if theta < 0.0 { -vy } else { vy };
}

fn fold(pos: f64, v: &mut f64, h: f64) -> f64 {
    if pos > h {
        *v = -*v;
        2.0 * h - pos
    } else if pos < -h {
        *v = -*v;
        -2.0 * h - pos
    } else {
        pos
    }
}

/// Advance the world by one millisecond.
pub fn step_world<R: Rng + ?Sized>(
    state: &mut WorldState,
    cfg: &WorldConfig,
    rng: &mut R,
) -> StepOutcome {
    let h = cfg.half_size;

    if state.racket_hold == 0 {
        state.racket_vy = if cfg.racket_max_speed > 0.0 {
            rng.random_range(-cfg.racket_max_speed..=cfg.racket_max_speed)
        } else {
            0.0
        };
        let hold = Exp::new(1.0 / cfg.racket_mean_hold_ms)
            .map(|d| d.sample(rng))
            .unwrap_or(cfg.racket_mean_hold_ms);
        state.racket_hold = libm::round(hold).max(1.0) as u32;
    }
    state.racket_hold -= 1;
    let lim = cfg.racket_limit();
    let pull = cfg.racket_tracking * (state.ball_y - state.racket_y);
    state.racket_y = (state.racket_y + (state.racket_vy + pull) * DT).clamp(-lim, lim);

    let old_x = state.ball_x;
    let old_y = state.ball_y;
    let raw_x = old_x + state.ball_vx * DT;
    let raw_y = old_y + state.ball_vy * DT;

    let mut outcome = StepOutcome::default();
    let mut vx = state.ball_vx;
    let mut vy = state.ball_vy;
    let new_y = fold(raw_y, &mut vy, h);

    if raw_x < -h {
        let frac = (-h - old_x) / (raw_x - old_x);
        let mut dummy = 0.0;
        let cross_y = fold(old_y + frac * (raw_y - old_y), &mut dummy, h);
        if libm::fabs(cross_y - state.racket_y) <= cfg.racket_half {
            outcome.reward = true;
            state.ball_x = -2.0 * h - raw_x;
            state.ball_y = new_y;
            state.ball_vx = -vx;
            state.ball_vy = vy;
        } else {
            outcome.punishment = true;
            reset_ball(state, cfg, rng);
        }
        return outcome;
    }

    state.ball_x = fold(raw_x, &mut vx, h);
    state.ball_y = new_y;
    state.ball_vx = vx;
    state.ball_vy = vy;
    outcome
}

/// A seeded world: state, configuration and the world's own RNG stream.
#[derive(Clone, Debug)]
pub struct World {
    pub state: WorldState,
    pub config: WorldConfig,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(config: WorldConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = WorldState::default();
        reset_ball(&mut state, &config, &mut rng);
        Ok(Self { state, config, rng })
    }

    pub fn step(&mut self) -> StepOutcome {
        step_world(&mut self.state, &self.config, &mut self.rng)
    }
}
