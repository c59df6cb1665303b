//! Genetic search over the seven network hyperparameters.
//!
//! Generation 0 is sampled from the gene priors. Every following generation
//! keeps the top `ceil(elitism · population)` individuals unchanged and fills
//! the rest with children of tournament-selected parents (uniform per-gene
//! crossover, then with probability `mutation_prob` one gene is redrawn from
//! its prior). The search stops once the best fitness has not improved for
//! `stall_generations` consecutive generations.
//!
//! Fitness evaluation is injected as a batch closure so that callers can
//! evaluate a generation in parallel; results are consumed in population
//! order, so the outcome does not depend on evaluation order.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{derive_seed, Error, Result};

pub const GENE_COUNT: usize = 7;
pub const GENE_NAMES: [&str; GENE_COUNT] = ["n0", "tau", "n_s", "d_h_bar", "w_min", "w_max", "r_s"];

pub const N0_RANGE: (u32, u32) = (1, 30);
pub const TAU_RANGE: (f64, f64) = (1.0, 30.0);
pub const SILENT_RANGE: (u32, u32) = (1, 300);
pub const D_H_RANGE: (f64, f64) = (0.03, 1.0);
/// Range of `|w_min|`.
pub const W_MIN_ABS_RANGE: (f64, f64) = (0.003, 1.0);
pub const W_MAX_RANGE: (f64, f64) = (0.03, 1.0);
pub const R_S_SD: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Chromosome {
    pub n0: u32,
    pub tau: f64,
    pub n_s: u32,
    pub d_h_bar: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// `d_s / d_h_bar`; negative disables stability.
    pub r_s: f64,
}

impl Default for Chromosome {
    fn default() -> Self {
        Self::reference_optimum()
    }
}

impl Chromosome {
    /// Best hyperparameters reported for the ping-pong task.
    pub fn reference_optimum() -> Self {
        Self { n0: 1, tau: 1.0, n_s: 118, d_h_bar: 0.049, w_min: -0.019, w_max: 0.45, r_s: 0.487 }
    }

    pub fn d_s(&self) -> f64 {
        self.r_s * self.d_h_bar
    }

    pub fn in_range(&self) -> bool {
        (N0_RANGE.0..=N0_RANGE.1).contains(&self.n0)
            && (TAU_RANGE.0..=TAU_RANGE.1).contains(&self.tau)
            && (SILENT_RANGE.0..=SILENT_RANGE.1).contains(&self.n_s)
            && (D_H_RANGE.0..=D_H_RANGE.1).contains(&self.d_h_bar)
            && (W_MIN_ABS_RANGE.0..=W_MIN_ABS_RANGE.1).contains(&-self.w_min)
            && (W_MAX_RANGE.0..=W_MAX_RANGE.1).contains(&self.w_max)
            && self.r_s.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_range() {
            Ok(())
        } else {
            Err(Error::param("chromosome", "gene outside its search range"))
        }
    }

    /// Genes as reals, in [`GENE_NAMES`] order.
    pub fn genes(&self) -> [f64; GENE_COUNT] {
        [
            self.n0 as f64,
            self.tau,
            self.n_s as f64,
            self.d_h_bar,
            self.w_min,
            self.w_max,
            self.r_s,
        ]
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let x = libm::exp(rng.random_range(libm::log(lo)..=libm::log(hi)));
    x.clamp(lo, hi)
}

fn log_uniform_int<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (u32, u32)) -> u32 {
    (libm::round(log_uniform(rng, lo as f64, hi as f64)) as u32).clamp(lo, hi)
}

/// Redraw gene `index` (see [`GENE_NAMES`]) from its prior.
pub fn resample_gene<R: Rng + ?Sized>(c: &mut Chromosome, index: usize, rng: &mut R) {
    match index {
        0 => c.n0 = log_uniform_int(rng, N0_RANGE),
        1 => c.tau = log_uniform(rng, TAU_RANGE.0, TAU_RANGE.1),
        2 => c.n_s = log_uniform_int(rng, SILENT_RANGE),
        3 => c.d_h_bar = log_uniform(rng, D_H_RANGE.0, D_H_RANGE.1),
        4 => c.w_min = -log_uniform(rng, W_MIN_ABS_RANGE.0, W_MIN_ABS_RANGE.1),
        5 => c.w_max = log_uniform(rng, W_MAX_RANGE.0, W_MAX_RANGE.1),
        6 => {
            let normal = Normal::new(0.0, R_S_SD).expect("finite sd");
            c.r_s = normal.sample(rng);
        }
        _ => panic!("gene index {index} out of range"),
    }
}

pub fn sample_chromosome<R: Rng + ?Sized>(rng: &mut R) -> Chromosome {
    let mut c = Chromosome::reference_optimum();
    for i in 0..GENE_COUNT {
        resample_gene(&mut c, i, rng);
    }
    c
}

fn crossover<R: Rng + ?Sized>(a: &Chromosome, b: &Chromosome, rng: &mut R) -> Chromosome {
    let mut pick = || rng.random_bool(0.5);
    Chromosome {
        n0: if pick() { a.n0 } else { b.n0 },
        tau: if pick() { a.tau } else { b.tau },
        n_s: if pick() { a.n_s } else { b.n_s },
        d_h_bar: if pick() { a.d_h_bar } else { b.d_h_bar },
        w_min: if pick() { a.w_min } else { b.w_min },
        w_max: if pick() { a.w_max } else { b.w_max },
        r_s: if pick() { a.r_s } else { b.r_s },
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GaConfig {
    pub population: usize,
    pub elitism: f64,
    pub mutation_prob: f64,
    pub runs_per_fitness: u32,
    pub sim_seconds: u64,
    pub eval_seconds: u64,
    pub stall_generations: u32,
    /// Hard cap on generations (including generation 0); `None` runs until
    /// the stall rule fires.
    pub max_generations: Option<u32>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 300,
            elitism: 0.1,
            mutation_prob: 0.5,
            runs_per_fitness: 3,
            sim_seconds: 2000,
            eval_seconds: 600,
            stall_generations: 3,
            max_generations: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::param("population", "must be at least 2"));
        }
        if !(self.elitism > 0.0 && self.elitism < 1.0) {
            return Err(Error::param("elitism", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::param("mutation_prob", "must lie in [0, 1]"));
        }
        if self.runs_per_fitness == 0 {
            return Err(Error::param("runs_per_fitness", "must be at least 1"));
        }
        if self.eval_seconds == 0 || self.eval_seconds > self.sim_seconds {
            return Err(Error::param("eval_seconds", "must lie in 1..=sim_seconds"));
        }
        if self.stall_generations == 0 {
            return Err(Error::param("stall_generations", "must be at least 1"));
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        (libm::ceil(self.elitism * self.population as f64) as usize).clamp(1, self.population)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Individual {
    pub genes: Chromosome,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenerationRecord {
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best: Chromosome,
}

/// Resumable search state after a completed generation.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaState {
    pub seed: u64,
    /// Generations completed so far.
    pub generations: u32,
    /// Current population ranked best first.
    pub population: Vec<Individual>,
    pub best: Individual,
    pub stall: u32,
    pub log: Vec<GenerationRecord>,
}

fn rank(mut pop: Vec<Individual>) -> Vec<Individual> {
    // Stable: equal fitness keeps population order.
    pop.sort_by(|a, b| fitness_key(b.fitness).total_cmp(&fitness_key(a.fitness)));
    pop
}

fn fitness_key(f: f64) -> f64 {
    if f.is_nan() {
        f64::NEG_INFINITY
    } else {
        f
    }
}

fn evaluate_all<E>(genes: Vec<Chromosome>, evaluate: &mut E) -> Vec<Individual>
where
    E: FnMut(&[Chromosome]) -> Vec<f64>,
{
    let fitness = evaluate(&genes);
    assert_eq!(fitness.len(), genes.len(), "evaluator must score every chromosome");
    genes.into_iter().zip(fitness).map(|(genes, fitness)| Individual { genes, fitness }).collect()
}

impl GaState {
    /// Sample and evaluate generation 0.
    pub fn start<E>(config: &GaConfig, seed: u64, mut evaluate: E) -> Result<Self>
    where
        E: FnMut(&[Chromosome]) -> Vec<f64>,
    {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let genes = (0..config.population).map(|_| sample_chromosome(&mut rng)).collect();
        let population = rank(evaluate_all(genes, &mut evaluate));
        let best = population[0].clone();
        let mut state = Self { seed, generations: 1, population, best, stall: 0, log: Vec::new() };
        state.record();
        Ok(state)
    }

    fn record(&mut self) {
        let n = self.population.len() as f64;
        let mean = self.population.iter().map(|i| i.fitness).sum::<f64>() / n;
        self.log.push(GenerationRecord {
            generation: self.generations - 1,
            best_fitness: self.best.fitness,
            mean_fitness: mean,
            best: self.best.genes.clone(),
        });
    }

    pub fn finished(&self, config: &GaConfig) -> bool {
        self.stall >= config.stall_generations
            || config.max_generations.is_some_and(|m| self.generations >= m)
    }

    /// Breed, evaluate and rank the next generation.
    pub fn advance<E>(&mut self, config: &GaConfig, mut evaluate: E)
    where
        E: FnMut(&[Chromosome]) -> Vec<f64>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, self.generations as u64));
        let elites = config.elite_count();
        let n = self.population.len();
        let mut children = Vec::with_capacity(config.population - elites);
        while children.len() + elites < config.population {
            let a = tournament(n, &mut rng);
            let b = tournament(n, &mut rng);
            let mut child =
                crossover(&self.population[a].genes, &self.population[b].genes, &mut rng);
            if rng.random_bool(config.mutation_prob) {
                let gene = rng.random_range(0..GENE_COUNT);
                resample_gene(&mut child, gene, &mut rng);
            }
            children.push(child);
        }
        let mut next: Vec<Individual> = self.population[..elites].to_vec();
        next.extend(evaluate_all(children, &mut evaluate));
        self.population = rank(next);
        self.generations += 1;
        if fitness_key(self.population[0].fitness) > fitness_key(self.best.fitness) {
            self.best = self.population[0].clone();
            self.stall = 0;
        } else {
            self.stall += 1;
        }
        self.record();
    }
}

/// Index of the better of two uniformly drawn ranks.
fn tournament<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    a.min(b)
}

/// Run the search to completion.
pub fn evolve<E>(config: &GaConfig, seed: u64, mut evaluate: E) -> Result<GaState>
where
    E: FnMut(&[Chromosome]) -> Vec<f64>,
{
    let mut state = GaState::start(config, seed, &mut evaluate)?;
    while !state.finished(config) {
        state.advance(config, &mut evaluate);
    }
    Ok(state)
}
