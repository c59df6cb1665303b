use chronospike_core::gasearch::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn tau_median_is_log_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut taus: Vec<f64> = (0..10_000).map(|_| sample_chromosome(&mut rng).tau).collect();
    taus.sort_by(f64::total_cmp);
    let median = taus[5000];
    assert!((4.5..=6.5).contains(&median), "{median}");
}

#[test]
fn samples_stay_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let c = sample_chromosome(&mut rng);
        assert!(c.w_min < 0.0 && c.w_max > 0.0);
        assert!(c.in_range(), "{c:?}");
    }
}

#[test]
fn r_s_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let neg = (0..10_000).filter(|_| sample_chromosome(&mut rng).r_s < 0.0).count();
    let frac = neg as f64 / 10_000.0;
    assert!((frac - 0.5).abs() <= 0.02, "{frac}");
}

#[test]
fn reference_optimum_in_range() {
    let c = Chromosome::reference_optimum();
    assert!(c.in_range());
    assert!((c.d_s() - 0.487 * 0.049).abs() < 1e-15);
}

fn toy_fitness(c: &Chromosome) -> f64 {
    -(libm::log(c.tau) - 1.0).powi(2) - (c.w_max - 0.5).powi(2) + 0.01 * c.r_s.tanh()
}

#[test]
fn elitism_keeps_best_monotone() {
    let cfg = GaConfig { population: 16, max_generations: Some(12), ..GaConfig::default() };
    let state =
        evolve(&cfg, 7, |pop| pop.iter().map(toy_fitness).collect()).unwrap();
    for w in state.log.windows(2) {
        assert!(w[1].best_fitness >= w[0].best_fitness);
    }
    assert!(state.population.iter().all(|i| i.genes.in_range()));
    assert!(state.generations <= 12);
}

#[test]
fn stall_rule_terminates() {
    let cfg = GaConfig { population: 8, ..GaConfig::default() };
    let state = evolve(&cfg, 1, |pop| pop.iter().map(|_| 0.0).collect()).unwrap();
    assert_eq!(state.generations, 4);
    assert_eq!(state.stall, 3);
}

#[test]
fn resumed_search_matches_uninterrupted() {
    let cfg = GaConfig { population: 10, max_generations: Some(6), ..GaConfig::default() };
    let f = |pop: &[Chromosome]| pop.iter().map(toy_fitness).collect::<Vec<_>>();
    let full = evolve(&cfg, 99, f).unwrap();
    let mut part = GaState::start(&cfg, 99, f).unwrap();
    part.advance(&cfg, f);
    let mut resumed = part.clone();
    while !resumed.finished(&cfg) {
        resumed.advance(&cfg, f);
    }
    assert_eq!(full, resumed);
}

#[test]
fn rejects_bad_config() {
    let bad = GaConfig { elitism: 1.0, ..GaConfig::default() };
    assert!(bad.validate().is_err());
    let bad = GaConfig { population: 1, ..GaConfig::default() };
    assert!(bad.validate().is_err());
}
