use chronospike_core::pingpong::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quiet(state: WorldState) -> (WorldState, WorldConfig) {
    let cfg = WorldConfig { racket_max_speed: 0.0, ..WorldConfig::default() };
    (WorldState { racket_hold: 1000, ..state }, cfg)
}

#[test]
fn free_flight() {
    let (mut s, cfg) =
        quiet(WorldState { ball_x: 4.9, ball_vx: 20.0, ..Default::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = step_world(&mut s, &cfg, &mut rng);
    assert_eq!(out, StepOutcome::default());
    assert!((s.ball_x - 4.92).abs() < 1e-12);
    assert_eq!(s.ball_y, 0.0);
}

#[test]
fn right_wall_reflection() {
    let (mut s, cfg) =
        quiet(WorldState { ball_x: 4.999, ball_vx: 20.0, ..Default::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    step_world(&mut s, &cfg, &mut rng);
    assert!((s.ball_x - 4.981).abs() < 1e-12);
    assert_eq!(s.ball_vx, -20.0);
}

#[test]
fn racket_hit_rewards() {
    let (mut s, cfg) = quiet(WorldState {
        ball_x: -4.99,
        ball_y: 0.5,
        ball_vx: -20.0,
        ..Default::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = step_world(&mut s, &cfg, &mut rng);
    assert!(out.reward && !out.punishment);
    assert_eq!(s.ball_vx, 20.0);
    assert!((s.ball_x + 4.99).abs() < 1e-12);
}

#[test]
fn miss_punishes_and_resets() {
    let (mut s, cfg) = quiet(WorldState {
        ball_x: -4.99,
        ball_y: 3.0,
        ball_vx: -20.0,
        ..Default::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = step_world(&mut s, &cfg, &mut rng);
    assert!(out.punishment && !out.reward);
    assert_eq!(s.ball_x, 0.0);
}

#[test]
fn corner_reflects_both_components() {
    let (mut s, cfg) = quiet(WorldState {
        ball_x: 4.999,
        ball_y: 4.999,
        ball_vx: 20.0,
        ball_vy: 30.0,
        ..Default::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    step_world(&mut s, &cfg, &mut rng);
    assert!(s.ball_vx < 0.0 && s.ball_vy < 0.0);
    assert!(s.ball_x <= 5.0 && s.ball_y <= 5.0);
}

#[test]
fn resets_respect_ranges() {
    let cfg = WorldConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut s = WorldState::default();
    let mut sum_y = 0.0;
    for _ in 0..10_000 {
        reset_ball(&mut s, &cfg, &mut rng);
        let speed = s.speed();
        assert!((10.0 - 1e-9..=33.3 + 1e-9).contains(&speed), "{speed}");
        assert!(s.ball_vx.abs() >= 10.0);
        assert_eq!(s.ball_x, 0.0);
        sum_y += s.ball_y;
    }
    let mean = sum_y / 10_000.0;
    assert!(mean.abs() <= 0.2, "{mean}");
}

#[test]
fn rightward_only_switch() {
    let cfg = WorldConfig { rightward_only: true, ..WorldConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s = WorldState::default();
    for _ in 0..1000 {
        reset_ball(&mut s, &cfg, &mut rng);
        assert!(s.ball_vx >= 10.0);
    }
}

#[test]
fn stays_in_box_and_keeps_speed() {
    let mut w = World::new(WorldConfig::default(), 9).unwrap();
    let lim = w.config.racket_limit();
    let mut speed = w.state.speed();
    for _ in 0..200_000 {
        let out = w.step();
        assert!(!(out.reward && out.punishment));
        let s = &w.state;
        assert!(s.ball_x.abs() <= 5.0 && s.ball_y.abs() <= 5.0);
        assert!(s.racket_y.abs() <= lim);
        if out.punishment {
            speed = s.speed();
        } else {
            assert!((s.speed() - speed).abs() < 1e-9);
        }
    }
}
