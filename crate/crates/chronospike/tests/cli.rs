//! End-to-end checks of the binary, its exit codes and the file formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chronospike::commands::{CALIBRATION_FILE, EPISODE_FILE, SNAPSHOT_FILE};
use chronospike::dataset::{read_dataset, write_dataset};
use chronospike::formats::{encode_episode, read_episode, Calibration, Manifest, MANIFEST_FILE};
use chronospike::snapshot::NetworkSnapshot;
use chronospike::RunConfig;
use chronospike_core::baselines::Dataset;
use chronospike_core::columnar::build_network;
use chronospike_core::encoding::{EncodedEpisode, EncoderLayout};
use chronospike_core::experiment::{network_params, Protocol};
use chronospike_core::gasearch::Chromosome;
use chronospike_core::pingpong::{World, WorldConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHORT: &str = r#"
[protocol]
sim_ms = 30000
eval_ms = 10000

[calibrate]
seconds = 20

[ga]
population = 4
runs_per_fitness = 1
sim_seconds = 5
eval_seconds = 3
max_generations = 3

[baseline]
min_leaf = 5
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chronospike"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Record an episode and calibrate into `dir`, returning the config path.
fn prepare(dir: &Path, extra: &str) -> PathBuf {
    let data = dir.join("data");
    let text = format!(
        "episode = {:?}\ncalibration = {:?}\nsnapshot = {:?}\n{SHORT}{extra}",
        data.join(EPISODE_FILE),
        data.join(CALIBRATION_FILE),
        dir.join("train").join(SNAPSHOT_FILE),
    );
    let cfg = write_config(dir, "run.toml", &text);
    let c = cfg.to_str().unwrap();
    let d = data.to_str().unwrap();
    for cmd in ["record-episode", "calibrate"] {
        let o = run(&[cmd, "--config", c, "--seed", "3", "--out", d]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    cfg
}

fn verify_manifest(dir: &Path) -> Manifest {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap();
    let m: Manifest = serde_json::from_str(&text).unwrap();
    m.verify(dir).unwrap();
    assert!(m.files.iter().any(|f| f.path == "config.toml"));
    m
}

#[test]
fn shipped_default_config_matches_built_in_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
}

#[test]
fn resolved_config_round_trips() {
    let mut cfg = RunConfig::default();
    cfg.ga.max_generations = Some(4);
    cfg.world.racket_tracking = 2.5;
    assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let cases = [
        ("[world]\nracket_halff = 1.0\n", "racket_halff"),
        ("[world]\nracket_half = 9.0\n", "world.racket_half"),
        ("[protocol]\neval_ms = 0\n", "protocol.eval_ms"),
        ("[chromosome]\ntau = 100.0\n", "chromosome.tau"),
        ("[ga]\npopulation = 1\n", "ga.population"),
        ("[encoder]\nmode = \"poisson\"\n", "poisson"),
        ("[traces]\nbin_ms = \"x\"\n", "bin_ms"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.toml"), text);
        let o = run(&["record-episode", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", out]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{text}: {}", stderr(&o));
    }
    let missing = run(&["record-episode", "--config", "/nonexistent.toml", "--seed", "1", "--out", out]);
    assert_eq!(missing.status.code(), Some(2));
    let usage = run(&["train", "--seed", "1"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn missing_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "episode = \"/nonexistent/episode.csv\"\n");
    let o = run(&["train", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("episode"), "{}", stderr(&o));
}

#[test]
fn corrupt_episode_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepare(dir.path(), "");
    let episode = dir.path().join("data").join(EPISODE_FILE);
    let mut text = std::fs::read_to_string(&episode).unwrap();
    text.push_str("7,not,a,number,0,0,0,0\n");
    std::fs::write(&episode, text).unwrap();
    let out = dir.path().join("t");
    let o = run(&["train", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn record_episode_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SHORT);
    let mut manifests = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&["record-episode", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        manifests.push(verify_manifest(&out));
    }
    let hash = |m: &Manifest| m.files.iter().find(|f| f.path == EPISODE_FILE).unwrap().sha256.clone();
    assert_eq!(hash(&manifests[0]), hash(&manifests[1]));
}

#[test]
fn episode_file_replays_the_recorded_world() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(EPISODE_FILE);
    let mut world = World::new(WorldConfig::default(), 5).unwrap();
    let counts = chronospike::formats::record_episode(&mut world, 20_000, &path).unwrap();
    let e = [-30.0, -20.0, -10.0, -5.0, 5.0, 10.0, 20.0, 30.0];
    let layout = EncoderLayout::new(e, e).unwrap();
    let replay = encode_episode(&read_episode(&path).unwrap(), &layout);
    let mut world = World::new(WorldConfig::default(), 5).unwrap();
    let direct = EncodedEpisode::record(&mut world, 20_000, &layout);
    assert_eq!(replay, direct);
    assert_eq!(counts.rewards, direct.rewards.len());
}

#[test]
fn full_pipeline_writes_verified_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepare(dir.path(), "[traces]\nspikes = true\n");
    let c = cfg.to_str().unwrap();
    let cal = Calibration::load(&dir.path().join("data").join(CALIBRATION_FILE)).unwrap();
    assert_eq!(cal.samples, 20_000);

    let train = dir.path().join("train");
    let o = run(&["train", "--config", c, "--seed", "4", "--out", train.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = verify_manifest(&train);
    for f in ["spikes.csv", "prediction.csv", "firing_rates.csv", "weight_change.csv", "stability.csv", SNAPSHOT_FILE, "summary.json"] {
        assert!(m.files.iter().any(|e| e.path == f), "missing {f}");
    }
    assert_eq!(m.files.iter().filter(|e| e.path.starts_with("resources_L")).count(), 3);
    let prediction = std::fs::read_to_string(train.join("prediction.csv")).unwrap();
    assert_eq!(prediction.lines().next(), Some("time_ms,P,P_star"));
    assert_eq!(prediction.lines().count(), 30_001);
    let spikes = std::fs::read_to_string(train.join("spikes.csv")).unwrap();
    assert_eq!(spikes.lines().next(), Some("time_ms,neuron_id,role,column_index"));
    let resources = std::fs::read_to_string(m.files.iter().find(|e| e.path.starts_with("resources_L")).map(|e| train.join(&e.path)).unwrap()).unwrap();
    assert_eq!(resources.lines().count(), 1 + 133 + 118);

    let eval = dir.path().join("eval");
    let o = run(&["eval", "--config", c, "--seed", "4", "--out", eval.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    verify_manifest(&eval);

    let base = dir.path().join("base");
    let o = run(&["baseline", "--config", c, "--seed", "4", "--out", base.to_str().unwrap(), "--max-depth", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    verify_manifest(&base);
    let data = read_dataset(&base.join("dataset.bin")).unwrap();
    assert_eq!(data.len(), 30_000);
    let tree = std::fs::read_to_string(base.join("tree.txt")).unwrap();
    assert!(tree.starts_with("# nodes"));

    let ga = dir.path().join("ga");
    let o = run(&["ga", "--config", c, "--seed", "4", "--out", ga.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    verify_manifest(&ga);
    let log = std::fs::read_to_string(ga.join("ga_log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("generation,best_fitness,mean_fitness,n0,tau,n_s,d_h_bar,w_min,w_max,r_s"));
    assert_eq!(log.lines().count(), 4);
}

#[test]
fn rerun_reproduces_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepare(dir.path(), "");
    let c = cfg.to_str().unwrap();
    let mut hashes = Vec::new();
    for name in ["x", "y"] {
        let out = dir.path().join(name);
        let o = run(&["train", "--config", c, "--seed", "8", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let m = verify_manifest(&out);
        hashes.push(m.files.into_iter().filter(|f| f.path != "config.toml").collect::<Vec<_>>());
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn ga_resume_matches_uninterrupted_search() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepare(dir.path(), "");
    let c = cfg.to_str().unwrap();
    let whole = dir.path().join("whole");
    let split = dir.path().join("split");
    let o = run(&["ga", "--config", c, "--seed", "2", "--out", whole.to_str().unwrap(), "--generations", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["ga", "--config", c, "--seed", "2", "--out", split.to_str().unwrap(), "--generations", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["ga", "--config", c, "--seed", "2", "--out", split.to_str().unwrap(), "--generations", "3", "--resume", "--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |d: &Path| std::fs::read_to_string(d.join("ga_log.csv")).unwrap();
    assert_eq!(read(&whole), read(&split));
}

#[test]
fn snapshot_round_trips_after_training() {
    let mut world = World::new(WorldConfig::default(), 1).unwrap();
    let e = [-30.0, -20.0, -10.0, -5.0, 5.0, 10.0, 20.0, 30.0];
    let layout = EncoderLayout::new(e, e).unwrap();
    let episode = EncodedEpisode::record(&mut world, 10_000, &layout);
    let protocol = Protocol { sim_ms: 10_000, eval_ms: 5_000, ..Protocol::default() };
    let params = network_params(&Chromosome::reference_optimum(), &protocol, 7).unwrap();
    let run = chronospike_core::experiment::train_eval(&params, &episode, &layout, 3, &protocol, &Default::default()).unwrap();
    let snap = NetworkSnapshot::capture(&run.network, &params);
    let text = serde_json::to_string(&snap).unwrap();
    let back: NetworkSnapshot = serde_json::from_str(&text).unwrap();
    assert_eq!(back, snap);
    let restored = back.restore().unwrap();
    let again = NetworkSnapshot::capture(&restored, &params);
    assert_eq!(again.learners, snap.learners);
    assert_eq!(again.synapses, snap.synapses);

    let mut tampered = snap.clone();
    tampered.synapses[0].delay += 1;
    assert!(tampered.restore().is_err());
    let fresh = build_network(&params).unwrap();
    assert_ne!(NetworkSnapshot::capture(&fresh, &params).learners, snap.learners);
}

#[test]
fn dataset_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut data = Dataset::new(133, 4);
    for _ in 0..1003 {
        let mut row: Vec<u16> = (0..133u16).filter(|_| rng.random_bool(0.05)).collect();
        row.sort_unstable();
        data.push_row(&row, rng.random_range(0..4)).unwrap();
    }
    let path = dir.path().join("d.bin");
    write_dataset(&path, &data).unwrap();
    assert_eq!(read_dataset(&path).unwrap(), data);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 24 + 1003 + 133 * 1003usize.div_ceil(8));
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(read_dataset(&path).is_err());
}
