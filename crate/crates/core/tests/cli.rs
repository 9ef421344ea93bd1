use std::path::Path;
use std::process::{Command, Output};

use lanechange::cli::Output as Envelope;
use lanechange::data::{Recording, RecordingMeta};
use lanechange::evaluation::{horizon_sweep, EvalConfig, HorizonReport, SpecFactory};
use lanechange::features::{FeatureSpec, FeatureSubset};
use lanechange::models::{ModelConfig, ModelSpec};

fn lcbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcbench")).args(args).env_remove("LCBENCH_OUT").output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["--version"], &["horizon", "--help"]] {
        let out = lcbench(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(lcbench(&["evaluate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(lcbench(&["frobnicate"]).status.code(), Some(1));
    // missing seed for a stochastic command
    let dir = tempfile::tempdir().unwrap();
    let out = lcbench(&["simulate", "--duration", "5", "-o", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("samples.csv");
    std::fs::write(&bad, "vehicle_id,frame\n1,oops\n").unwrap();
    let out = lcbench(&["describe", "--samples", path(&bad), "-o", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn out_directory_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lcbench"))
        .args(["simulate", "--seed", "1", "--duration", "5"])
        .env("LCBENCH_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("tracks.csv").exists());
    assert!(dir.path().join("manifest_simulate.json").exists());
}

#[test]
fn extract_round_trips_a_simulated_recording() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(lcbench(&["simulate", "--seed", "4", "--duration", "200", "-o", path(&sim)]).status.success());
    let ext = dir.path().join("ext");
    let out = lcbench(&["extract", "--recording", path(&sim), "--tau", "1.5", "-o", path(&ext)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let samples = lanechange::features::read_samples_file(ext.join("samples.csv")).unwrap();
    assert!(!samples.is_empty());
    assert!(samples.iter().all(|s| s.horizon == 1.5 || !s.is_lane_change()));
    let env: Envelope<serde_json::Value> = Envelope::read(ext.join("extract.json")).unwrap();
    assert_eq!(env.command, "extract");
    assert_eq!(env.config.features.horizon, 1.5);
}

#[test]
fn horizon_cli_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(lcbench(&["simulate", "--seed", "21", "--duration", "300", "-o", path(&sim)]).status.success());
    let out = dir.path().join("horizon");
    let run = lcbench(&[
        "horizon", "--recording", path(&sim), "--tau", "2,3,4,5", "--models", "stack-ann,mean*", "-B", "3", "--seed", "8",
        "-o", path(&out),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let env: Envelope<HorizonReport> = Envelope::read(out.join("horizon.json")).unwrap();

    let meta = RecordingMeta::read(sim.join("meta.toml")).unwrap();
    let recording = Recording::load(sim.join("tracks.csv"), &meta).unwrap();
    let mut models = ModelConfig::default();
    models.calibration.seed = 8;
    models.train.ann.seed = 8;
    let factory = SpecFactory::new(ModelSpec::parse_list("stack-ann,mean*").unwrap(), models);
    let spec = FeatureSpec { subset: FeatureSubset::Full24, ..Default::default() };
    let eval = EvalConfig { replicates: 3, seed: 8, ..Default::default() };
    let direct = horizon_sweep(&recording, &[2.0, 3.0, 4.0, 5.0], &spec, &factory, &eval).unwrap();

    assert_eq!(env.report.to_table(), direct.to_table());
    assert_eq!(serde_json::to_value(&env.report).unwrap(), serde_json::to_value(&direct).unwrap());
}
