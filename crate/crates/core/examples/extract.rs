// Loading a recording from disk and extracting labeled maneuvers two
// seconds before the center line is crossed.
//
// `cargo run --example extract -- path/to/tracks.csv path/to/meta.toml`
// (without arguments a short simulated recording is used)

use lanechange::data::{Recording, RecordingMeta};
use lanechange::features::{extract_samples, feature_names, FeatureSpec, FeatureSubset, Maneuver};
use lanechange::simulator::{simulate, ScenarioConfig};

pub fn run_example() -> lanechange::Result<()> {
    run(&[])
}

fn run(args: &[String]) -> lanechange::Result<()> {
    let dir = tempfile::tempdir()?;
    let (tracks, meta) = match args {
        [t, m] => (t.into(), m.into()),
        _ => {
            let out = simulate(&ScenarioConfig { duration: 180.0, seed: 2, ..Default::default() })?;
            let paths = (dir.path().join("tracks.csv"), dir.path().join("meta.toml"));
            out.recording.write(&paths.0, &paths.1)?;
            paths
        }
    };
    let recording = Recording::load(&tracks, &RecordingMeta::read(&meta)?)?;

    let spec = FeatureSpec { subset: FeatureSubset::Full24, horizon: 2.0, ..Default::default() };
    let ex = extract_samples(&recording, &spec)?;
    println!("{} samples; skipped: {:?}", ex.samples.len(), ex.skipped);
    for m in Maneuver::ALL {
        println!("  {m}: {}", ex.samples.iter().filter(|s| s.maneuver == m).count());
    }
    if let Some(s) = ex.samples.iter().find(|s| s.is_lane_change()) {
        println!("first lane change, vehicle {} at frame {}:", s.vehicle_id, s.frame);
        for (name, v) in feature_names(FeatureSubset::Mobil8).iter().zip(s.features(FeatureSubset::Mobil8)) {
            println!("  {name:>6} = {v:8.3}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run(&std::env::args().skip(1).collect::<Vec<_>>())
}
