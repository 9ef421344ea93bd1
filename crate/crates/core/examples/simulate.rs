// Ring-road simulation: a synthetic recording with ground-truth lane changes.
//
// `cargo run --example simulate`

use lanechange::data::Lane;
use lanechange::simulator::{simulate, ScenarioConfig};

pub fn run_example() -> lanechange::Result<()> {
    let scenario = ScenarioConfig { duration: 120.0, seed: 1, ..Default::default() };
    let out = simulate(&scenario)?;
    let rec = &out.recording;
    println!("{} tracks over {} s", rec.trajectories.len(), scenario.duration);
    println!("{} lane changes, {} rule evaluations", out.events.len(), out.decisions.len());
    for lane in [Lane::Right, Lane::Left] {
        let changes = out.decisions.iter().filter(|d| d.sample.lane() == lane && d.sample.is_lane_change()).count();
        println!("  from the {lane} lane: {changes}");
    }

    // tracks.csv uses HighD column names, so the same loader reads both
    let dir = tempfile::tempdir()?;
    rec.write(dir.path().join("tracks.csv"), dir.path().join("meta.toml"))?;
    let bytes = std::fs::metadata(dir.path().join("tracks.csv"))?.len();
    println!("wrote {} kB of tracks", bytes / 1024);
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run_example()
}
