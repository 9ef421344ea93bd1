// Early prediction: the same models at growing horizons before the
// crossing. With a slow lateral movement the 24-variable set sees the
// maneuver starting, so short horizons are easy.
//
// `cargo run --release --example horizon`

use lanechange::evaluation::{horizon_sweep, EvalConfig, SpecFactory};
use lanechange::features::{FeatureSpec, FeatureSubset};
use lanechange::models::{ModelConfig, ModelSpec};
use lanechange::simulator::{simulate, ScenarioConfig};

pub fn run_example() -> lanechange::Result<()> {
    let scenario = ScenarioConfig { duration: 300.0, seed: 9, lane_change_duration: 6.0, ..Default::default() };
    let recording = simulate(&scenario)?.recording;
    let factory = SpecFactory::new(ModelSpec::parse_list("lr,mean*,stack-lr")?, ModelConfig::default());
    let spec = FeatureSpec { subset: FeatureSubset::Full24, ..Default::default() };
    let eval = EvalConfig { replicates: 5, seed: 9, ..Default::default() };
    let report = horizon_sweep(&recording, &[1.0, 2.0, 4.0], &spec, &factory, &eval)?;
    println!("{}", report.to_table());
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run_example()
}
