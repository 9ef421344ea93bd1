// Calibrating IDM + MOBIL on data the rule itself generated.
//
// The threshold trades off against the IDM acceleration scale, so only
// the politeness factor and the threshold's sign are comparable to the
// generator's values.
//
// `cargo run --release --example calibrate`

use lanechange::data::Lane;
use lanechange::evaluation::lane_samples;
use lanechange::mobil::{calibrate_mobil, CalibrationBounds, CalibrationConfig, PARAM_NAMES};
use lanechange::simulator::{generate_benchmark, generator_mobil, BenchmarkConfig, LabelRule, ScenarioConfig};

pub fn run_example() -> lanechange::Result<()> {
    let cfg = BenchmarkConfig {
        scenario: ScenarioConfig { duration: 300.0, seed: 4, ..Default::default() },
        rule: LabelRule::MobilTruth,
        ..Default::default()
    };
    let samples = generate_benchmark(&cfg)?.samples;
    let config = CalibrationConfig { n_starts: 8, ..Default::default() };
    for lane in [Lane::Right, Lane::Left] {
        let s = lane_samples(&samples, lane);
        let r = calibrate_mobil(&s, lane, &CalibrationBounds::default(), &config)?;
        println!("{lane} lane: {} of {} samples misclassified", r.objective, r.n_samples);
        let truth = generator_mobil(lane).to_vector();
        for ((name, got), want) in PARAM_NAMES.iter().zip(r.params.to_vector()).zip(truth) {
            println!("  {name:>6} {got:8.3}  (generator {want:.3})");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run_example()
}
