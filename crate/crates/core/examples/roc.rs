// ROC curves traced by sweeping the lane-keep : lane-change ratio of the
// training set, for the neural network and for MOBIL.
//
// `cargo run --release --example roc`

use lanechange::data::Lane;
use lanechange::evaluation::{lane_samples, roc_sweep, RocConfig, SpecFactory};
use lanechange::models::{ModelConfig, ModelSpec};
use lanechange::simulator::{generate_benchmark, BenchmarkConfig, LabelRule, ScenarioConfig};

pub fn run_example() -> lanechange::Result<()> {
    let cfg = BenchmarkConfig {
        scenario: ScenarioConfig { duration: 240.0, seed: 8, accel_noise: 0.3, ..Default::default() },
        rule: LabelRule::NoisyNonlinear,
        ..Default::default()
    };
    let samples = lane_samples(&generate_benchmark(&cfg)?.samples, Lane::Right);
    let mut models = ModelConfig::default();
    models.calibration.n_starts = 2;
    let roc = RocConfig { seed: 8, ..Default::default() };

    let mut curves = Vec::new();
    for spec in [ModelSpec::Mobil, "ann".parse()?] {
        let report = roc_sweep(&samples, &SpecFactory::new(vec![spec], models.clone()), &roc)?;
        println!("{spec}:");
        for p in &report.test.points {
            println!("  LK:LC {:>5} -> FPR {:.3} TPR {:.3}", p.ratio, p.fpr, p.tpr);
        }
        curves.push(report.test);
    }
    println!("ANN points on or above the MOBIL curve: {:.0}%", 100.0 * curves[1].points_above(&curves[0]));
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run_example()
}
