// The six data-based classifiers on the 24-variable feature set.
//
// `cargo run --release --example classifiers`

use lanechange::classifiers::{train, training_error, ClassifierKind, Dataset, TrainConfig};
use lanechange::data::Lane;
use lanechange::evaluation::lane_samples;
use lanechange::features::FeatureSubset;
use lanechange::simulator::{generate_benchmark, BenchmarkConfig, LabelRule, ScenarioConfig};

pub fn run_example() -> lanechange::Result<()> {
    let cfg = BenchmarkConfig {
        scenario: ScenarioConfig { duration: 300.0, seed: 5, accel_noise: 0.3, ..Default::default() },
        rule: LabelRule::NoisyNonlinear,
        ..Default::default()
    };
    let samples = lane_samples(&generate_benchmark(&cfg)?.samples, Lane::Right);
    let data = Dataset::from_samples(&samples, FeatureSubset::Full24)?;
    println!("{} right-lane samples, {} overtakes", data.len(), data.positives());

    for kind in ClassifierKind::ALL {
        let model = train(kind, &data, &TrainConfig::default())?;
        let err = training_error(&model, &data)?;
        println!("{:>4}: training error {:5.2}%", kind.code(), 100.0 * err);
    }

    // models round-trip through JSON
    let lr = train(ClassifierKind::Logistic, &data, &TrainConfig::default())?;
    let back = lanechange::classifiers::TrainedModel::from_json(&lr.to_json()?)?;
    assert_eq!(back.predict_all(&data.x)?, lr.predict_all(&data.x)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run_example()
}
