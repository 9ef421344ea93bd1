// Bagging rules and stacking meta-learners over the six base classifiers,
// and how correlated the base models' mistakes are.
//
// `cargo run --release --example ensembles`

use lanechange::classifiers::{ClassifierKind, Dataset, TrainConfig};
use lanechange::data::Lane;
use lanechange::ensemble::{prediction_error_correlation, train_bases, train_ensemble, EnsembleKind};
use lanechange::evaluation::lane_samples;
use lanechange::features::FeatureSubset;
use lanechange::simulator::{generate_benchmark, BenchmarkConfig, LabelRule, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> lanechange::Result<()> {
    let cfg = BenchmarkConfig {
        scenario: ScenarioConfig { duration: 240.0, seed: 6, accel_noise: 0.3, ..Default::default() },
        rule: LabelRule::NoisyNonlinear,
        ..Default::default()
    };
    let samples = lane_samples(&generate_benchmark(&cfg)?.samples, Lane::Left);
    let data = Dataset::from_samples(&samples, FeatureSubset::Full24)?;
    let config = TrainConfig::default();
    let bases = train_bases(&data, &config)?;

    let predictions: Vec<Vec<bool>> = bases.iter().map(|m| m.predict_all(&data.x)).collect::<Result<_, _>>()?;
    let names: Vec<String> = ClassifierKind::ALL.iter().map(|k| k.code().to_string()).collect();
    let corr = prediction_error_correlation(&names, &predictions, &data.y)?;
    println!("mean error correlation between base models: {:.2}", corr.mean_off_diagonal().unwrap_or(f64::NAN));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in EnsembleKind::ALL {
        let model = train_ensemble(kind, &data, bases.clone(), &config)?;
        let mut wrong = 0;
        for (x, &y) in data.x.iter().zip(&data.y) {
            wrong += (model.predict(x, &mut rng)? != y) as usize;
        }
        println!("{:>10}: training error {:5.2}%", kind.to_string(), 100.0 * wrong as f64 / data.len() as f64);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run_example()
}
