// Repeated stratified 80/20 evaluation of rule-based and data-based models.
//
// `cargo run --release --example evaluate -- 100` (replicates, default 10)

use lanechange::evaluation::{evaluate_lanes, EvalConfig, SpecFactory};
use lanechange::models::{ModelConfig, ModelSpec};
use lanechange::simulator::{generate_benchmark, BenchmarkConfig, LabelRule, ScenarioConfig};

pub fn run_example() -> lanechange::Result<()> {
    run(10)
}

fn run(replicates: usize) -> lanechange::Result<()> {
    let cfg = BenchmarkConfig {
        scenario: ScenarioConfig { duration: 240.0, seed: 7, accel_noise: 0.3, ..Default::default() },
        rule: LabelRule::NoisyNonlinear,
        ..Default::default()
    };
    let samples = generate_benchmark(&cfg)?.samples;

    let mut models = ModelConfig::default();
    models.calibration.n_starts = 2;
    let factory = SpecFactory::new(ModelSpec::parse_list("lr,dt,ann,mean*,stack-ann,mobil")?, models);
    let eval = EvalConfig { replicates, seed: 7, ..Default::default() };
    for report in evaluate_lanes(&samples, &factory, &eval)? {
        println!("{}", report.to_table());
        println!("mean error correlation {:.2}\n", report.error_correlation.mean_off_diagonal().unwrap_or(f64::NAN));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run(std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10))
}
