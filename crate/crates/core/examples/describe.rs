// Descriptive statistics: maneuver frequencies, PCA on the correlation
// matrix and odds ratios, written as JSON plus plot-ready CSV tables.
//
// `cargo run --example describe`

use lanechange::descriptive;
use lanechange::features::FeatureSubset;
use lanechange::simulator::{generate_benchmark, BenchmarkConfig, ScenarioConfig};

pub fn run_example() -> lanechange::Result<()> {
    let cfg = BenchmarkConfig { scenario: ScenarioConfig { duration: 300.0, seed: 3, ..Default::default() }, ..Default::default() };
    let samples = generate_benchmark(&cfg)?.samples;

    let report = descriptive::build(&samples, FeatureSubset::Mobil8)?;
    print!("{}", report.to_table());
    for (lane, d) in &report.lanes {
        for o in d.odds.iter().take(3) {
            println!("{lane:?} {:>6}: odds ratio {:.3} [{:.3}, {:.3}]", o.variable, o.odds_ratio, o.lower, o.upper);
        }
    }

    let dir = tempfile::tempdir()?;
    for p in report.write(dir.path(), false)? {
        println!("wrote {}", p.file_name().unwrap_or_default().to_string_lossy());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run_example()
}
