// The `lcbench` command line driven in-process: simulate, evaluate and
// read the JSON envelope back.
//
// `cargo run --release --example pipeline`

use lanechange::cli::{run_with, Output};
use lanechange::evaluation::EvaluationReport;

pub fn run_example() -> lanechange::Result<()> {
    let dir = tempfile::tempdir()?;
    let out = dir.path().to_string_lossy().into_owned();
    let samples = format!("{out}/samples.csv");
    let steps: [&[&str]; 2] = [
        &["simulate", "--duration", "180", "--benchmark", "noisy_nonlinear"],
        &["evaluate", "--samples", &samples, "--models", "nb,ann,mobil", "-B", "4", "--starts", "2", "--lane", "right"],
    ];
    let common = ["--seed", "3", "--out", &out];
    for args in steps {
        let argv = ["lcbench"].iter().chain(args).chain(&common).copied();
        let code = run_with(argv, &mut std::io::stdout(), &mut std::io::stderr());
        if code != 0 {
            return Err(lanechange::Error::Config(format!("{} exited with {code}", args[0])));
        }
    }
    let env: Output<EvaluationReport> = Output::read(dir.path().join("evaluation_right.json"))?;
    println!("{} {} (seed {:?})", env.tool, env.version, env.config.seed);
    for m in &env.report.models {
        println!("  {:<6} mean test error {:.2}%", m.model, 100.0 * env.report.mean_test_total(&m.model).unwrap_or(f64::NAN));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> lanechange::Result<()> {
    run_example()
}
