//! The `lcbench` command line.
//!
//! Every subcommand resolves a [`RunConfig`] from an optional TOML file and
//! flag overrides (flags win), writes its outputs into one directory and
//! embeds the resolved configuration and the crate version in every JSON
//! output. Delimited data files are listed in a `manifest_<command>.json`
//! envelope alongside, which carries their provenance.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on data
//! or integrity errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{Lane, Recording, RecordingMeta};
use crate::descriptive;
use crate::evaluation::{
    bootstrap_evaluate, horizon_sweep, lane_samples, roc_sweep, Balance, EvalConfig, RocConfig, SpecFactory,
};
use crate::features::{extract_samples, read_samples_file, write_samples, FeatureSpec, FeatureSubset, ManeuverSample};
use crate::mobil::calibrate_mobil;
use crate::models::{fit_models, ModelConfig, ModelSpec};
use crate::simulator::{generate_benchmark, simulate, write_events, BenchmarkConfig, LabelRule, ScenarioConfig};
use crate::{Error, Result, VERSION};

/// Default output directory when `--out` is not given.
pub const OUT_ENV: &str = "LCBENCH_OUT";

pub const TRACKS_FILE: &str = "tracks.csv";
pub const META_FILE: &str = "meta.toml";
pub const EVENTS_FILE: &str = "events.csv";
pub const SAMPLES_FILE: &str = "samples.csv";

#[derive(Debug, Parser)]
#[command(name = "lcbench", version, about = "Lane-change prediction benchmark")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream (required by stochastic subcommands)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overwrite existing output files
    #[arg(long, global = true)]
    pub force: bool,
    /// Output directory [default: $LCBENCH_OUT, else the current directory]
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct RecordingArgs {
    /// Directory holding tracks.csv and meta.toml
    #[arg(long)]
    pub recording: Option<PathBuf>,
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct EvalArgs {
    /// Comma-separated models, e.g. `ann,stack-ann,mean*,mobil`, or `all`
    #[arg(long)]
    pub models: Option<String>,
    /// Bootstrap replicates
    #[arg(long, short = 'B')]
    pub replicates: Option<usize>,
    /// Training fraction
    #[arg(long)]
    pub split: Option<f64>,
    /// `imbalanced` or `balanced`
    #[arg(long)]
    pub balance: Option<Balance>,
    /// Resample the training part with replacement
    #[arg(long)]
    pub with_replacement: bool,
    /// Do not preserve the class ratio in the split
    #[arg(long)]
    pub unstratified: bool,
    /// Feature subset for the data-based models: mobil8 or full24
    #[arg(long)]
    pub subset: Option<FeatureSubset>,
    /// Multi-start count for MOBIL calibration
    #[arg(long)]
    pub starts: Option<usize>,
    /// Evaluate one lane only
    #[arg(long)]
    pub lane: Option<Lane>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run the ring-road simulator and write a recording, its events and
    /// optionally decision-instant benchmark samples
    Simulate {
        /// Scenario TOML (overrides the run config's [scenario] table)
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        duration: Option<f64>,
        /// Also write labeled samples: mobil_truth or noisy_nonlinear
        #[arg(long)]
        benchmark: Option<LabelRule>,
    },
    /// Extract labeled maneuver samples from a recording
    Extract {
        #[command(flatten)]
        input: RecordingArgs,
        /// Prediction horizon in seconds
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        include_trucks: bool,
    },
    /// Frequency table, correlations, PCA and odds ratios
    Describe {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        subset: Option<FeatureSubset>,
    },
    /// Calibrate MOBIL per lane
    Calibrate {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        lane: Option<Lane>,
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Fit one model on all samples of a lane
    Train {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        model: ModelSpec,
        #[arg(long)]
        lane: Lane,
        #[arg(long)]
        subset: Option<FeatureSubset>,
    },
    /// Repeated 80/20 evaluation of several models
    Evaluate {
        #[arg(long)]
        samples: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// ROC curve from a sweep of the training class balance
    Roc {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        model: ModelSpec,
        /// Comma-separated LK:LC ratios
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        lane: Option<Lane>,
        #[arg(long)]
        subset: Option<FeatureSubset>,
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Evaluation at several prediction horizons
    Horizon {
        #[command(flatten)]
        input: RecordingArgs,
        /// Comma-separated horizons in seconds
        #[arg(long, value_delimiter = ',')]
        tau: Option<Vec<f64>>,
        #[command(flatten)]
        eval: EvalArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Extract { .. } => "extract",
            Command::Describe { .. } => "describe",
            Command::Calibrate { .. } => "calibrate",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Roc { .. } => "roc",
            Command::Horizon { .. } => "horizon",
        }
    }

    fn stochastic(&self) -> bool {
        !matches!(self, Command::Extract { .. } | Command::Describe { .. })
    }
}

/// Settings of the `simulate --benchmark` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSettings {
    pub keep_ratio: f64,
    pub include_trucks: bool,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        let b = BenchmarkConfig::default();
        BenchmarkSettings { keep_ratio: b.keep_ratio, include_trucks: b.include_trucks }
    }
}

/// Everything that determines a run's outputs. Paths and `--jobs` are
/// deliberately absent so reruns elsewhere or with other thread counts
/// produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Models evaluated by `evaluate` and `horizon`.
    pub model_list: Vec<ModelSpec>,
    pub lane: Option<Lane>,
    pub taus: Vec<f64>,
    pub label_rule: Option<LabelRule>,
    pub features: FeatureSpec,
    pub models: ModelConfig,
    pub evaluation: EvalConfig,
    pub roc: RocConfig,
    pub benchmark: BenchmarkSettings,
    pub scenario: ScenarioConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            model_list: ModelSpec::all(),
            lane: None,
            taus: vec![2.0, 3.0, 4.0, 5.0],
            label_rule: None,
            features: FeatureSpec::default(),
            models: ModelConfig::default(),
            evaluation: EvalConfig::default(),
            roc: RocConfig::default(),
            benchmark: BenchmarkSettings::default(),
            scenario: ScenarioConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Pushes the run seed into every component that draws random numbers.
    fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.evaluation.seed = s;
            self.roc.seed = s;
            self.scenario.seed = s;
            self.models.calibration.seed = s;
            self.models.train.ann.seed = s;
        }
    }

    fn apply_eval(&mut self, a: &EvalArgs) -> Result<()> {
        if let Some(m) = &a.models {
            self.model_list = ModelSpec::parse_list(m)?;
        }
        if let Some(b) = a.replicates {
            self.evaluation.replicates = b;
        }
        if let Some(s) = a.split {
            self.evaluation.split = s;
        }
        if let Some(b) = a.balance {
            self.evaluation.balance = b;
        }
        self.evaluation.with_replacement |= a.with_replacement;
        if a.unstratified {
            self.evaluation.stratified = false;
        }
        self.set_subset(a.subset);
        if let Some(s) = a.starts {
            self.models.calibration.n_starts = s;
        }
        if a.lane.is_some() {
            self.lane = a.lane;
        }
        Ok(())
    }

    fn set_subset(&mut self, subset: Option<FeatureSubset>) {
        if let Some(s) = subset {
            self.models.subset = s;
            self.features.subset = s;
        }
    }
}

/// JSON envelope of every report file.
#[derive(Debug, Serialize, Deserialize)]
pub struct Output<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub report: T,
}

impl<T: serde::de::DeserializeOwned> Output<T> {
    pub fn read(path: impl AsRef<Path>) -> Result<Output<T>> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

struct Writer<'a> {
    dir: PathBuf,
    command: &'static str,
    config: &'a RunConfig,
    files: Vec<(String, Vec<u8>)>,
}

impl<'a> Writer<'a> {
    fn json<T: Serialize>(&mut self, name: &str, report: &T) -> Result<()> {
        let env = Output {
            tool: "lcbench".to_string(),
            version: VERSION.to_string(),
            command: self.command.to_string(),
            config: self.config.clone(),
            report,
        };
        let text = serde_json::to_string_pretty(&env)? + "\n";
        self.raw(name, text.into_bytes());
        Ok(())
    }

    fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    /// Checks every target before writing any, then writes them all plus a
    /// manifest when there are non-JSON files.
    fn commit(mut self, force: bool) -> Result<Vec<PathBuf>> {
        let data: Vec<String> = self.files.iter().filter(|(n, _)| !n.ends_with(".json")).map(|(n, _)| n.clone()).collect();
        if !data.is_empty() {
            self.json(&format!("manifest_{}.json", self.command), &data)?;
        }
        std::fs::create_dir_all(&self.dir)?;
        let paths: Vec<PathBuf> = self.files.iter().map(|(n, _)| self.dir.join(n)).collect();
        if !force {
            if let Some(p) = paths.iter().find(|p| p.exists()) {
                return Err(Error::Config(format!("{} already exists; pass --force to overwrite", p.display())));
            }
        }
        for ((_, bytes), path) in self.files.iter().zip(&paths) {
            std::fs::write(path, bytes)?;
        }
        Ok(paths)
    }
}

fn out_dir(common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn load_recording(args: &RecordingArgs) -> Result<Recording> {
    let (tracks, meta) = match (&args.recording, &args.tracks, &args.meta) {
        (Some(dir), None, None) => (dir.join(TRACKS_FILE), dir.join(META_FILE)),
        (None, Some(t), Some(m)) => (t.clone(), m.clone()),
        _ => return Err(Error::Config("give either --recording DIR or both --tracks and --meta".into())),
    };
    let meta = RecordingMeta::read(meta)?;
    Recording::load(tracks, &meta)
}

fn samples_csv(samples: &[ManeuverSample]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_samples(&mut buf, samples)?;
    Ok(buf)
}

fn lanes(selected: Option<Lane>) -> Vec<Lane> {
    selected.map_or(vec![Lane::Right, Lane::Left], |l| vec![l])
}

/// Lanes (in order) whose samples contain both classes.
fn usable_lanes(samples: &[ManeuverSample], selected: Option<Lane>) -> Vec<(Lane, Vec<ManeuverSample>)> {
    lanes(selected)
        .into_iter()
        .map(|l| (l, lane_samples(samples, l)))
        .filter(|(_, s)| {
            let lc = s.iter().filter(|x| x.is_lane_change()).count();
            lc > 0 && lc < s.len()
        })
        .collect()
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::from_toml(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if cli.common.seed.is_some() {
        cfg.seed = cli.common.seed;
    }
    match &cli.command {
        Command::Simulate { scenario, duration, benchmark } => {
            if let Some(p) = scenario {
                cfg.scenario = ScenarioConfig::from_toml(&std::fs::read_to_string(p)?)?;
            }
            if let Some(d) = duration {
                cfg.scenario.duration = *d;
            }
            if benchmark.is_some() {
                cfg.label_rule = *benchmark;
            }
        }
        Command::Extract { tau, include_trucks, .. } => {
            if let Some(t) = tau {
                cfg.features.horizon = *t;
            }
            cfg.features.include_trucks |= include_trucks;
        }
        Command::Describe { subset, .. } => cfg.set_subset(*subset),
        Command::Calibrate { lane, starts, .. } => {
            if lane.is_some() {
                cfg.lane = *lane;
            }
            if let Some(s) = starts {
                cfg.models.calibration.n_starts = *s;
            }
        }
        Command::Train { lane, subset, model, .. } => {
            cfg.lane = Some(*lane);
            cfg.model_list = vec![*model];
            cfg.set_subset(*subset);
        }
        Command::Evaluate { eval, .. } => cfg.apply_eval(eval)?,
        Command::Roc { grid, lane, subset, starts, model, .. } => {
            if let Some(g) = grid {
                cfg.roc.grid = g.clone();
            }
            if lane.is_some() {
                cfg.lane = *lane;
            }
            if let Some(s) = starts {
                cfg.models.calibration.n_starts = *s;
            }
            cfg.model_list = vec![*model];
            cfg.set_subset(*subset);
        }
        Command::Horizon { tau, eval, .. } => {
            if let Some(t) = tau {
                cfg.taus = t.clone();
            }
            cfg.apply_eval(eval)?;
        }
    }
    if cli.command.stochastic() && cfg.seed.is_none() {
        return Err(Error::Config(format!("`{}` needs a seed: pass --seed or set `seed` in the config", cli.command.name())));
    }
    cfg.apply_seed();
    cfg.features.validate()?;
    cfg.evaluation.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let mut w = Writer { dir: out_dir(&cli.common), command: cli.command.name(), config: cfg, files: Vec::new() };
    match &cli.command {
        Command::Simulate { .. } => {
            cfg.scenario.validate()?;
            #[derive(Serialize)]
            struct Summary {
                tracks: usize,
                frames: usize,
                events: usize,
                decisions: usize,
                samples: Option<usize>,
            }
            let (output, samples) = match cfg.label_rule {
                Some(rule) => {
                    let b = generate_benchmark(&BenchmarkConfig {
                        scenario: cfg.scenario.clone(),
                        rule,
                        keep_ratio: cfg.benchmark.keep_ratio,
                        include_trucks: cfg.benchmark.include_trucks,
                    })?;
                    (b.output, Some(b.samples))
                }
                None => (simulate(&cfg.scenario)?, None),
            };
            let rec = &output.recording;
            let mut tracks = Vec::new();
            crate::data::write_tracks(&mut tracks, &rec.trajectories)?;
            w.raw(TRACKS_FILE, tracks);
            w.raw(META_FILE, toml::to_string(&rec.meta).map_err(|e| Error::Metadata(e.to_string()))?.into_bytes());
            let mut events = Vec::new();
            write_events(&mut events, &output.events)?;
            w.raw(EVENTS_FILE, events);
            if let Some(s) = &samples {
                w.raw(SAMPLES_FILE, samples_csv(s)?);
            }
            let summary = Summary {
                tracks: rec.trajectories.len(),
                frames: rec.trajectories.iter().map(|t| t.frames.len()).sum(),
                events: output.events.len(),
                decisions: output.decisions.len(),
                samples: samples.as_ref().map(Vec::len),
            };
            writeln!(stdout, "{} tracks, {} lane changes, {} decisions", summary.tracks, summary.events, summary.decisions)?;
            w.json("simulate.json", &summary)?;
        }
        Command::Extract { input, .. } => {
            let rec = load_recording(input)?;
            let ex = extract_samples(&rec, &cfg.features)?;
            writeln!(stdout, "{} samples", ex.samples.len())?;
            w.raw(SAMPLES_FILE, samples_csv(&ex.samples)?);
            #[derive(Serialize)]
            struct Summary<'a> {
                samples: usize,
                skipped: &'a crate::features::SkipCounts,
            }
            w.json("extract.json", &Summary { samples: ex.samples.len(), skipped: &ex.skipped })?;
        }
        Command::Describe { samples, .. } => {
            let s = read_samples_file(samples)?;
            let r = descriptive::build(&s, cfg.models.subset)?;
            write!(stdout, "{}", r.to_table())?;
            w.json("describe.json", &r)?;
            w.raw("frequency.csv", r.frequency_csv()?.into_bytes());
            w.raw("pca_loadings.csv", r.pca_csv()?.into_bytes());
            w.raw("pca_explained.csv", r.explained_csv()?.into_bytes());
            w.raw("odds_ratios.csv", r.odds_csv()?.into_bytes());
            for (lane, d) in &r.lanes {
                w.raw(&format!("correlation_{lane}.csv"), d.correlation.to_csv()?.into_bytes());
            }
        }
        Command::Calibrate { samples, .. } => {
            let s = read_samples_file(samples)?;
            let usable = usable_lanes(&s, cfg.lane);
            if usable.is_empty() {
                return Err(Error::Dataset("no lane has both lane changes and lane keeping".into()));
            }
            for (lane, ls) in usable {
                let r = calibrate_mobil(&ls, lane, &cfg.models.bounds, &cfg.models.calibration)?;
                let v = r.params.to_vector();
                writeln!(
                    stdout,
                    "{lane}: {} of {} misclassified; v0 {:.2} T {:.2} a {:.2} b {:.2} l {:.2} p {:.3} threshold {:.3}",
                    r.objective, r.n_samples, v[0], v[1], v[2], v[3], v[4], v[5], v[6]
                )?;
                w.raw(&format!("calibration_{lane}.toml"), r.to_toml()?.into_bytes());
                w.json(&format!("calibration_{lane}.json"), &r)?;
            }
        }
        Command::Train { samples, model, lane, .. } => {
            let s = lane_samples(&read_samples_file(samples)?, *lane);
            let fitted = fit_models(&[*model], &s, &cfg.models)?.remove(0);
            writeln!(stdout, "trained {model} on {} {lane}-lane samples", s.len())?;
            let name = model.to_string().to_lowercase().replace('*', "star");
            w.json(&format!("model_{lane}_{name}.json"), &fitted)?;
        }
        Command::Evaluate { samples, .. } => {
            let s = read_samples_file(samples)?;
            let factory = SpecFactory::new(cfg.model_list.clone(), cfg.models.clone());
            let usable = usable_lanes(&s, cfg.lane);
            if usable.is_empty() {
                return Err(Error::Dataset("no lane has both lane changes and lane keeping".into()));
            }
            for (lane, ls) in usable {
                let r = bootstrap_evaluate(&ls, &factory, &cfg.evaluation)?;
                writeln!(stdout, "{}", r.to_table())?;
                w.raw(&format!("error_correlation_{lane}.csv"), r.error_correlation.to_csv()?.into_bytes());
                w.json(&format!("evaluation_{lane}.json"), &r)?;
            }
        }
        Command::Roc { samples, model, .. } => {
            let s = read_samples_file(samples)?;
            let factory = SpecFactory::new(vec![*model], cfg.models.clone());
            let usable = usable_lanes(&s, cfg.lane);
            if usable.is_empty() {
                return Err(Error::Dataset("no lane has both lane changes and lane keeping".into()));
            }
            for (lane, ls) in usable {
                let r = roc_sweep(&ls, &factory, &cfg.roc)?;
                for p in &r.test.points {
                    writeln!(stdout, "{lane} {model} ratio {:>6} FPR {:.4} TPR {:.4}", p.ratio, p.fpr, p.tpr)?;
                }
                if !r.skipped.is_empty() {
                    writeln!(stdout, "{lane}: skipped ratios {:?} (fewer than 10 rows in a class)", r.skipped)?;
                }
                w.raw(&format!("roc_{lane}.csv"), r.to_csv()?.into_bytes());
                w.json(&format!("roc_{lane}.json"), &r)?;
            }
        }
        Command::Horizon { input, .. } => {
            let rec = load_recording(input)?;
            let factory = SpecFactory::new(cfg.model_list.clone(), cfg.models.clone());
            let spec = FeatureSpec { subset: cfg.models.subset, ..cfg.features.clone() };
            let mut r = horizon_sweep(&rec, &cfg.taus, &spec, &factory, &cfg.evaluation)?;
            if let Some(lane) = cfg.lane {
                r.reports.retain(|x| x.lane == lane);
            }
            writeln!(stdout, "{}", r.to_table())?;
            w.json("horizon.json", &r)?;
        }
    }
    w.commit(cli.common.force)
}

/// Parses `argv` (including the program name) and runs the subcommand,
/// printing tables to `stdout` and diagnostics to `stderr`.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    let result = resolve(&cli).and_then(|cfg| {
        // Tables are buffered so the job can move into a worker pool.
        let mut buf = Vec::new();
        let mut job = || execute(&cli, &cfg, &mut buf);
        let r = match cli.common.jobs {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(e.to_string()))?
                .install(job),
            None => job(),
        };
        let _ = stdout.write_all(&buf);
        r
    });
    match result {
        Ok(paths) => {
            for p in paths {
                let _ = writeln!(stderr, "wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_data_error() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}
