//! Error decomposition, repeated 80/20 sub-sampling, ROC sweeps over the
//! training class balance, horizon sweeps and descriptive statistics.
//!
//! Every stochastic step draws from a ChaCha8 stream derived from
//! `(seed, replicate, attempt)`, so results do not depend on the number of
//! worker threads.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::logistic::{train_logistic, LogisticConfig};
use crate::classifiers::Dataset;
use crate::data::{Lane, Recording};
use crate::ensemble::{prediction_error_correlation, CorrelationMatrix};
use crate::features::{extract_samples, feature_names, FeatureSpec, FeatureSubset, Maneuver, ManeuverSample, NEIGHBOR_NAMES};
use crate::linalg::{mean, pearson, quantile_sorted, std_dev};
use crate::models::{fit_models, FittedModel, ModelConfig, ModelSpec};
use crate::{Error, Result, VERSION};

/// Misclassification rates split by true class. Counts are kept so the
/// decomposition `wrong = wrong_lc + wrong_lk` is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTriple {
    pub n: usize,
    pub n_lc: usize,
    pub n_lk: usize,
    pub wrong_lc: usize,
    pub wrong_lk: usize,
    pub total: f64,
    /// `None` when the sample has no lane change.
    pub error_lc: Option<f64>,
    /// `None` when the sample has no lane keeping.
    pub error_lk: Option<f64>,
}

impl ErrorTriple {
    pub fn from_counts(n_lc: usize, n_lk: usize, wrong_lc: usize, wrong_lk: usize) -> ErrorTriple {
        let n = n_lc + n_lk;
        let rate = |w: usize, d: usize| (d > 0).then(|| w as f64 / d as f64);
        ErrorTriple {
            n,
            n_lc,
            n_lk,
            wrong_lc,
            wrong_lk,
            total: rate(wrong_lc + wrong_lk, n).unwrap_or(0.0),
            error_lc: rate(wrong_lc, n_lc),
            error_lk: rate(wrong_lk, n_lk),
        }
    }

    pub fn wrong(&self) -> usize {
        self.wrong_lc + self.wrong_lk
    }

    /// `total·N = error_LC·N_LC + error_LK·N_LK`, checked on the counts.
    pub fn identity_holds(&self) -> bool {
        let lc = self.error_lc.map_or(0, |_| self.wrong_lc);
        let lk = self.error_lk.map_or(0, |_| self.wrong_lk);
        self.n == self.n_lc + self.n_lk && self.wrong() == lc + lk && self.wrong_lc <= self.n_lc && self.wrong_lk <= self.n_lk
    }

    /// False-positive rate (lane keeping predicted as a change).
    pub fn fpr(&self) -> f64 {
        self.error_lk.unwrap_or(0.0)
    }

    /// True-positive rate.
    pub fn tpr(&self) -> f64 {
        1.0 - self.error_lc.unwrap_or(0.0)
    }
}

/// `true` = lane change, for both predictions and labels.
pub fn error_triple(predictions: &[bool], labels: &[bool]) -> Result<ErrorTriple> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(Error::Dataset("error triple of an empty sample".into()));
    }
    let (mut n_lc, mut wrong_lc, mut wrong_lk) = (0, 0, 0);
    for (&p, &y) in predictions.iter().zip(labels) {
        if y {
            n_lc += 1;
            wrong_lc += usize::from(!p);
        } else {
            wrong_lk += usize::from(p);
        }
    }
    Ok(ErrorTriple::from_counts(n_lc, labels.len() - n_lc, wrong_lc, wrong_lk))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Balance {
    Imbalanced,
    /// The training majority class is undersampled to the minority count.
    Balanced,
}

impl std::str::FromStr for Balance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imbalanced" => Ok(Balance::Imbalanced),
            "balanced" => Ok(Balance::Balanced),
            other => Err(Error::Config(format!("unknown balance mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub replicates: usize,
    /// Training fraction.
    pub split: f64,
    pub balance: Balance,
    /// Keep the class ratio in both parts of the split.
    pub stratified: bool,
    /// Draw the training part with replacement; the test part is then the
    /// out-of-bag rows.
    pub with_replacement: bool,
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            replicates: 1000,
            split: 0.8,
            balance: Balance::Imbalanced,
            stratified: true,
            with_replacement: false,
            max_retries: 10,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("need at least one replicate".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split must be in (0, 1), got {}", self.split)));
        }
        if self.max_retries > 14 {
            return Err(Error::Config("at most 14 retries per replicate".into()));
        }
        Ok(())
    }
}

/// Independent stream for one (replicate, attempt) pair.
pub fn substream(seed: u64, replicate: usize, attempt: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((replicate as u64) << 4) | attempt as u64);
    rng
}

/// Something that turns samples into lane-change predictions.
pub trait Predictor: Send + Sync {
    fn predict(&self, samples: &[ManeuverSample], rng: &mut ChaCha8Rng) -> Result<Vec<bool>>;
}

/// Fits a fixed list of named models on a training set.
pub trait ModelFactory: Sync {
    fn names(&self) -> Vec<String>;
    /// `seed` varies per replicate; use it for any training randomness.
    fn fit(&self, train: &[ManeuverSample], seed: u64) -> Result<Vec<Box<dyn Predictor>>>;
    /// Configuration echoed into reports.
    fn config(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

struct Fitted {
    model: FittedModel,
    subset: FeatureSubset,
}

impl Predictor for Fitted {
    fn predict(&self, samples: &[ManeuverSample], rng: &mut ChaCha8Rng) -> Result<Vec<bool>> {
        self.model.predict(samples, self.subset, rng)
    }
}

/// The library's own models, fitted with [`fit_models`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFactory {
    pub specs: Vec<ModelSpec>,
    pub config: ModelConfig,
}

impl SpecFactory {
    pub fn new(specs: Vec<ModelSpec>, config: ModelConfig) -> SpecFactory {
        SpecFactory { specs, config }
    }
}

impl ModelFactory for SpecFactory {
    fn names(&self) -> Vec<String> {
        self.specs.iter().map(ToString::to_string).collect()
    }

    fn fit(&self, train: &[ManeuverSample], seed: u64) -> Result<Vec<Box<dyn Predictor>>> {
        let mut config = self.config.clone();
        config.calibration.seed = config.calibration.seed.wrapping_add(seed);
        config.train.ann.seed = config.train.ann.seed.wrapping_add(seed);
        let subset = config.subset;
        Ok(fit_models(&self.specs, train, &config)?
            .into_iter()
            .map(|model| Box::new(Fitted { model, subset }) as Box<dyn Predictor>)
            .collect())
    }

    fn config(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).unwrap_or(serde_json::Value::Null)
    }
}

fn labels_of(samples: &[ManeuverSample]) -> Vec<bool> {
    samples.iter().map(ManeuverSample::is_lane_change).collect()
}

fn class_rows(labels: &[bool]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        out[usize::from(y)].push(i);
    }
    out
}

/// Train/test row indices, both sorted.
fn split_rows(labels: &[bool], config: &EvalConfig, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let groups: Vec<Vec<usize>> = if config.stratified {
        class_rows(labels).into_iter().collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for rows in groups {
        let k = (config.split * rows.len() as f64).round() as usize;
        if config.with_replacement {
            let mut drawn = vec![false; rows.len()];
            for _ in 0..k {
                let j = rng.gen_range(0..rows.len());
                drawn[j] = true;
                train.push(rows[j]);
            }
            test.extend(rows.iter().zip(&drawn).filter(|(_, d)| !**d).map(|(r, _)| *r));
        } else {
            let mut rows = rows;
            rows.shuffle(rng);
            train.extend_from_slice(&rows[..k]);
            test.extend_from_slice(&rows[k..]);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Keeps `n` randomly chosen rows, in their original order.
fn undersample(rows: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n >= rows.len() {
        return rows.to_vec();
    }
    let mut picked: Vec<usize> = sample_indices(rng, rows.len(), n).into_iter().map(|i| rows[i]).collect();
    picked.sort_unstable();
    picked
}

/// Undersamples the training majority class to the minority count.
fn balance_rows(train: &[usize], labels: &[bool], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (lc, lk): (Vec<usize>, Vec<usize>) = train.iter().partition(|&&i| labels[i]);
    let n = lc.len().min(lk.len());
    let mut out = undersample(&lc, n, rng);
    out.extend(undersample(&lk, n, rng));
    out.sort_unstable();
    out
}

fn pick(samples: &[ManeuverSample], rows: &[usize]) -> Vec<ManeuverSample> {
    rows.iter().map(|&i| samples[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    /// Number of substreams consumed (1 unless the split had to be redrawn).
    pub attempts: usize,
    pub failed: bool,
    pub n_train: usize,
    pub n_test: usize,
    /// One triple per model, in report order.
    pub test: Vec<ErrorTriple>,
    pub train: Vec<ErrorTriple>,
    #[serde(skip)]
    correlation: Option<CorrelationMatrix>,
}

fn run_replicate(
    samples: &[ManeuverSample],
    labels: &[bool],
    factory: &dyn ModelFactory,
    names: &[String],
    config: &EvalConfig,
    replicate: usize,
) -> Result<ReplicateResult> {
    for attempt in 0..=config.max_retries {
        let mut rng = substream(config.seed, replicate, attempt);
        let (mut train, test) = split_rows(labels, config, &mut rng);
        if config.balance == Balance::Balanced {
            train = balance_rows(&train, labels, &mut rng);
        }
        let train_lc = train.iter().filter(|&&i| labels[i]).count();
        if train_lc == 0 || train_lc == train.len() || test.is_empty() {
            continue;
        }
        let train_s = pick(samples, &train);
        let test_s = pick(samples, &test);
        let train_y = labels_of(&train_s);
        let test_y = labels_of(&test_s);
        let fit_seed = rng.gen::<u64>();
        let models = factory.fit(&train_s, fit_seed)?;
        if models.len() != names.len() {
            return Err(Error::LengthMismatch(models.len(), names.len()));
        }
        let mut test_triples = Vec::with_capacity(models.len());
        let mut train_triples = Vec::with_capacity(models.len());
        let mut test_preds = Vec::with_capacity(models.len());
        for model in &models {
            let mut tie = ChaCha8Rng::seed_from_u64(rng.gen());
            let p_train = model.predict(&train_s, &mut tie)?;
            let p_test = model.predict(&test_s, &mut tie)?;
            train_triples.push(error_triple(&p_train, &train_y)?);
            test_triples.push(error_triple(&p_test, &test_y)?);
            test_preds.push(p_test);
        }
        let correlation = (test_y.len() >= 2).then(|| prediction_error_correlation(names, &test_preds, &test_y)).transpose()?;
        return Ok(ReplicateResult {
            replicate,
            attempts: attempt + 1,
            failed: false,
            n_train: train.len(),
            n_test: test.len(),
            test: test_triples,
            train: train_triples,
            correlation,
        });
    }
    Ok(ReplicateResult {
        replicate,
        attempts: config.max_retries + 1,
        failed: true,
        n_train: 0,
        n_test: 0,
        test: Vec::new(),
        train: Vec::new(),
        correlation: None,
    })
}

/// Mean, spread and quantiles of one error rate over replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Summary {
            n: values.len(),
            mean: mean(values),
            std_dev: std_dev(values),
            q05: quantile_sorted(&sorted, 0.05),
            median: quantile_sorted(&sorted, 0.5),
            q95: quantile_sorted(&sorted, 0.95),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleSummary {
    pub total: Option<Summary>,
    pub lc: Option<Summary>,
    pub lk: Option<Summary>,
}

impl TripleSummary {
    fn of<'a>(triples: impl Iterator<Item = &'a ErrorTriple> + Clone) -> TripleSummary {
        let collect = |f: fn(&ErrorTriple) -> Option<f64>| Summary::of(&triples.clone().filter_map(f).collect::<Vec<_>>());
        TripleSummary { total: collect(|t| Some(t.total)), lc: collect(|t| t.error_lc), lk: collect(|t| t.error_lk) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub test: TripleSummary,
    pub train: TripleSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: String,
    pub lane: Lane,
    pub horizon: f64,
    pub n_samples: usize,
    pub n_lc: usize,
    pub n_lk: usize,
    pub config: EvalConfig,
    pub model_config: serde_json::Value,
    pub models: Vec<ModelSummary>,
    pub failed_replicates: usize,
    /// Mean over replicates of the testing error-indicator correlations.
    pub error_correlation: CorrelationMatrix,
    pub replicates: Vec<ReplicateResult>,
}

impl EvaluationReport {
    pub fn model(&self, name: &str) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model.eq_ignore_ascii_case(name))
    }

    /// Mean testing total error of a model, as a fraction.
    pub fn mean_test_total(&self, name: &str) -> Option<f64> {
        self.model(name)?.test.total.map(|s| s.mean)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<EvaluationReport> {
        Ok(serde_json::from_str(text)?)
    }

    /// Aligned text table of the testing and training errors in percent.
    pub fn to_table(&self) -> String {
        let (change, keep) = match self.lane {
            Lane::Right => ("OV", "LKR"),
            Lane::Left => ("FD", "LKL"),
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "lane {:?}, tau {} s, {} samples ({} {change}, {} {keep}), B = {}, split {}, {:?}, seed {}",
            self.lane,
            self.horizon,
            self.n_samples,
            self.n_lc,
            self.n_lk,
            self.config.replicates,
            self.config.split,
            self.config.balance,
            self.config.seed
        );
        let _ = writeln!(
            out,
            "{:<10} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14}",
            "model",
            "test total",
            format!("test {change}"),
            format!("test {keep}"),
            "train total",
            format!("train {change}"),
            format!("train {keep}")
        );
        let cell = |s: &Option<Summary>| match s {
            Some(s) => format!("{:.2} ± {:.2}", 100.0 * s.mean, 100.0 * s.std_dev),
            None => "-".to_string(),
        };
        for m in &self.models {
            let _ = writeln!(
                out,
                "{:<10} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14}",
                m.model,
                cell(&m.test.total),
                cell(&m.test.lc),
                cell(&m.test.lk),
                cell(&m.train.total),
                cell(&m.train.lc),
                cell(&m.train.lk)
            );
        }
        if self.failed_replicates > 0 {
            let _ = writeln!(out, "{} replicate(s) failed: a class was missing after {} redraws", self.failed_replicates, self.config.max_retries);
        }
        out
    }
}

fn mean_correlation(names: &[String], replicates: &[ReplicateResult]) -> CorrelationMatrix {
    let n = names.len();
    let mut sum = vec![vec![0.0; n]; n];
    let mut count = vec![vec![0usize; n]; n];
    for c in replicates.iter().filter_map(|r| r.correlation.as_ref()) {
        for i in 0..n {
            for j in 0..n {
                if let Some(v) = c.values[i][j] {
                    sum[i][j] += v;
                    count[i][j] += 1;
                }
            }
        }
    }
    let values = (0..n)
        .map(|i| (0..n).map(|j| (count[i][j] > 0).then(|| sum[i][j] / count[i][j] as f64)).collect())
        .collect();
    CorrelationMatrix { names: names.to_vec(), values }
}

/// Repeated random 80/20 sub-sampling of one lane's samples. All models
/// of a replicate share the same split.
pub fn bootstrap_evaluate(samples: &[ManeuverSample], factory: &dyn ModelFactory, config: &EvalConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let lane = crate::models::common_lane(samples)?;
    let labels = labels_of(samples);
    let n_lc = labels.iter().filter(|&&y| y).count();
    if n_lc == 0 || n_lc == labels.len() {
        return Err(Error::Dataset(format!("{lane:?} lane samples need both lane changes and lane keeping")));
    }
    let names = factory.names();
    let mut replicates = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(samples, &labels, factory, &names, config, r))
        .collect::<Result<Vec<_>>>()?;
    replicates.sort_by_key(|r| r.replicate);
    let ok: Vec<&ReplicateResult> = replicates.iter().filter(|r| !r.failed).collect();
    let models = names
        .iter()
        .enumerate()
        .map(|(k, name)| ModelSummary {
            model: name.clone(),
            test: TripleSummary::of(ok.iter().map(|r| &r.test[k])),
            train: TripleSummary::of(ok.iter().map(|r| &r.train[k])),
        })
        .collect();
    let error_correlation = mean_correlation(&names, &replicates);
    Ok(EvaluationReport {
        version: VERSION.to_string(),
        lane,
        horizon: samples[0].horizon,
        n_samples: samples.len(),
        n_lc,
        n_lk: samples.len() - n_lc,
        config: config.clone(),
        model_config: factory.config(),
        models,
        failed_replicates: replicates.len() - ok.len(),
        error_correlation,
        replicates,
    })
}

/// Samples of one lane.
pub fn lane_samples(samples: &[ManeuverSample], lane: Lane) -> Vec<ManeuverSample> {
    samples.iter().filter(|s| s.lane() == lane).cloned().collect()
}

/// Runs [`bootstrap_evaluate`] on each lane that has both classes.
pub fn evaluate_lanes(samples: &[ManeuverSample], factory: &dyn ModelFactory, config: &EvalConfig) -> Result<Vec<EvaluationReport>> {
    let mut out = Vec::new();
    for lane in [Lane::Right, Lane::Left] {
        let s = lane_samples(samples, lane);
        let lc = s.iter().filter(|x| x.is_lane_change()).count();
        if lc > 0 && lc < s.len() {
            out.push(bootstrap_evaluate(&s, factory, config)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Dataset("no lane has both lane changes and lane keeping".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// LK:LC ratio of the training set.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub phase: Phase,
    /// Sorted by false-positive rate, then true-positive rate.
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    fn new(phase: Phase, mut points: Vec<RocPoint>) -> RocCurve {
        points.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(a.tpr.total_cmp(&b.tpr)));
        RocCurve { phase, points }
    }

    /// Piecewise-linear TPR at `fpr`, through (0, 0) and (1, 1). At a
    /// repeated FPR the highest TPR counts.
    pub fn interpolate(&self, fpr: f64) -> f64 {
        let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        for p in &self.points {
            match pts.last_mut() {
                Some(last) if last.0 == p.fpr => last.1 = last.1.max(p.tpr),
                _ => pts.push((p.fpr, p.tpr)),
            }
        }
        if pts.last().map(|l| l.0) == Some(1.0) {
            let last = pts.last_mut().expect("nonempty");
            last.1 = last.1.max(1.0);
        } else {
            pts.push((1.0, 1.0));
        }
        let fpr = fpr.clamp(0.0, 1.0);
        let k = pts.partition_point(|p| p.0 < fpr);
        if k == 0 {
            return pts[0].1;
        }
        if pts[k].0 == fpr {
            return pts[k].1;
        }
        let (a, b) = (pts[k - 1], pts[k]);
        a.1 + (b.1 - a.1) * (fpr - a.0) / (b.0 - a.0)
    }

    /// Fraction of this curve's measured points lying on or above `other`'s
    /// interpolated curve.
    pub fn points_above(&self, other: &RocCurve) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let wins = self.points.iter().filter(|p| p.tpr >= other.interpolate(p.fpr) - 1e-12).count();
        wins as f64 / self.points.len() as f64
    }

    /// Fraction of `other`'s points at which this curve's interpolated TPR
    /// is at least as high.
    pub fn dominance_over(&self, other: &RocCurve) -> f64 {
        if other.points.is_empty() {
            return 1.0;
        }
        let wins = other.points.iter().filter(|p| self.interpolate(p.fpr) >= p.tpr - 1e-12).count();
        wins as f64 / other.points.len() as f64
    }
}

pub const DEFAULT_BALANCE_GRID: [f64; 7] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

/// Minimum training rows per class for a ROC point.
pub const MIN_ROC_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RocConfig {
    pub grid: Vec<f64>,
    pub split: f64,
    pub seed: u64,
}

impl Default for RocConfig {
    fn default() -> Self {
        RocConfig { grid: DEFAULT_BALANCE_GRID.to_vec(), split: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub version: String,
    pub lane: Lane,
    pub model: String,
    pub config: RocConfig,
    pub model_config: serde_json::Value,
    pub train: RocCurve,
    pub test: RocCurve,
    /// Ratios that left fewer than [`MIN_ROC_ROWS`] rows in a class.
    pub skipped: Vec<f64>,
}

impl RocReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Delimited `phase,ratio,fpr,tpr` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["model", "lane", "phase", "ratio", "fpr", "tpr"])?;
        for curve in [&self.train, &self.test] {
            for p in &curve.points {
                wtr.write_record([
                    self.model.clone(),
                    format!("{:?}", self.lane),
                    format!("{:?}", curve.phase).to_lowercase(),
                    p.ratio.to_string(),
                    p.fpr.to_string(),
                    p.tpr.to_string(),
                ])?;
            }
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Training rows with an LK:LC ratio as close to `ratio` as the available
/// rows allow; the majority side is undersampled.
fn ratio_rows(train: &[usize], labels: &[bool], ratio: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, usize, usize) {
    let (lc, lk): (Vec<usize>, Vec<usize>) = train.iter().partition(|&&i| labels[i]);
    let want_lk = (ratio * lc.len() as f64).round() as usize;
    let (n_lc, n_lk) = if want_lk <= lk.len() {
        (lc.len(), want_lk)
    } else {
        (((lk.len() as f64) / ratio).round() as usize, lk.len())
    };
    let mut rows = undersample(&lc, n_lc, rng);
    rows.extend(undersample(&lk, n_lk, rng));
    rows.sort_unstable();
    (rows, n_lc.min(lc.len()), n_lk)
}

/// Sweeps the LK:LC ratio of the training set on one fixed stratified
/// split of one lane's samples. The factory must yield a single model.
pub fn roc_sweep(samples: &[ManeuverSample], factory: &dyn ModelFactory, config: &RocConfig) -> Result<RocReport> {
    let lane = crate::models::common_lane(samples)?;
    let names = factory.names();
    if names.len() != 1 {
        return Err(Error::Config(format!("a ROC sweep takes one model, got {}", names.len())));
    }
    if config.grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Config("balance ratios must be positive".into()));
    }
    let labels = labels_of(samples);
    let split_cfg = EvalConfig { split: config.split, ..EvalConfig::default() };
    split_cfg.validate()?;
    let (train, test) = split_rows(&labels, &split_cfg, &mut substream(config.seed, 0, 0));
    if test.is_empty() {
        return Err(Error::Dataset("empty test split".into()));
    }
    let test_s = pick(samples, &test);
    let test_y = labels_of(&test_s);
    let results = config
        .grid
        .par_iter()
        .enumerate()
        .map(|(k, &ratio)| {
            let mut rng = substream(config.seed, k + 1, 0);
            let (rows, n_lc, n_lk) = ratio_rows(&train, &labels, ratio, &mut rng);
            if n_lc < MIN_ROC_ROWS || n_lk < MIN_ROC_ROWS {
                return Ok(None);
            }
            let train_s = pick(samples, &rows);
            let model = factory.fit(&train_s, rng.gen())?.into_iter().next().ok_or_else(|| Error::Config("factory fitted no model".into()))?;
            let mut tie = ChaCha8Rng::seed_from_u64(rng.gen());
            let tr = error_triple(&model.predict(&train_s, &mut tie)?, &labels_of(&train_s))?;
            let te = error_triple(&model.predict(&test_s, &mut tie)?, &test_y)?;
            Ok(Some((RocPoint { fpr: tr.fpr(), tpr: tr.tpr(), ratio }, RocPoint { fpr: te.fpr(), tpr: te.tpr(), ratio })))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut skipped = Vec::new();
    let mut train_pts = Vec::new();
    let mut test_pts = Vec::new();
    for (r, &ratio) in results.into_iter().zip(&config.grid) {
        match r {
            Some((a, b)) => {
                train_pts.push(a);
                test_pts.push(b);
            }
            None => skipped.push(ratio),
        }
    }
    Ok(RocReport {
        version: VERSION.to_string(),
        lane,
        model: names[0].clone(),
        config: config.clone(),
        model_config: factory.config(),
        train: RocCurve::new(Phase::Train, train_pts),
        test: RocCurve::new(Phase::Test, test_pts),
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub version: String,
    pub taus: Vec<f64>,
    pub feature_spec: FeatureSpec,
    /// One report per (τ, lane) with both classes present, τ-major.
    pub reports: Vec<EvaluationReport>,
    /// `(τ, lane)` pairs skipped for lack of one class.
    pub skipped: Vec<(f64, Lane)>,
}

impl HorizonReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_table(&self) -> String {
        self.reports.iter().map(EvaluationReport::to_table).collect::<Vec<_>>().join("\n")
    }
}

/// Re-extracts samples at every horizon and evaluates each lane.
pub fn horizon_sweep(
    recording: &Recording,
    taus: &[f64],
    spec: &FeatureSpec,
    factory: &dyn ModelFactory,
    config: &EvalConfig,
) -> Result<HorizonReport> {
    if taus.is_empty() {
        return Err(Error::Config("empty horizon grid".into()));
    }
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for &tau in taus {
        let spec = FeatureSpec { horizon: tau, ..spec.clone() };
        let samples = extract_samples(recording, &spec)?.samples;
        for lane in [Lane::Right, Lane::Left] {
            let s = lane_samples(&samples, lane);
            let lc = s.iter().filter(|x| x.is_lane_change()).count();
            if lc == 0 || lc == s.len() {
                skipped.push((tau, lane));
                continue;
            }
            reports.push(bootstrap_evaluate(&s, factory, config)?);
        }
    }
    Ok(HorizonReport { version: VERSION.to_string(), taus: taus.to_vec(), feature_spec: spec.clone(), reports, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub maneuver: Maneuver,
    pub count: usize,
    pub percent: f64,
    pub mean_v_x: f64,
    /// Over samples with a predecessor; `None` if there is none.
    pub mean_dx_p: Option<f64>,
    pub mean_t_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub variables: Vec<String>,
    /// Eigenvalues of the correlation matrix divided by their sum, descending.
    pub explained: Vec<f64>,
    /// Unit eigenvectors of the first two components (`components[k][j]`
    /// loads variable `j`); signs make the largest entry positive.
    pub components: Vec<Vec<f64>>,
    /// Correlation of each variable with the first two components.
    pub circle: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRow {
    pub variable: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub odds_ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub n: usize,
    pub subset: FeatureSubset,
    pub frequency: Vec<FrequencyRow>,
    /// Lane-change indicator against `v_x`, spacings and speed differences.
    pub correlation: CorrelationMatrix,
    pub pca: Option<Pca>,
    pub odds: Vec<OddsRow>,
    pub notes: Vec<String>,
}

fn frequency_table(samples: &[ManeuverSample]) -> Vec<FrequencyRow> {
    Maneuver::ALL
        .into_iter()
        .filter_map(|m| {
            let rows: Vec<&ManeuverSample> = samples.iter().filter(|s| s.maneuver == m).collect();
            if rows.is_empty() {
                return None;
            }
            let with_p: Vec<&&ManeuverSample> = rows.iter().filter(|s| s.predecessor().present).collect();
            let avg = |f: &dyn Fn(&ManeuverSample) -> f64| {
                (!with_p.is_empty()).then(|| with_p.iter().map(|s| f(s)).sum::<f64>() / with_p.len() as f64)
            };
            Some(FrequencyRow {
                maneuver: m,
                count: rows.len(),
                percent: 100.0 * rows.len() as f64 / samples.len() as f64,
                mean_v_x: rows.iter().map(|s| s.v_x).sum::<f64>() / rows.len() as f64,
                mean_dx_p: avg(&|s| s.predecessor().spacing),
                mean_t_p: avg(&|s| s.predecessor().time_gap),
            })
        })
        .collect()
}

fn is_constant(col: &[f64]) -> bool {
    col.iter().any(|v| !v.is_finite()) || col.windows(2).all(|w| w[0] == w[1])
}

fn columns(rows: &[Vec<f64>], p: usize) -> Vec<Vec<f64>> {
    (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

fn correlation_of(names: Vec<String>, cols: &[Vec<f64>]) -> CorrelationMatrix {
    let n = cols.len();
    let values = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Some(1.0) } else { pearson(&cols[i], &cols[j]) }).collect())
        .collect();
    CorrelationMatrix { names, values }
}

/// PCA of the correlation matrix of the given columns.
pub fn pca(variables: Vec<String>, cols: &[Vec<f64>]) -> Option<Pca> {
    let p = cols.len();
    if p == 0 {
        return None;
    }
    let corr = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { pearson(&cols[i], &cols[j]).unwrap_or(0.0) });
    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let sum: f64 = values.iter().sum();
    let explained = values.iter().map(|v| v / sum).collect();
    let components: Vec<Vec<f64>> = order
        .iter()
        .take(2)
        .map(|&k| {
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let big = v.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v
            }
        })
        .collect();
    let circle = (0..p)
        .map(|j| {
            let mut c = [0.0; 2];
            for (k, comp) in components.iter().enumerate() {
                c[k] = comp[j] * values[k].sqrt();
            }
            c
        })
        .collect();
    Some(Pca { variables, explained, components, circle })
}

/// Frequency table, indicator correlations, correlation PCA and logistic
/// odds ratios with 95% Wald intervals.
pub fn describe(samples: &[ManeuverSample], subset: FeatureSubset) -> Result<Description> {
    if samples.is_empty() {
        return Err(Error::Dataset("nothing to describe".into()));
    }
    let mut notes = Vec::new();
    let frequency = frequency_table(samples);

    let mut corr_names = vec!["LC".to_string(), "v_x".to_string()];
    let mut corr_cols = vec![
        samples.iter().map(|s| if s.is_lane_change() { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
        samples.iter().map(|s| s.v_x).collect(),
    ];
    for (k, name) in NEIGHBOR_NAMES.iter().enumerate() {
        corr_names.push(format!("dx_{name}"));
        corr_cols.push(samples.iter().map(|s| s.neighbors[k].spacing).collect());
    }
    for (k, name) in NEIGHBOR_NAMES.iter().enumerate() {
        corr_names.push(format!("dv_{name}"));
        corr_cols.push(samples.iter().map(|s| s.neighbors[k].speed_diff).collect());
    }
    let (corr_names, corr_cols): (Vec<String>, Vec<Vec<f64>>) = corr_names
        .into_iter()
        .zip(corr_cols)
        .filter(|(name, col)| {
            let keep = !is_constant(col);
            if !keep {
                notes.push(format!("{name} is constant and left out of the correlation matrix"));
            }
            keep
        })
        .unzip();
    let correlation = correlation_of(corr_names, &corr_cols);

    let names = feature_names(subset);
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features(subset)).collect();
    let (kept_names, kept_idx): (Vec<String>, Vec<usize>) = columns(&rows, names.len())
        .iter()
        .enumerate()
        .filter(|(j, col)| {
            let keep = !is_constant(col);
            if !keep {
                notes.push(format!("{} is constant and left out of the PCA and odds ratios", names[*j]));
            }
            keep
        })
        .map(|(j, _)| (names[j].clone(), j))
        .unzip();
    let kept_rows: Vec<Vec<f64>> = rows.iter().map(|r| kept_idx.iter().map(|&j| r[j]).collect()).collect();
    let pca = pca(kept_names.clone(), &columns(&kept_rows, kept_idx.len()));

    let labels = labels_of(samples);
    let mut odds = Vec::new();
    if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
        notes.push("odds ratios need both lane changes and lane keeping".into());
    } else if !kept_idx.is_empty() {
        let data = Dataset::new(kept_rows, labels)?;
        let model = train_logistic(&data, &LogisticConfig { standardize: false, ..LogisticConfig::default() })?;
        if !model.converged {
            notes.push("logistic fit did not converge; odds ratios are unreliable".into());
        }
        match &model.std_errors {
            Some(se) => {
                let vars = std::iter::once("intercept".to_string()).chain(kept_names);
                for ((variable, &b), &s) in vars.zip(&model.coefficients).zip(se) {
                    odds.push(OddsRow {
                        variable,
                        coefficient: b,
                        std_error: s,
                        odds_ratio: b.exp(),
                        lower: (b - 1.96 * s).exp(),
                        upper: (b + 1.96 * s).exp(),
                    });
                }
            }
            None => notes.push("singular information matrix; no standard errors".into()),
        }
    }
    Ok(Description { n: samples.len(), subset, frequency, correlation, pca, odds, notes })
}
