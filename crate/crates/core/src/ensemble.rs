//! Bagging rules and stacking meta-learners over the six base classifiers.
//!
//! Stacking is a plain two-step fit: the meta-learner sees the base
//! predictions on the very rows the bases were trained on. That leaks
//! training fit into the meta-learner and is kept on purpose, as the
//! straightforward reading of "inputs and the predictions of the six".

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train, training_error, ClassifierKind, Dataset, TrainConfig, TrainedModel};
use crate::linalg::pearson;
use crate::{Error, Result};

pub const N_BASES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnsembleKind {
    /// Lane change if at least one base says so.
    Max,
    /// Lane change if all bases say so.
    Min,
    /// Majority; ties are broken by a fair coin.
    Mean,
    /// Vote weighted by training accuracy.
    MeanStar,
    Stack(ClassifierKind),
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 10] = [
        EnsembleKind::Max,
        EnsembleKind::Min,
        EnsembleKind::Mean,
        EnsembleKind::MeanStar,
        EnsembleKind::Stack(ClassifierKind::Logistic),
        EnsembleKind::Stack(ClassifierKind::Lda),
        EnsembleKind::Stack(ClassifierKind::Tree),
        EnsembleKind::Stack(ClassifierKind::Svm),
        EnsembleKind::Stack(ClassifierKind::NaiveBayes),
        EnsembleKind::Stack(ClassifierKind::Ann),
    ];

    pub fn is_stacking(self) -> bool {
        matches!(self, EnsembleKind::Stack(_))
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleKind::Max => f.write_str("max"),
            EnsembleKind::Min => f.write_str("min"),
            EnsembleKind::Mean => f.write_str("mean"),
            EnsembleKind::MeanStar => f.write_str("mean*"),
            EnsembleKind::Stack(k) => write!(f, "stack-{k}"),
        }
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "max" => Ok(EnsembleKind::Max),
            "min" => Ok(EnsembleKind::Min),
            "mean" => Ok(EnsembleKind::Mean),
            "mean*" | "meanstar" => Ok(EnsembleKind::MeanStar),
            _ => match lower.strip_prefix("stack-") {
                Some(k) => Ok(EnsembleKind::Stack(k.parse()?)),
                None => Err(Error::Config(format!("unknown ensemble {s:?}"))),
            },
        }
    }
}

/// Combines six base predictions with a bagging rule. `weights` is only
/// read by `mean*`; `rng` only by `mean` on a 3–3 tie.
pub fn bag_predict<R: Rng>(kind: EnsembleKind, b: &[bool; N_BASES], weights: &[f64; N_BASES], rng: &mut R) -> Result<bool> {
    let votes = b.iter().filter(|&&v| v).count();
    Ok(match kind {
        EnsembleKind::Max => votes > 0,
        EnsembleKind::Min => votes == N_BASES,
        EnsembleKind::Mean => match votes.cmp(&(N_BASES / 2)) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => rng.gen::<bool>(),
        },
        EnsembleKind::MeanStar => b.iter().zip(weights).map(|(&v, w)| if v { *w } else { 0.0 }).sum::<f64>() > 0.5,
        EnsembleKind::Stack(_) => {
            return Err(Error::Config("stacking ensembles need the meta-learner, not bag_predict".into()))
        }
    })
}

/// Trains the six base classifiers in their canonical order.
pub fn train_bases(data: &Dataset, config: &TrainConfig) -> Result<Vec<TrainedModel>> {
    ClassifierKind::ALL.iter().map(|&k| train(k, data, config)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub kind: EnsembleKind,
    pub bases: Vec<TrainedModel>,
    /// `mean*` weights, proportional to training accuracy and summing to 1.
    pub weights: Option<[f64; N_BASES]>,
    /// Stacking meta-learner over `[x | b₁…b₆]`.
    pub meta: Option<TrainedModel>,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    ensemble: EnsembleModel,
}

fn check_bases(bases: &[TrainedModel], arity: usize) -> Result<()> {
    if bases.len() != N_BASES {
        return Err(Error::Config(format!("ensembles need exactly {N_BASES} base models, got {}", bases.len())));
    }
    if let Some(b) = bases.iter().find(|b| b.arity != arity) {
        return Err(Error::Arity { expected: arity, got: b.arity });
    }
    Ok(())
}

fn augment(x: &[f64], b: &[bool; N_BASES]) -> Vec<f64> {
    x.iter().copied().chain(b.iter().map(|&v| if v { 1.0 } else { 0.0 })).collect()
}

impl EnsembleModel {
    pub fn base_predictions(&self, x: &[f64]) -> Result<[bool; N_BASES]> {
        let mut out = [false; N_BASES];
        for (o, m) in out.iter_mut().zip(&self.bases) {
            *o = m.predict(x)?;
        }
        Ok(out)
    }

    /// Combined prediction given already computed base predictions.
    pub fn combine<R: Rng>(&self, x: &[f64], b: &[bool; N_BASES], rng: &mut R) -> Result<bool> {
        match (&self.kind, &self.meta) {
            (EnsembleKind::Stack(_), Some(meta)) => meta.predict(&augment(x, b)),
            (EnsembleKind::Stack(_), None) => Err(Error::Format("stacking ensemble without meta-learner".into())),
            (kind, _) => bag_predict(*kind, b, &self.weights.unwrap_or([1.0 / 6.0; N_BASES]), rng),
        }
    }

    pub fn predict<R: Rng>(&self, x: &[f64], rng: &mut R) -> Result<bool> {
        let b = self.base_predictions(x)?;
        self.combine(x, &b, rng)
    }

    pub fn to_json(&self) -> Result<String> {
        let env = Envelope { format: "lanechange-ensemble".into(), version: 1, ensemble: self.clone() };
        Ok(serde_json::to_string_pretty(&env)?)
    }

    pub fn from_json(text: &str) -> Result<EnsembleModel> {
        let env: Envelope = serde_json::from_str(text)?;
        if env.format != "lanechange-ensemble" || env.version != 1 {
            return Err(Error::Format(format!("{} v{}", env.format, env.version)));
        }
        Ok(env.ensemble)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EnsembleModel> {
        EnsembleModel::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `mean*` weights: `wᵢ ∝ 1 − training errorᵢ`, normalized. Uniform when
/// every base has zero accuracy.
pub fn accuracy_weights(data: &Dataset, bases: &[TrainedModel]) -> Result<[f64; N_BASES]> {
    check_bases(bases, data.arity())?;
    let mut w = [0.0; N_BASES];
    for (wi, m) in w.iter_mut().zip(bases) {
        *wi = 1.0 - training_error(m, data)?;
    }
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return Ok([1.0 / N_BASES as f64; N_BASES]);
    }
    Ok(w.map(|v| v / sum))
}

pub fn train_bagging(kind: EnsembleKind, data: &Dataset, bases: Vec<TrainedModel>) -> Result<EnsembleModel> {
    check_bases(&bases, data.arity())?;
    if kind.is_stacking() {
        return Err(Error::Config(format!("{kind} is not a bagging rule")));
    }
    let weights = if kind == EnsembleKind::MeanStar { Some(accuracy_weights(data, &bases)?) } else { None };
    Ok(EnsembleModel { kind, bases, weights, meta: None })
}

/// Fits the meta-learner on `[X | b₁…b₆]` with the base predictions made on
/// the same training rows.
pub fn train_stacking(
    meta_kind: ClassifierKind,
    data: &Dataset,
    bases: Vec<TrainedModel>,
    config: &TrainConfig,
) -> Result<EnsembleModel> {
    check_bases(&bases, data.arity())?;
    let mut rows = Vec::with_capacity(data.len());
    for x in &data.x {
        let mut b = [false; N_BASES];
        for (o, m) in b.iter_mut().zip(&bases) {
            *o = m.predict(x)?;
        }
        rows.push(augment(x, &b));
    }
    let augmented = Dataset::new(rows, data.y.clone())?;
    let meta = train(meta_kind, &augmented, config)?;
    Ok(EnsembleModel { kind: EnsembleKind::Stack(meta_kind), bases, weights: None, meta: Some(meta) })
}

pub fn train_ensemble(kind: EnsembleKind, data: &Dataset, bases: Vec<TrainedModel>, config: &TrainConfig) -> Result<EnsembleModel> {
    match kind {
        EnsembleKind::Stack(k) => train_stacking(k, data, bases, config),
        _ => train_bagging(kind, data, bases),
    }
}

/// Pearson correlations between per-sample error indicators; `None` where
/// an error vector is constant (except on the diagonal, which is 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    /// Mean of the defined off-diagonal entries.
    pub fn mean_off_diagonal(&self) -> Option<f64> {
        let n = self.names.len();
        let vals: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .filter_map(|(i, j)| self.values[i][j])
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Delimited table with a header row; absent entries are empty cells.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["model".to_string()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for (name, row) in self.names.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            wtr.write_record(&rec)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Correlation of the error indicators `[predᵢ ≠ y]` across models.
pub fn prediction_error_correlation(names: &[String], predictions: &[Vec<bool>], labels: &[bool]) -> Result<CorrelationMatrix> {
    if labels.len() < 2 {
        return Err(Error::Dataset(format!("need at least 2 test samples, got {}", labels.len())));
    }
    if names.len() != predictions.len() {
        return Err(Error::LengthMismatch(names.len(), predictions.len()));
    }
    let errors: Vec<Vec<f64>> = predictions
        .iter()
        .map(|p| {
            if p.len() != labels.len() {
                return Err(Error::LengthMismatch(p.len(), labels.len()));
            }
            Ok(p.iter().zip(labels).map(|(a, b)| if a != b { 1.0 } else { 0.0 }).collect())
        })
        .collect::<Result<_>>()?;
    let n = errors.len();
    let values = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Some(1.0) } else { pearson(&errors[i], &errors[j]) }).collect())
        .collect();
    Ok(CorrelationMatrix { names: names.to_vec(), values })
}
