//! Binary classifiers sharing one train / score / predict contract.
//!
//! Label `true` (1) is a lane change. Class-imbalance handling is left to the
//! evaluation code; nothing here reweights classes.

pub mod ann;
mod lda;
pub mod logistic;
mod naive_bayes;
pub mod svm;
mod tree;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureSubset, ManeuverSample};
use crate::{Error, Result};

pub use ann::{train_ann, AnnConfig, AnnModel};
pub use lda::{train_lda, LdaModel};
pub use logistic::{train_logistic, LogisticConfig, LogisticModel};
pub use naive_bayes::{train_nb, NaiveBayesConfig, NaiveBayesModel};
pub use svm::{train_svm, SvmConfig, SvmModel};
pub use tree::{best_split, train_tree, Split, TreeConfig, TreeModel, TreeNode};

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<bool>) -> Result<Dataset> {
        if x.len() != y.len() {
            return Err(Error::Dataset(format!("{} rows but {} labels", x.len(), y.len())));
        }
        let p = x.first().map_or(0, Vec::len);
        if let Some((i, _)) = x.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::Dataset(format!("row {i} has a different arity than row 0")));
        }
        if let Some(i) = x.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Dataset(format!("row {i} has a non-finite entry")));
        }
        Ok(Dataset { x, y })
    }

    pub fn from_samples(samples: &[ManeuverSample], subset: FeatureSubset) -> Result<Dataset> {
        Dataset::new(
            samples.iter().map(|s| s.features(subset)).collect(),
            samples.iter().map(ManeuverSample::is_lane_change).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&y| y).count()
    }

    /// Training precondition: at least two rows.
    pub fn check_trainable(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::Dataset(format!("need at least 2 rows, got {}", self.len())));
        }
        Ok(())
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.positives();
        pos > 0 && pos < self.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// Z-score statistics captured at training time. Zero-variance features
/// get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Standardizer {
        let p = data.arity();
        let n = data.len() as f64;
        let mut mean = vec![0.0; p];
        for row in &data.x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for row in &data.x {
            for j in 0..p {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 * (1.0 + s) && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn apply_all(&self, data: &Dataset) -> Dataset {
        Dataset {
            x: data.x.iter().map(|r| self.apply(r)).collect(),
            y: data.y.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "LR")]
    Logistic,
    #[serde(rename = "LDA")]
    Lda,
    #[serde(rename = "NB")]
    NaiveBayes,
    #[serde(rename = "DT")]
    Tree,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "ANN")]
    Ann,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::Logistic,
        ClassifierKind::Lda,
        ClassifierKind::Tree,
        ClassifierKind::Svm,
        ClassifierKind::NaiveBayes,
        ClassifierKind::Ann,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "LR",
            ClassifierKind::Lda => "LDA",
            ClassifierKind::NaiveBayes => "NB",
            ClassifierKind::Tree => "DT",
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Ann => "ANN",
        }
    }

    /// Kinds whose score is a calibrated probability.
    pub fn is_probabilistic(self) -> bool {
        matches!(self, ClassifierKind::Logistic | ClassifierKind::NaiveBayes | ClassifierKind::Ann)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown classifier {s:?}")))
    }
}

/// Hyperparameters for every classifier kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainConfig {
    pub logistic: LogisticConfig,
    pub naive_bayes: NaiveBayesConfig,
    pub tree: TreeConfig,
    pub svm: SvmConfig,
    pub ann: AnnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelParams {
    #[serde(rename = "LR")]
    Logistic(LogisticModel),
    #[serde(rename = "LDA")]
    Lda(LdaModel),
    #[serde(rename = "NB")]
    NaiveBayes(NaiveBayesModel),
    #[serde(rename = "DT")]
    Tree(TreeModel),
    #[serde(rename = "SVM")]
    Svm(SvmModel),
    #[serde(rename = "ANN")]
    Ann(AnnModel),
}

/// A fitted classifier. Immutable and shareable across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub arity: usize,
    /// Decision threshold on the score.
    pub threshold: f64,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.params {
            ModelParams::Logistic(_) => ClassifierKind::Logistic,
            ModelParams::Lda(_) => ClassifierKind::Lda,
            ModelParams::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            ModelParams::Tree(_) => ClassifierKind::Tree,
            ModelParams::Svm(_) => ClassifierKind::Svm,
            ModelParams::Ann(_) => ClassifierKind::Ann,
        }
    }

    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, got: x.len() });
        }
        Ok(())
    }

    /// Score in `[0, 1]`; higher means more likely a lane change.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_arity(x)?;
        Ok(match &self.params {
            ModelParams::Logistic(m) => m.probability(x),
            ModelParams::Lda(m) => m.probability(x),
            ModelParams::NaiveBayes(m) => m.posterior(x),
            ModelParams::Tree(m) => m.leaf_score(x),
            ModelParams::Svm(m) => m.probability(x),
            ModelParams::Ann(m) => m.output(x),
        })
    }

    /// Lane change (true) or lane keep. The SVM decides by the sign of its
    /// margin; the LDA by the sign of its discriminant at the default
    /// threshold; every other kind by `score > threshold`.
    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        self.check_arity(x)?;
        let default = self.threshold == 0.5;
        Ok(match &self.params {
            ModelParams::Svm(m) => m.margin(x) > 0.0,
            ModelParams::Lda(m) if default => m.discriminant(x) > 0.0,
            _ => self.score(x)? > self.threshold,
        })
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<bool>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn with_threshold(mut self, threshold: f64) -> TrainedModel {
        self.threshold = threshold;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let env = Envelope {
            format: "lanechange-model".into(),
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&env)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let env: Envelope = serde_json::from_str(text)?;
        if env.format != "lanechange-model" || env.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!("{} v{}", env.format, env.version)));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
        TrainedModel::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Trains one classifier kind with its configuration.
pub fn train(kind: ClassifierKind, data: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    data.check_trainable()?;
    let params = match kind {
        ClassifierKind::Logistic => ModelParams::Logistic(train_logistic(data, &config.logistic)?),
        ClassifierKind::Lda => ModelParams::Lda(train_lda(data)?),
        ClassifierKind::NaiveBayes => ModelParams::NaiveBayes(train_nb(data, &config.naive_bayes)?),
        ClassifierKind::Tree => ModelParams::Tree(train_tree(data, &config.tree)?),
        ClassifierKind::Svm => ModelParams::Svm(train_svm(data, &config.svm)?),
        ClassifierKind::Ann => ModelParams::Ann(train_ann(data, &config.ann)?),
    };
    Ok(TrainedModel { arity: data.arity(), threshold: 0.5, params })
}

/// Fraction of misclassified rows.
pub fn training_error(model: &TrainedModel, data: &Dataset) -> Result<f64> {
    let wrong = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, &y)| model.predict(x).map(|p| p != y))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&w| w)
        .count();
    Ok(wrong as f64 / data.len().max(1) as f64)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::Dataset;

    /// Two Gaussian blobs with shared identity covariance.
    pub fn blobs(n: usize, p: usize, shift: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = i % 3 == 0;
            let row = (0..p)
                .map(|j| normal.sample(&mut rng) + if label { shift / (j + 1) as f64 } else { 0.0 })
                .collect();
            x.push(row);
            y.push(label);
        }
        Dataset::new(x, y).unwrap()
    }

    pub fn uniform_rows(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect()
    }
}
