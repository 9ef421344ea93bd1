use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::linalg::sigmoid;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesConfig {
    pub variance_floor: f64,
}

impl Default for NaiveBayesConfig {
    fn default() -> Self {
        NaiveBayesConfig { variance_floor: 1e-9 }
    }
}

/// Gaussian naive Bayes; index 0 is lane keep, 1 lane change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub counts: [usize; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

impl NaiveBayesModel {
    fn log_joint(&self, k: usize, x: &[f64]) -> f64 {
        let total = (self.counts[0] + self.counts[1]) as f64;
        let mut s = (self.counts[k] as f64 / total).ln();
        for ((v, m), var) in x.iter().zip(&self.means[k]).zip(&self.variances[k]) {
            s += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - m) * (v - m) / (2.0 * var);
        }
        s
    }

    /// Posterior probability of a lane change.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        match self.counts {
            [_, 0] => 0.0,
            [0, _] => 1.0,
            _ => sigmoid(self.log_joint(1, x) - self.log_joint(0, x)),
        }
    }
}

pub fn train_nb(data: &Dataset, config: &NaiveBayesConfig) -> Result<NaiveBayesModel> {
    let p = data.arity();
    let mut counts = [0usize; 2];
    let mut means = [vec![0.0; p], vec![0.0; p]];
    for (x, &y) in data.x.iter().zip(&data.y) {
        let k = y as usize;
        counts[k] += 1;
        for j in 0..p {
            means[k][j] += x[j];
        }
    }
    for k in 0..2 {
        if counts[k] > 0 {
            means[k].iter_mut().for_each(|m| *m /= counts[k] as f64);
        }
    }
    let mut variances = [vec![0.0; p], vec![0.0; p]];
    for (x, &y) in data.x.iter().zip(&data.y) {
        let k = y as usize;
        for j in 0..p {
            let d = x[j] - means[k][j];
            variances[k][j] += d * d;
        }
    }
    for k in 0..2 {
        let n = counts[k].max(1) as f64;
        variances[k].iter_mut().for_each(|v| *v = (*v / n).max(config.variance_floor));
    }
    Ok(NaiveBayesModel { counts, means, variances })
}
