use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::linalg::{sigmoid, solve_spd};
use crate::{Error, Result};

const JITTER: f64 = 1e-8;

/// Two-class linear discriminant with pooled covariance, in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub direction: Vec<f64>,
    pub offset: f64,
}

impl LdaModel {
    /// `D(x) = w·x + offset`; positive means lane change.
    pub fn discriminant(&self, x: &[f64]) -> f64 {
        self.direction.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }

    /// Posterior under the shared-Gaussian model.
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.discriminant(x))
    }
}

pub fn train_lda(data: &Dataset) -> Result<LdaModel> {
    let p = data.arity();
    let mut means = [DVector::<f64>::zeros(p), DVector::zeros(p)];
    let mut counts = [0usize; 2];
    for (x, &y) in data.x.iter().zip(&data.y) {
        let k = y as usize;
        counts[k] += 1;
        means[k] += DVector::from_column_slice(x);
    }
    if counts.contains(&0) {
        // one class only: a constant discriminant
        let sign = if counts[1] > 0 { 1.0 } else { -1.0 };
        return Ok(LdaModel { direction: vec![0.0; p], offset: sign * 40.0 });
    }
    for k in 0..2 {
        means[k] /= counts[k] as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for (x, &y) in data.x.iter().zip(&data.y) {
        let d = DVector::from_column_slice(x) - &means[y as usize];
        cov += &d * d.transpose();
    }
    cov /= (data.len().saturating_sub(2)).max(1) as f64;
    for j in 0..p {
        cov[(j, j)] += JITTER;
    }
    let diff = &means[1] - &means[0];
    let w = solve_spd(&cov, &diff).ok_or_else(|| {
        let degenerate: Vec<String> =
            (0..p).filter(|&j| cov[(j, j)] <= 2.0 * JITTER).map(|j| j.to_string()).collect();
        Error::DegenerateFeatures(format!("pooled covariance singular; suspect columns [{}]", degenerate.join(", ")))
    })?;
    let mid = (&means[0] + &means[1]) * 0.5;
    let prior = (counts[1] as f64 / counts[0] as f64).ln();
    Ok(LdaModel { direction: w.iter().copied().collect(), offset: prior - w.dot(&mid) })
}
