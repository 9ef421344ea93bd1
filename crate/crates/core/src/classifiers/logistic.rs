use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Dataset, Standardizer};
use crate::linalg::{sigmoid, softplus, solve_spd};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Ridge penalty on the slopes (not the intercept).
    pub ridge: f64,
    pub max_iter: usize,
    pub tolerance: f64,
    /// Fit on z-scored features. Turn off to read coefficients in raw units.
    pub standardize: bool,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { ridge: 1e-6, max_iter: 100, tolerance: 1e-8, standardize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub standardizer: Option<Standardizer>,
    /// `[intercept, slopes...]` in the (possibly standardized) fitting space.
    pub coefficients: Vec<f64>,
    /// Standard errors from the inverse observed information, same space.
    pub std_errors: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    fn linear(&self, x: &[f64]) -> f64 {
        let z = match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        };
        self.coefficients[0] + self.coefficients[1..].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear(x))
    }

    /// Intercept and slopes in raw feature units.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        match &self.standardizer {
            None => self.coefficients.clone(),
            Some(s) => {
                let slopes: Vec<f64> =
                    self.coefficients[1..].iter().zip(&s.scale).map(|(a, sd)| a / sd).collect();
                let shift: f64 = slopes.iter().zip(&s.mean).map(|(a, m)| a * m).sum();
                std::iter::once(self.coefficients[0] - shift).chain(slopes).collect()
            }
        }
    }
}

/// Log-likelihood of `[intercept, slopes...]` on raw rows.
pub fn log_likelihood(coefficients: &[f64], data: &Dataset) -> f64 {
    data.x
        .iter()
        .zip(&data.y)
        .map(|(x, &y)| {
            let z = coefficients[0] + coefficients[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            if y {
                -softplus(-z)
            } else {
                -softplus(z)
            }
        })
        .sum()
}

fn design(data: &Dataset) -> DMatrix<f64> {
    let (n, p) = (data.len(), data.arity());
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { data.x[i][j - 1] })
}

fn penalty(p: usize, ridge: f64) -> DVector<f64> {
    DVector::from_fn(p + 1, |j, _| if j == 0 { 0.0 } else { ridge })
}

/// Gradient and negative Hessian of the penalized log-likelihood.
fn derivatives(x: &DMatrix<f64>, y: &[bool], beta: &DVector<f64>, pen: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eta = x * beta;
    let k = beta.len();
    let mut grad = DVector::zeros(k);
    let mut info = DMatrix::zeros(k, k);
    for i in 0..x.nrows() {
        let p = sigmoid(eta[i]);
        let r = if y[i] { 1.0 } else { 0.0 } - p;
        let w = p * (1.0 - p);
        let row = x.row(i);
        for a in 0..k {
            grad[a] += r * row[a];
            for b in 0..=a {
                info[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
        grad[a] -= pen[a] * beta[a];
        info[(a, a)] += pen[a];
    }
    (grad, info)
}

fn penalized_ll(x: &DMatrix<f64>, y: &[bool], beta: &DVector<f64>, pen: &DVector<f64>) -> f64 {
    let eta = x * beta;
    let ll: f64 = eta.iter().zip(y).map(|(&z, &y)| if y { -softplus(-z) } else { -softplus(z) }).sum();
    ll - 0.5 * beta.iter().zip(pen.iter()).map(|(b, l)| l * b * b).sum::<f64>()
}

/// Maximum likelihood by damped Newton (IRLS), falling back to gradient
/// ascent whenever the information matrix is not positive definite.
pub fn train_logistic(data: &Dataset, config: &LogisticConfig) -> Result<LogisticModel> {
    let standardizer = config.standardize.then(|| Standardizer::fit(data));
    let fit_data = match &standardizer {
        Some(s) => s.apply_all(data),
        None => data.clone(),
    };
    let x = design(&fit_data);
    let y = &fit_data.y;
    let pen = penalty(data.arity(), config.ridge);
    let mut beta = DVector::zeros(x.ncols());
    let mut objective = penalized_ll(&x, y, &beta, &pen);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..config.max_iter {
        iterations = it + 1;
        let (grad, info) = derivatives(&x, y, &beta, &pen);
        let direction = solve_spd(&info, &grad).unwrap_or_else(|| grad.clone() / x.nrows() as f64);
        let mut step = 1.0;
        let mut next = &beta + &direction * step;
        let mut next_obj = penalized_ll(&x, y, &next, &pen);
        while next_obj < objective && step > 1e-10 {
            step *= 0.5;
            next = &beta + &direction * step;
            next_obj = penalized_ll(&x, y, &next, &pen);
        }
        let change = (&next - &beta).amax();
        if next_obj >= objective {
            beta = next;
            objective = next_obj;
        }
        if change < config.tolerance || step <= 1e-10 {
            converged = true;
            break;
        }
    }
    let (_, info) = derivatives(&x, y, &beta, &pen);
    let std_errors = info
        .try_inverse()
        .map(|cov| (0..cov.nrows()).map(|j| cov[(j, j)].max(0.0).sqrt()).collect());
    Ok(LogisticModel {
        standardizer,
        coefficients: beta.iter().copied().collect(),
        std_errors,
        converged,
        iterations,
    })
}
