use serde::{Deserialize, Serialize};

use super::{Dataset, Standardizer};
use crate::linalg::{sigmoid, softplus};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 1.0, epochs: 200 }
    }
}

/// Linear soft-margin SVM on standardized features with a Platt-scaled score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Platt scaling: `score = σ(a·margin + b)`.
    pub platt: [f64; 2],
}

impl SvmModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        self.weights.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.platt[0] * self.margin(x) + self.platt[1])
    }
}

/// `½‖w‖² + C Σ max(0, 1 − yᵢ(w·xᵢ + b))` on already standardized rows.
pub fn primal_objective(w: &[f64], b: f64, c: f64, data: &Dataset) -> f64 {
    let hinge: f64 = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, &y)| {
            let s = if y { 1.0 } else { -1.0 };
            (1.0 - s * (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)).max(0.0)
        })
        .sum();
    0.5 * w.iter().map(|a| a * a).sum::<f64>() + c * hinge
}

/// Stochastic sub-gradient descent in epoch order with step `1/(λt)`,
/// `λ = 1/(Cn)`. The bias is unregularized. The best of the end-of-epoch
/// and epoch-averaged iterates (by primal objective) is kept.
pub fn train_svm(data: &Dataset, config: &SvmConfig) -> Result<SvmModel> {
    let standardizer = Standardizer::fit(data);
    let z = standardizer.apply_all(data);
    let p = z.arity();
    let n = z.len();
    if !z.has_both_classes() {
        let sign = if z.y.first().copied().unwrap_or(false) { 1.0 } else { -1.0 };
        return Ok(SvmModel { standardizer, weights: vec![0.0; p], bias: sign, platt: [0.0, 40.0 * sign] });
    }
    let lambda = 1.0 / (config.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut best = (primal_objective(&w, b, config.c, &z), w.clone(), b);
    let mut t = 0usize;
    for _ in 0..config.epochs {
        let mut avg_w = vec![0.0; p];
        let mut avg_b = 0.0;
        for (x, &y) in z.x.iter().zip(&z.y) {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let s = if y { 1.0 } else { -1.0 };
            let m = s * (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|a| *a *= shrink);
            if m < 1.0 {
                for (a, v) in w.iter_mut().zip(x) {
                    *a += eta * s * v;
                }
                b += eta * s;
            }
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > radius {
                w.iter_mut().for_each(|a| *a *= radius / norm);
            }
            for (acc, a) in avg_w.iter_mut().zip(&w) {
                *acc += a / n as f64;
            }
            avg_b += b / n as f64;
        }
        for (cw, cb) in [(&w, b), (&avg_w, avg_b)] {
            let obj = primal_objective(cw, cb, config.c, &z);
            if obj < best.0 {
                best = (obj, cw.clone(), cb);
            }
        }
    }
    let (_, weights, bias) = best;
    let mut model = SvmModel { standardizer, weights, bias, platt: [1.0, 0.0] };
    let margins: Vec<f64> = data.x.iter().map(|x| model.margin(x)).collect();
    model.platt = fit_platt(&margins, &data.y);
    Ok(model)
}

/// Platt's sigmoid fit with smoothed targets, by damped Newton.
fn fit_platt(margins: &[f64], labels: &[bool]) -> [f64; 2] {
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    let t_neg = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&y| if y { t_pos } else { t_neg }).collect();
    let loss = |a: f64, b: f64| -> f64 {
        margins
            .iter()
            .zip(&targets)
            .map(|(m, t)| {
                let z = a * m + b;
                t * softplus(-z) + (1.0 - t) * softplus(z)
            })
            .sum()
    };
    let (mut a, mut b) = (1.0, 0.0);
    let mut current = loss(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (m, t) in margins.iter().zip(&targets) {
            let p = sigmoid(a * m + b);
            let r = p - t;
            let w = p * (1.0 - p);
            ga += r * m;
            gb += r;
            haa += w * m * m;
            hab += w * m;
            hbb += w;
        }
        let det = haa * hbb - hab * hab;
        if det.abs() < 1e-300 {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (-hab * ga + haa * gb) / det;
        let mut step = 1.0;
        let mut next = loss(a - step * da, b - step * db);
        while next > current && step > 1e-10 {
            step *= 0.5;
            next = loss(a - step * da, b - step * db);
        }
        if next > current {
            break;
        }
        a -= step * da;
        b -= step * db;
        let done = (current - next).abs() < 1e-12 * (1.0 + current);
        current = next;
        if done {
            break;
        }
    }
    [a, b]
}
