use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Standardizer};
use crate::linalg::{sigmoid, softplus};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnConfig {
    pub hidden: usize,
    /// BFGS iterations.
    pub max_iter: usize,
    /// Stop once the gradient's largest entry falls below this.
    pub tolerance: f64,
    /// Weight decay: `decay · ‖w‖² / 2` is added to the mean cross-entropy.
    pub decay: f64,
    /// Independent initializations; the lowest final loss wins.
    pub starts: usize,
    pub seed: u64,
}

impl Default for AnnConfig {
    fn default() -> Self {
        AnnConfig { hidden: 2, max_iter: 200, tolerance: 1e-6, decay: 1e-4, starts: 3, seed: 0 }
    }
}

/// One hidden sigmoid layer; flat parameter layout
/// `[w1 (h×p, row-major), b1 (h), w2 (h), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    pub standardizer: Standardizer,
    pub inputs: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

fn forward(params: &[f64], p: usize, h: usize, z: &[f64], hidden_out: &mut [f64]) -> f64 {
    let (w1, rest) = params.split_at(h * p);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(h);
    let mut out = b2[0];
    for k in 0..h {
        let a = b1[k] + w1[k * p..(k + 1) * p].iter().zip(z).map(|(w, x)| w * x).sum::<f64>();
        hidden_out[k] = sigmoid(a);
        out += w2[k] * hidden_out[k];
    }
    out
}

/// Mean cross-entropy and its gradient for standardized rows.
pub fn loss_and_gradient(params: &[f64], p: usize, h: usize, data: &Dataset) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut act = vec![0.0; h];
    let n = data.len() as f64;
    for (z, &y) in data.x.iter().zip(&data.y) {
        let logit = forward(params, p, h, z, &mut act);
        loss += if y { softplus(-logit) } else { softplus(logit) };
        let delta = (sigmoid(logit) - if y { 1.0 } else { 0.0 }) / n;
        let w2 = h * p + h;
        grad[w2 + h] += delta;
        for k in 0..h {
            grad[w2 + k] += delta * act[k];
            let dh = delta * params[w2 + k] * act[k] * (1.0 - act[k]);
            grad[h * p + k] += dh;
            for j in 0..p {
                grad[k * p + j] += dh * z[j];
            }
        }
    }
    (loss / n, grad)
}

impl AnnModel {
    pub fn output(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        let mut act = vec![0.0; self.hidden];
        sigmoid(forward(&self.params, self.inputs, self.hidden, &z, &mut act))
    }
}

/// Full-batch BFGS on the mean cross-entropy from seeded uniform
/// initializations, with a backtracking (Armijo) line search.
pub fn train_ann(data: &Dataset, config: &AnnConfig) -> Result<AnnModel> {
    let standardizer = Standardizer::fit(data);
    let z = standardizer.apply_all(data);
    let (p, h) = (z.arity(), config.hidden.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = h * p + 2 * h + 1;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..config.starts.max(1) {
        let init: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let (loss, params) = bfgs(init, p, h, &z, config)?;
        if best.as_ref().map_or(true, |(l, _)| loss < *l) {
            best = Some((loss, params));
        }
    }
    let params = best.expect("at least one start").1;
    Ok(AnnModel { standardizer, inputs: p, hidden: h, params })
}

/// Returns the final penalized loss and weights.
fn bfgs(init: Vec<f64>, p: usize, h: usize, z: &Dataset, config: &AnnConfig) -> Result<(f64, Vec<f64>)> {
    let k = init.len();
    let mut w = DVector::from_vec(init);
    let eval = |w: &DVector<f64>| {
        let (l, g) = loss_and_gradient(w.as_slice(), p, h, z);
        (l + 0.5 * config.decay * w.norm_squared(), DVector::from_vec(g) + w * config.decay)
    };
    let (mut loss, mut grad) = eval(&w);
    let mut inv = DMatrix::<f64>::identity(k, k);
    for _ in 0..config.max_iter {
        if !loss.is_finite() {
            return Err(Error::Diverged("ANN loss is not finite".into()));
        }
        if grad.amax() < config.tolerance {
            break;
        }
        let mut dir = -(&inv * &grad);
        let mut slope = grad.dot(&dir);
        if slope >= 0.0 {
            inv = DMatrix::identity(k, k);
            dir = -grad.clone();
            slope = grad.dot(&dir);
        }
        let mut step = 1.0;
        let (next, next_loss, next_grad) = loop {
            let cand = &w + &dir * step;
            let (l, g) = eval(&cand);
            if l.is_finite() && l <= loss + 1e-4 * step * slope {
                break (cand, l, g);
            }
            step *= 0.5;
            if step < 1e-12 {
                return Ok((loss, w.iter().copied().collect()));
            }
        };
        let s = &next - &w;
        let y = &next_grad - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let iy = &inv * &y;
            let yiy = y.dot(&iy);
            // H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ, expanded
            inv += (&s * s.transpose()) * (rho * (1.0 + rho * yiy)) - (&iy * s.transpose() + &s * iy.transpose()) * rho;
        }
        w = next;
        loss = next_loss;
        grad = next_grad;
    }
    Ok((loss, w.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::blobs;
    use super::*;

    #[test]
    fn zero_weights_score_half() {
        let d = blobs(30, 3, 1.0, 1);
        let m = AnnModel { standardizer: Standardizer::fit(&d), inputs: 3, hidden: 2, params: vec![0.0; 11] };
        for x in &d.x {
            assert_eq!(m.output(x), 0.5);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = blobs(6, 3, 1.0, 2);
        let z = Standardizer::fit(&d).apply_all(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params: Vec<f64> = (0..11).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = loss_and_gradient(&params, 3, 2, &z);
        let step = 1e-5;
        for i in 0..params.len() {
            let mut up = params.clone();
            let mut dn = params.clone();
            up[i] += step;
            dn[i] -= step;
            let fd = (loss_and_gradient(&up, 3, 2, &z).0 - loss_and_gradient(&dn, 3, 2, &z).0) / (2.0 * step);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: fd {fd} analytic {}", grad[i]);
        }
    }

    #[test]
    fn training_lowers_the_loss() {
        let d = blobs(200, 3, 1.0, 3);
        let m = train_ann(&d, &AnnConfig::default()).unwrap();
        let z = m.standardizer.apply_all(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let init: Vec<f64> = (0..m.params.len()).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        assert!(loss_and_gradient(&m.params, 3, 2, &z).0 < loss_and_gradient(&init, 3, 2, &z).0 - 0.1);
    }

    #[test]
    fn learns_xor_for_some_seed() {
        let d = Dataset::new(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![false, true, true, false],
        )
        .unwrap();
        let solved = (0..5).any(|seed| {
            let cfg = AnnConfig { seed, ..Default::default() };
            let m = train_ann(&d, &cfg).unwrap();
            d.x.iter().zip(&d.y).all(|(x, &y)| (m.output(x) > 0.5) == y)
        });
        assert!(solved);
    }
}
