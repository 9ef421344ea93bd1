//! Multi-start least-squares calibration of the seven IDM + MOBIL
//! parameters on one lane.
//!
//! The 0/1 objective `Σ (decide(x; θ) − y)²` is piecewise constant, so each
//! start minimizes a smoothed surrogate where both criteria pass through a
//! sigmoid of temperature κ (annealed over the configured schedule), using a
//! projected BFGS search in the unit box. Starts are ranked on the hard
//! objective; ties go to the lower start index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dual::{Dual, Scalar, N};
use super::{margins, mobil_decide_total, MobilInputs, MobilParams};
use crate::data::Lane;
use crate::features::ManeuverSample;
use crate::linalg::std_dev;
use crate::{Error, Result};

pub const PARAM_NAMES: [&str; 7] = ["v0", "T", "alpha", "beta", "length", "p", "b"];

/// α and β are floored here inside the search, where √(αβ) appears.
const MIN_ACCEL_PARAM: f64 = 1e-3;
const SIGMOID_CLIP: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBounds {
    pub lower: [f64; 7],
    pub upper: [f64; 7],
}

impl Default for CalibrationBounds {
    /// Tested ranges: v0 ∈ [20,80], T, α, β ∈ [0,5], ℓ ∈ [0,10], p ∈ [0,1],
    /// b ∈ [−4,4].
    fn default() -> Self {
        CalibrationBounds {
            lower: [20.0, 0.0, 0.0, 0.0, 0.0, 0.0, -4.0],
            upper: [80.0, 5.0, 5.0, 5.0, 10.0, 1.0, 4.0],
        }
    }
}

impl CalibrationBounds {
    pub fn point(p: &MobilParams) -> CalibrationBounds {
        let v = p.to_vector();
        CalibrationBounds { lower: v, upper: v }
    }

    fn validate(&self) -> Result<()> {
        for i in 0..7 {
            if !(self.lower[i] <= self.upper[i]) || !self.lower[i].is_finite() || !self.upper[i].is_finite() {
                return Err(Error::Config(format!(
                    "bounds for {} must satisfy lower <= upper, got [{}, {}]",
                    PARAM_NAMES[i], self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    fn span(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    fn to_params(&self, u: &[f64; 7]) -> [f64; 7] {
        std::array::from_fn(|i| self.lower[i] + u[i] * self.span(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub n_starts: usize,
    pub seed: u64,
    /// Sigmoid temperatures κ (m/s²), applied in order.
    pub temperatures: Vec<f64>,
    /// BFGS iterations per temperature.
    pub max_iter: usize,
    /// Margin δ (m/s²) of the squared-hinge polish run after the sigmoid
    /// schedule, followed by one more pass at the last temperature; 0 skips
    /// it. Saturated sigmoids give no gradient for badly misclassified
    /// samples; the hinge does.
    pub polish_margin: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            n_starts: 50,
            seed: 0,
            temperatures: vec![1.0, 0.1, 0.01],
            max_iter: 60,
            polish_margin: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartResult {
    pub start: usize,
    pub initial: [f64; 7],
    pub params: [f64; 7],
    /// Misclassified samples at `params`.
    pub hard_errors: usize,
    /// Surrogate value at the last temperature.
    pub surrogate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub lane: Lane,
    pub seed: u64,
    pub n_starts: usize,
    pub n_samples: usize,
    /// Hard least-squares objective: number of misclassified samples.
    pub objective: usize,
    pub error_rate: f64,
    pub params: MobilParams,
    /// Standard deviation of each parameter across starts.
    pub std_dev: [f64; 7],
    pub per_start: Vec<StartResult>,
}

impl CalibrationReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<CalibrationReport> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

struct Problem<'a> {
    inputs: &'a [MobilInputs],
    labels: &'a [bool],
    lane: Lane,
    bounds: CalibrationBounds,
}

fn sigmoid<S: Scalar>(z: S) -> S {
    let v = z.value();
    if v > SIGMOID_CLIP {
        S::cst(1.0)
    } else if v < -SIGMOID_CLIP {
        S::cst(0.0)
    } else {
        S::cst(1.0) / ((-z).exp() + 1.0)
    }
}

fn floor_accel_params<S: Scalar>(mut p: [S; 7]) -> [S; 7] {
    p[2] = p[2].max_f(MIN_ACCEL_PARAM);
    p[3] = p[3].max_f(MIN_ACCEL_PARAM);
    p
}

impl Problem<'_> {
    fn hard_errors(&self, theta: &[f64; 7]) -> usize {
        let params = MobilParams::from_vector(floor_accel_params(*theta));
        self.inputs
            .iter()
            .zip(self.labels)
            .filter(|(x, &y)| mobil_decide_total(x, &params, self.lane).is_change() != y)
            .count()
    }

    /// Mean squared surrogate error and its gradient in unit-box coordinates.
    fn surrogate(&self, u: &[f64; 7], kappa: f64) -> (f64, [f64; 7]) {
        let theta = self.bounds.to_params(u);
        let duals: [Dual; N] = floor_accel_params(std::array::from_fn(|i| Dual::var(theta[i], i)));
        let mut total = Dual::cst(0.0);
        for (x, &y) in self.inputs.iter().zip(self.labels) {
            let acc = x.accelerations(&duals, true).expect("floored gaps never fail");
            let (safety, incentive) = margins(&acc, duals[5], duals[6], self.lane);
            let prob = sigmoid(safety / kappa) * sigmoid(incentive / kappa);
            let r = prob - if y { 1.0 } else { 0.0 };
            total = total + r * r;
        }
        let n = self.inputs.len() as f64;
        let grad = std::array::from_fn(|i| total.d[i] / n * self.bounds.span(i));
        (total.v / n, grad)
    }

    /// Mean squared hinge on the criteria margins: lane changes need both
    /// margins above δ, lane keeps need the smaller one below −δ.
    fn hinge(&self, u: &[f64; 7], delta: f64) -> (f64, [f64; 7]) {
        let theta = self.bounds.to_params(u);
        let duals: [Dual; N] = floor_accel_params(std::array::from_fn(|i| Dual::var(theta[i], i)));
        let mut total = Dual::cst(0.0);
        let short = |m: Dual| -> Dual { if m.v < 0.0 { m * m } else { Dual::cst(0.0) } };
        for (x, &y) in self.inputs.iter().zip(self.labels) {
            let acc = x.accelerations(&duals, true).expect("floored gaps never fail");
            let (safety, incentive) = margins(&acc, duals[5], duals[6], self.lane);
            total = total
                + if y {
                    short(safety - delta) + short(incentive - delta)
                } else {
                    let low = if safety.v < incentive.v { safety } else { incentive };
                    short(-low - delta)
                };
        }
        let n = self.inputs.len() as f64;
        let grad = std::array::from_fn(|i| total.d[i] / n * self.bounds.span(i));
        (total.v / n, grad)
    }
}

/// Projected BFGS in `[0,1]^7` with Armijo backtracking along the
/// projection arc.
fn minimize_in_box<F>(f: F, x0: [f64; 7], max_iter: usize) -> ([f64; 7], f64)
where
    F: Fn(&[f64; 7]) -> (f64, [f64; 7]),
{
    let project = |x: [f64; 7]| x.map(|v| v.clamp(0.0, 1.0));
    let mut x = project(x0);
    let (mut fx, mut g) = f(&x);
    let mut h = identity();
    for _ in 0..max_iter {
        let free: [bool; 7] = std::array::from_fn(|i| !((x[i] <= 0.0 && g[i] > 0.0) || (x[i] >= 1.0 && g[i] < 0.0)));
        let mut d = [0.0; 7];
        for i in 0..7 {
            if free[i] {
                d[i] = -(0..7).filter(|&j| free[j]).map(|j| h[i][j] * g[j]).sum::<f64>();
            }
        }
        if dot(&d, &g) >= 0.0 {
            h = identity();
            d = std::array::from_fn(|i| if free[i] { -g[i] } else { 0.0 });
        }
        if d.iter().all(|v| v.abs() < 1e-14) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn = project(std::array::from_fn(|i| x[i] + t * d[i]));
            let step: [f64; 7] = std::array::from_fn(|i| xn[i] - x[i]);
            let (fnew, gnew) = f(&xn);
            if fnew <= fx + 1e-4 * dot(&g, &step) {
                accepted = Some((xn, fnew, gnew, step));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew, s)) = accepted else {
            break;
        };
        let y: [f64; 7] = std::array::from_fn(|i| gnew[i] - g[i]);
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            bfgs_update(&mut h, &s, &y, sy);
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gnew;
        if improvement.abs() <= 1e-12 * (1.0 + fx.abs()) {
            break;
        }
    }
    (x, fx)
}

fn identity() -> [[f64; 7]; 7] {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
}

fn dot(a: &[f64; 7], b: &[f64; 7]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bfgs_update(h: &mut [[f64; 7]; 7], s: &[f64; 7], y: &[f64; 7], sy: f64) {
    let rho = 1.0 / sy;
    let hy: [f64; 7] = std::array::from_fn(|i| dot(&h[i], y));
    let yhy = dot(y, &hy);
    for i in 0..7 {
        for j in 0..7 {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Calibrates the IDM + MOBIL parameters on samples of one lane (labels:
/// lane change or not).
pub fn calibrate_mobil(
    samples: &[ManeuverSample],
    lane: Lane,
    bounds: &CalibrationBounds,
    config: &CalibrationConfig,
) -> Result<CalibrationReport> {
    bounds.validate()?;
    if config.n_starts == 0 {
        return Err(Error::Config("n_starts must be >= 1".into()));
    }
    if config.temperatures.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Config("temperatures must be > 0".into()));
    }
    let labels: Vec<bool> = samples.iter().map(ManeuverSample::is_lane_change).collect();
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateCalibration(format!(
            "{} samples with {positives} lane changes; both classes are required",
            labels.len()
        )));
    }
    let inputs: Vec<MobilInputs> = samples.iter().map(MobilInputs::from_sample).collect();
    let problem = Problem { inputs: &inputs, labels: &labels, lane, bounds: *bounds };

    let per_start: Vec<StartResult> = (0..config.n_starts)
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(start as u64);
            let u0: [f64; 7] = std::array::from_fn(|_| rng.gen::<f64>());
            let mut u = u0;
            let mut best = (problem.hard_errors(&bounds.to_params(&u)), u);
            let mut surrogate = f64::NAN;
            let keep = |u: &[f64; 7], best: &mut (usize, [f64; 7])| {
                let errs = problem.hard_errors(&bounds.to_params(u));
                if errs <= best.0 {
                    *best = (errs, *u);
                }
            };
            for &kappa in &config.temperatures {
                let (un, fx) = minimize_in_box(|x| problem.surrogate(x, kappa), u, config.max_iter);
                u = un;
                surrogate = fx;
                keep(&u, &mut best);
            }
            if config.polish_margin > 0.0 && best.0 > 0 {
                let delta = config.polish_margin;
                let (un, _) = minimize_in_box(|x| problem.hinge(x, delta), best.1, config.max_iter);
                keep(&un, &mut best);
                if let Some(&kappa) = config.temperatures.last() {
                    let (un, _) = minimize_in_box(|x| problem.surrogate(x, kappa), un, config.max_iter);
                    keep(&un, &mut best);
                }
            }
            StartResult {
                start,
                initial: bounds.to_params(&u0),
                params: bounds.to_params(&best.1),
                hard_errors: best.0,
                surrogate,
            }
        })
        .collect();

    let winner = per_start
        .iter()
        .min_by_key(|r| (r.hard_errors, r.start))
        .expect("at least one start");
    let std_dev = std::array::from_fn(|i| {
        let values: Vec<f64> = per_start.iter().map(|r| r.params[i]).collect();
        std_dev(&values)
    });
    Ok(CalibrationReport {
        lane,
        seed: config.seed,
        n_starts: config.n_starts,
        n_samples: samples.len(),
        objective: winner.hard_errors,
        error_rate: winner.hard_errors as f64 / samples.len() as f64,
        params: MobilParams::from_vector(winner.params),
        std_dev,
        per_start,
    })
}

/// Smoothed objective at parameters `theta`, for diagnostics and tests.
pub fn surrogate_objective(samples: &[ManeuverSample], lane: Lane, theta: &MobilParams, kappa: f64) -> f64 {
    let inputs: Vec<MobilInputs> = samples.iter().map(MobilInputs::from_sample).collect();
    let labels: Vec<bool> = samples.iter().map(ManeuverSample::is_lane_change).collect();
    let v = theta.to_vector();
    let bounds = CalibrationBounds { lower: v, upper: v };
    let problem = Problem { inputs: &inputs, labels: &labels, lane, bounds };
    problem.surrogate(&[0.0; 7], kappa).0
}
