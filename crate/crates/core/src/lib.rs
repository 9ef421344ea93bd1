//! Lane-change prediction benchmark for two-lane highways.
//!
//! The crate covers the whole pipeline:
//!
//! * [`data`]: HighD-compatible track files, neighbour resolution and
//!   center-line crossings.
//! * [`features`]: labeled maneuver samples with up to 24 explanatory
//!   variables measured a horizon `τ` before the crossing.
//! * [`mobil`]: the IDM car-following law, the asymmetric MOBIL decision rule
//!   and its multi-start least-squares calibration.
//! * [`classifiers`]: logistic regression, LDA, Gaussian naive Bayes, CART,
//!   linear SVM and a 2-neuron feed-forward network.
//! * [`ensemble`]: bagging rules and stacking meta-learners.
//! * [`evaluation`]: error decomposition, repeated 80/20 sub-sampling, ROC
//!   sweeps, horizon sweeps and descriptive statistics.
//! * [`descriptive`]: file emission for the descriptive statistics.
//! * [`simulator`]: a ring-road IDM + MOBIL simulator producing synthetic
//!   recordings with ground truth.
//! * [`cli`]: the `lcbench` command line.

pub mod classifiers;
pub mod cli;
pub mod data;
pub mod descriptive;
pub mod ensemble;
mod error;
pub mod evaluation;
pub mod features;
pub mod linalg;
pub mod mobil;
pub mod models;
pub mod simulator;

pub use error::{Error, Result};

/// Crate version echoed into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
