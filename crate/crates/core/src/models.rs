//! One interface over everything that predicts a maneuver: the six base
//! classifiers, the ten ensembles and the calibrated MOBIL rule.
//!
//! Models are fitted per lane: on the right lane the task is LKR vs OV, on
//! the left lane LKL vs FD.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train, ClassifierKind, Dataset, TrainConfig, TrainedModel};
use crate::data::Lane;
use crate::ensemble::{train_bases, train_ensemble, EnsembleKind, EnsembleModel};
use crate::features::{FeatureSubset, ManeuverSample};
use crate::mobil::{calibrate_mobil, mobil_decide_total, CalibrationBounds, CalibrationConfig, MobilInputs, MobilParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    Base(ClassifierKind),
    Ensemble(EnsembleKind),
    Mobil,
}

impl ModelSpec {
    pub fn all() -> Vec<ModelSpec> {
        let mut v: Vec<ModelSpec> = ClassifierKind::ALL.into_iter().map(ModelSpec::Base).collect();
        v.extend(EnsembleKind::ALL.into_iter().map(ModelSpec::Ensemble));
        v.push(ModelSpec::Mobil);
        v
    }

    /// Parses a comma-separated list such as `ann,stack-ann,mean*,mobil`.
    pub fn parse_list(s: &str) -> Result<Vec<ModelSpec>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(ModelSpec::all());
        }
        s.split(',').map(|t| t.trim().parse()).collect()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Base(k) => write!(f, "{k}"),
            ModelSpec::Ensemble(k) => write!(f, "{k}"),
            ModelSpec::Mobil => f.write_str("MOBIL"),
        }
    }
}

impl std::str::FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("mobil") {
            return Ok(ModelSpec::Mobil);
        }
        if let Ok(k) = s.parse::<ClassifierKind>() {
            return Ok(ModelSpec::Base(k));
        }
        s.parse::<EnsembleKind>()
            .map(ModelSpec::Ensemble)
            .map_err(|_| Error::Config(format!("unknown model {s:?}")))
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub subset: FeatureSubset,
    pub train: TrainConfig,
    pub calibration: CalibrationConfig,
    pub bounds: CalibrationBounds,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            subset: FeatureSubset::Full24,
            train: TrainConfig::default(),
            calibration: CalibrationConfig::default(),
            bounds: CalibrationBounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum FittedModel {
    Base { model: TrainedModel },
    Ensemble { model: EnsembleModel },
    Mobil { lane: Lane, params: MobilParams },
}

impl FittedModel {
    /// Predictions (true = lane change) for samples of the fitted lane.
    pub fn predict<R: Rng>(&self, samples: &[ManeuverSample], subset: FeatureSubset, rng: &mut R) -> Result<Vec<bool>> {
        match self {
            FittedModel::Base { model } => samples.iter().map(|s| model.predict(&s.features(subset))).collect(),
            FittedModel::Ensemble { model } => {
                samples.iter().map(|s| model.predict(&s.features(subset), rng)).collect()
            }
            FittedModel::Mobil { lane, params } => Ok(samples
                .iter()
                .map(|s| mobil_decide_total(&MobilInputs::from_sample(s), params, *lane).is_change())
                .collect()),
        }
    }
}

/// The lane shared by all samples.
pub fn common_lane(samples: &[ManeuverSample]) -> Result<Lane> {
    let lane = samples.first().ok_or_else(|| Error::Dataset("no samples".into()))?.lane();
    if samples.iter().any(|s| s.lane() != lane) {
        return Err(Error::Dataset("samples mix right-lane and left-lane maneuvers; fit each lane separately".into()));
    }
    Ok(lane)
}

/// Fits every requested model on one lane's training samples. The six
/// bases are trained once and shared by all requested ensembles.
pub fn fit_models(specs: &[ModelSpec], samples: &[ManeuverSample], config: &ModelConfig) -> Result<Vec<FittedModel>> {
    let lane = common_lane(samples)?;
    let data = Dataset::from_samples(samples, config.subset)?;
    let need_all = specs.iter().any(|s| matches!(s, ModelSpec::Ensemble(_)));
    let bases = if need_all { Some(train_bases(&data, &config.train)?) } else { None };
    specs
        .iter()
        .map(|spec| {
            Ok(match spec {
                ModelSpec::Base(kind) => {
                    let model = match &bases {
                        Some(b) => b[ClassifierKind::ALL.iter().position(|k| k == kind).expect("known kind")].clone(),
                        None => train(*kind, &data, &config.train)?,
                    };
                    FittedModel::Base { model }
                }
                ModelSpec::Ensemble(kind) => FittedModel::Ensemble {
                    model: train_ensemble(*kind, &data, bases.clone().expect("bases trained"), &config.train)?,
                },
                ModelSpec::Mobil => {
                    let report = calibrate_mobil(samples, lane, &config.bounds, &config.calibration)?;
                    FittedModel::Mobil { lane, params: report.params }
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse_and_print() {
        for s in ModelSpec::all() {
            assert_eq!(s.to_string().parse::<ModelSpec>().unwrap(), s);
        }
        let v = ModelSpec::parse_list("stack-ann, mean*,mobil,lr").unwrap();
        assert_eq!(
            v,
            vec![
                ModelSpec::Ensemble(EnsembleKind::Stack(ClassifierKind::Ann)),
                ModelSpec::Ensemble(EnsembleKind::MeanStar),
                ModelSpec::Mobil,
                ModelSpec::Base(ClassifierKind::Logistic),
            ]
        );
        assert!("bogus".parse::<ModelSpec>().is_err());
        assert_eq!(ModelSpec::all().len(), 17);
    }
}
