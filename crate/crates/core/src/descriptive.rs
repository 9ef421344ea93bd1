//! Standalone descriptive-statistics reports: one JSON document plus
//! plot-ready delimited tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Lane;
use crate::evaluation::{describe, lane_samples, Description};
use crate::features::{FeatureSubset, ManeuverSample};
use crate::{Error, Result, VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveReport {
    pub version: String,
    pub subset: FeatureSubset,
    /// All maneuvers together (the frequency table is the useful part).
    pub overall: Description,
    /// Right-lane (LKR/OV) and left-lane (LKL/FD) analyses, when present.
    pub lanes: Vec<(Lane, Description)>,
}

pub fn build(samples: &[ManeuverSample], subset: FeatureSubset) -> Result<DescriptiveReport> {
    let overall = describe(samples, subset)?;
    let mut lanes = Vec::new();
    for lane in [Lane::Right, Lane::Left] {
        let s = lane_samples(samples, lane);
        if !s.is_empty() {
            lanes.push((lane, describe(&s, subset)?));
        }
    }
    Ok(DescriptiveReport { version: VERSION.to_string(), subset, overall, lanes })
}

impl DescriptiveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn frequency_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["maneuver", "count", "percent", "mean_v_x", "mean_dx_P", "mean_T_P"])?;
        for r in &self.overall.frequency {
            w.write_record([
                r.maneuver.to_string(),
                r.count.to_string(),
                r.percent.to_string(),
                r.mean_v_x.to_string(),
                opt(r.mean_dx_p),
                opt(r.mean_t_p),
            ])?;
        }
        finish(w)
    }

    /// Loadings and correlation-circle coordinates of the first two
    /// components, per lane.
    pub fn pca_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lane", "variable", "loading_1", "loading_2", "circle_1", "circle_2"])?;
        for (lane, d) in &self.lanes {
            let Some(p) = &d.pca else { continue };
            for (j, v) in p.variables.iter().enumerate() {
                let load = |k: usize| p.components.get(k).map(|c| c[j].to_string()).unwrap_or_default();
                w.write_record([format!("{lane:?}"), v.clone(), load(0), load(1), p.circle[j][0].to_string(), p.circle[j][1].to_string()])?;
            }
        }
        finish(w)
    }

    pub fn explained_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lane", "component", "explained"])?;
        for (lane, d) in &self.lanes {
            let Some(p) = &d.pca else { continue };
            for (k, e) in p.explained.iter().enumerate() {
                w.write_record([format!("{lane:?}"), (k + 1).to_string(), e.to_string()])?;
            }
        }
        finish(w)
    }

    pub fn odds_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lane", "variable", "coefficient", "std_error", "odds_ratio", "lower_95", "upper_95"])?;
        for (lane, d) in &self.lanes {
            for o in &d.odds {
                w.write_record([
                    format!("{lane:?}"),
                    o.variable.clone(),
                    o.coefficient.to_string(),
                    o.std_error.to_string(),
                    o.odds_ratio.to_string(),
                    o.lower.to_string(),
                    o.upper.to_string(),
                ])?;
            }
        }
        finish(w)
    }

    /// Text summary for the terminal.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<9} {:>7} {:>8} {:>9} {:>10} {:>9}\n", "maneuver", "count", "%", "v_x", "dx_P", "T_P");
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        for r in &self.overall.frequency {
            out += &format!(
                "{:<9} {:>7} {:>8.2} {:>9.2} {:>10} {:>9}\n",
                r.maneuver.to_string(),
                r.count,
                r.percent,
                r.mean_v_x,
                f(r.mean_dx_p),
                f(r.mean_t_p)
            );
        }
        for (lane, d) in &self.lanes {
            if let Some(p) = &d.pca {
                let two = p.explained.iter().take(2).sum::<f64>();
                out += &format!("{lane:?} lane: first two components explain {:.1}% of the variance\n", 100.0 * two);
            }
            for n in &d.notes {
                out += &format!("{lane:?} lane: {n}\n");
            }
        }
        out
    }

    /// Writes `describe.json` and the delimited tables into `dir`, which
    /// must exist. Returns the written paths.
    pub fn write(&self, dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
        let mut files = vec![
            ("describe.json", self.to_json()?),
            ("frequency.csv", self.frequency_csv()?),
            ("pca_loadings.csv", self.pca_csv()?),
            ("pca_explained.csv", self.explained_csv()?),
            ("odds_ratios.csv", self.odds_csv()?),
        ];
        for (lane, d) in &self.lanes {
            let name = match lane {
                Lane::Right => "correlation_right.csv",
                Lane::Left => "correlation_left.csv",
            };
            files.push((name, d.correlation.to_csv()?));
        }
        let paths: Vec<PathBuf> = files.iter().map(|(n, _)| dir.join(n)).collect();
        if !force {
            if let Some(p) = paths.iter().find(|p| p.exists()) {
                return Err(Error::Config(format!("{} exists; pass --force to overwrite", p.display())));
            }
        }
        for ((_, text), path) in files.iter().zip(&paths) {
            std::fs::write(path, text)?;
        }
        Ok(paths)
    }
}

/// Builds and writes the report.
pub fn report(samples: &[ManeuverSample], subset: FeatureSubset, dir: &Path, force: bool) -> Result<DescriptiveReport> {
    let r = build(samples, subset)?;
    r.write(dir, force)?;
    Ok(r)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate_benchmark, BenchmarkConfig, ScenarioConfig};

    #[test]
    fn synthetic_overtakers_approach_slower_leaders() {
        let cfg = BenchmarkConfig { scenario: ScenarioConfig { duration: 600.0, seed: 3, ..Default::default() }, ..Default::default() };
        let b = generate_benchmark(&cfg).unwrap();
        let r = build(&b.samples, FeatureSubset::Mobil8).unwrap();
        let total: f64 = r.overall.frequency.iter().map(|f| f.percent).sum();
        assert!((total - 100.0).abs() < 0.01);
        let ov: Vec<_> = b.samples.iter().filter(|s| s.maneuver == crate::features::Maneuver::Overtake).collect();
        assert!(ov.len() > 10);
        let dv = ov.iter().map(|s| s.predecessor().speed_diff).sum::<f64>() / ov.len() as f64;
        assert!(dv < 0.0, "{dv}");
        for (_, d) in &r.lanes {
            let e = &d.pca.as_ref().unwrap().explained;
            assert!(e.iter().all(|x| (0.0..=1.0).contains(x)));
            assert!(e.windows(2).all(|w| w[0] >= w[1]));
        }
        let dir = tempfile::tempdir().unwrap();
        let paths = r.write(dir.path(), false).unwrap();
        assert!(paths.iter().all(|p| p.exists()));
        assert!(r.write(dir.path(), false).is_err());
        r.write(dir.path(), true).unwrap();
    }
}
