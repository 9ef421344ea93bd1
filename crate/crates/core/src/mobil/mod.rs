//! The intelligent driver model, the asymmetric MOBIL lane-change rule and
//! its least-squares calibration.
//!
//! MOBIL accelerations are computed from the sample's spacing and speed
//! differences through the IDM, never from measured accelerations.

mod calibrate;
pub mod dual;

use serde::{Deserialize, Serialize};

use crate::data::Lane;
use crate::features::{ManeuverSample, ADJ_FOLLOWER, ADJ_PREDECESSOR, FOLLOWER, PREDECESSOR};
use crate::{Error, Result};

pub use calibrate::{
    calibrate_mobil, surrogate_objective, CalibrationBounds, CalibrationConfig, CalibrationReport, StartResult,
    PARAM_NAMES,
};
use dual::Scalar;

/// Safety threshold on the new follower's acceleration (m/s²).
pub const B_SAFE: f64 = -4.0;

/// Gap floor (m) used by the total (non-failing) evaluation during calibration.
pub const MIN_GAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired speed v0 (m/s).
    pub desired_speed: f64,
    /// Desired time gap T (s).
    pub time_gap: f64,
    /// Maximum acceleration α (m/s²).
    pub max_accel: f64,
    /// Comfortable deceleration β (m/s²).
    pub comfort_decel: f64,
    /// Vehicle length ℓ (m), also acting as the jam distance.
    pub length: f64,
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.desired_speed, self.time_gap, self.max_accel, self.comfort_decel, self.length];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("IDM parameters must be finite and > 0: {self:?}")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 5] {
        [self.desired_speed, self.time_gap, self.max_accel, self.comfort_decel, self.length]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilParams {
    pub idm: IdmParams,
    /// Politeness p ∈ [0, 1].
    pub politeness: f64,
    /// Acceleration threshold b (m/s²): positive for overtaking, negative
    /// for fold-down in the European asymmetric rule.
    pub threshold: f64,
}

impl MobilParams {
    /// Least-squares estimates reported for HighD, right lane.
    pub fn highd_right() -> MobilParams {
        MobilParams {
            idm: IdmParams {
                desired_speed: 63.16,
                time_gap: 1.04,
                max_accel: 1.45,
                comfort_decel: 2.60,
                length: 7.27,
            },
            politeness: 0.53,
            threshold: 1.56,
        }
    }

    /// Least-squares estimates reported for HighD, left lane.
    pub fn highd_left() -> MobilParams {
        MobilParams {
            idm: IdmParams {
                desired_speed: 58.77,
                time_gap: 3.97,
                max_accel: 2.76,
                comfort_decel: 1.37,
                length: 6.17,
            },
            politeness: 0.64,
            threshold: -1.14,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.idm.validate()?;
        if !(0.0..=1.0).contains(&self.politeness) {
            return Err(Error::Config(format!("politeness must be in [0,1], got {}", self.politeness)));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        Ok(())
    }

    /// `[v0, T, α, β, ℓ, p, b]`.
    pub fn to_vector(&self) -> [f64; 7] {
        let i = self.idm.as_array();
        [i[0], i[1], i[2], i[3], i[4], self.politeness, self.threshold]
    }

    pub fn from_vector(v: [f64; 7]) -> MobilParams {
        MobilParams {
            idm: IdmParams {
                desired_speed: v[0],
                time_gap: v[1],
                max_accel: v[2],
                comfort_decel: v[3],
                length: v[4],
            },
            politeness: v[5],
            threshold: v[6],
        }
    }
}

/// Desired-gap form with ego speed first:
/// `f(v, v1) = ℓ + max(0, T v + v (v − v1) / (2 √(αβ)))`.
fn idm_generic<S: Scalar>(v: f64, v_lead: f64, spacing: f64, p: &[S; 7], floor_gap: bool) -> Option<S> {
    let [v0, t, alpha, beta, len, _, _] = *p;
    let mut gap = -len + spacing;
    if gap.value() <= 0.0 {
        if !floor_gap {
            return None;
        }
        gap = S::cst(MIN_GAP);
    } else if floor_gap {
        gap = gap.max_f(MIN_GAP);
    }
    let dynamic = t * v + S::cst(v * (v - v_lead) / 2.0) / (alpha * beta).sqrt().max_f(1e-9);
    let desired = len + dynamic.max_f(0.0);
    let ratio = S::cst(v) / v0;
    let r2 = ratio * ratio;
    let g = desired / gap;
    Some(alpha * (-(r2 * r2) - g * g + 1.0))
}

/// IDM acceleration of a vehicle at speed `v` following a leader at speed
/// `v_lead`, center-to-center spacing `spacing`.
pub fn idm_acceleration(v: f64, v_lead: f64, spacing: f64, params: &IdmParams) -> Result<f64> {
    let p = [
        params.desired_speed,
        params.time_gap,
        params.max_accel,
        params.comfort_decel,
        params.length,
        0.0,
        0.0,
    ];
    idm_generic::<f64>(v, v_lead, spacing, &p, false).ok_or(Error::BumperOverlap {
        spacing,
        length: params.length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    LaneChange,
    LaneKeep,
}

impl Decision {
    pub fn is_change(self) -> bool {
        self == Decision::LaneChange
    }
}

/// Accelerations entering the safety and incentive criteria. The
/// `_after` fields assume the subject has moved to the other lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneChangeAccelerations<S = f64> {
    /// a: subject behind P.
    pub own: S,
    /// ã: subject behind PA.
    pub own_after: S,
    /// a_F: F behind the subject.
    pub follower: S,
    /// ã_F: F behind P once the subject has left.
    pub follower_after: S,
    /// a_FA: FA behind PA.
    pub adj_follower: S,
    /// ã_FA: FA behind the subject.
    pub adj_follower_after: S,
}

/// Safety margin `ã_FA − b_safe` (≥ 0 passes) and incentive margin
/// (> 0 passes) for a lane.
pub fn margins<S: Scalar>(acc: &LaneChangeAccelerations<S>, politeness: S, threshold: S, lane: Lane) -> (S, S) {
    let safety = acc.adj_follower_after - B_SAFE;
    let follower_term = match lane {
        Lane::Right => acc.adj_follower_after - acc.adj_follower,
        Lane::Left => acc.follower_after - acc.follower,
    };
    let incentive = acc.own_after - acc.own + politeness * follower_term - threshold;
    (safety, incentive)
}

/// Safety criterion `ã_FA ≥ b_safe` and the lane-specific incentive
/// criterion: overtaking weighs the new follower, fold-down the old one.
pub fn mobil_rule(acc: &LaneChangeAccelerations, params: &MobilParams, lane: Lane) -> Decision {
    let (safety, incentive) = margins(acc, params.politeness, params.threshold, lane);
    if safety >= 0.0 && incentive > 0.0 {
        Decision::LaneChange
    } else {
        Decision::LaneKeep
    }
}

/// Speeds and spacings extracted once from a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilInputs {
    pub v: f64,
    pub v_p: f64,
    pub dx_p: f64,
    pub v_f: f64,
    pub dx_f: f64,
    pub v_pa: f64,
    pub dx_pa: f64,
    pub v_fa: f64,
    pub dx_fa: f64,
}

impl MobilInputs {
    /// Sample must already be imputed.
    pub fn from_sample(s: &ManeuverSample) -> MobilInputs {
        let n = &s.neighbors;
        let v = s.v_x.max(0.0);
        let speed = |k: usize| (v + n[k].speed_diff).max(0.0);
        MobilInputs {
            v,
            v_p: speed(PREDECESSOR),
            dx_p: n[PREDECESSOR].spacing,
            v_f: speed(FOLLOWER),
            dx_f: n[FOLLOWER].spacing,
            v_pa: speed(ADJ_PREDECESSOR),
            dx_pa: n[ADJ_PREDECESSOR].spacing,
            v_fa: speed(ADJ_FOLLOWER),
            dx_fa: n[ADJ_FOLLOWER].spacing,
        }
    }

    /// All six accelerations; `None` on bumper overlap unless `floor_gap`.
    pub fn accelerations<S: Scalar>(&self, p: &[S; 7], floor_gap: bool) -> Option<LaneChangeAccelerations<S>> {
        let idm = |v, lead, dx| idm_generic(v, lead, dx, p, floor_gap);
        Some(LaneChangeAccelerations {
            own: idm(self.v, self.v_p, self.dx_p)?,
            own_after: idm(self.v, self.v_pa, self.dx_pa)?,
            follower: idm(self.v_f, self.v, self.dx_f)?,
            follower_after: idm(self.v_f, self.v_p, self.dx_f + self.dx_p)?,
            adj_follower: idm(self.v_fa, self.v_pa, self.dx_fa + self.dx_pa)?,
            adj_follower_after: idm(self.v_fa, self.v, self.dx_fa)?,
        })
    }
}

pub fn lane_change_accelerations(sample: &ManeuverSample, params: &MobilParams) -> Result<LaneChangeAccelerations> {
    let p = params.to_vector();
    let inputs = MobilInputs::from_sample(sample);
    inputs.accelerations::<f64>(&p, false).ok_or_else(|| {
        let spacing = [inputs.dx_p, inputs.dx_pa, inputs.dx_f, inputs.dx_fa]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        Error::BumperOverlap { spacing, length: params.idm.length }
    })
}

/// MOBIL decision for a subject on `lane`.
pub fn mobil_decide(sample: &ManeuverSample, params: &MobilParams, lane: Lane) -> Result<Decision> {
    let acc = lane_change_accelerations(sample, params)?;
    Ok(mobil_rule(&acc, params, lane))
}

/// Decision used inside calibration and the simulator: gaps at or below the
/// vehicle length are floored at [`MIN_GAP`] instead of failing, which turns
/// an overlap into a strong deceleration.
pub fn mobil_decide_total(inputs: &MobilInputs, params: &MobilParams, lane: Lane) -> Decision {
    let p = params.to_vector();
    let acc = inputs.accelerations::<f64>(&p, true).expect("floored gaps never fail");
    mobil_rule(&acc, params, lane)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::features::{Maneuver, NeighborFeatures};

    fn right() -> IdmParams {
        MobilParams::highd_right().idm
    }

    #[test]
    fn standstill_free_road_gives_max_accel() {
        let a = idm_acceleration(0.0, 0.0, 1e6, &right()).unwrap();
        assert!((a - 1.45).abs() < 1e-6);
    }

    #[test]
    fn desired_speed_is_equilibrium() {
        let p = right();
        let a = idm_acceleration(p.desired_speed, p.desired_speed, 1e6, &p).unwrap();
        assert!(a.abs() < 1e-6);
    }

    /// Bisection on the IDM law for the spacing where a = 0 at Δv = 0.
    pub(crate) fn equilibrium_spacing(v: f64, p: &IdmParams) -> f64 {
        let f = |dx: f64| idm_acceleration(v, v, dx, p).unwrap();
        let (mut lo, mut hi) = (p.length + 1e-9, 1e5);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn equilibrium_gap_by_bisection() {
        let p = right();
        let dx = equilibrium_spacing(25.0, &p);
        let a = idm_acceleration(25.0, 25.0, dx, &p).unwrap();
        assert!(a.abs() < 1e-9, "{a}");
        // closed form at Δv = 0: s* / (Δx − ℓ) = sqrt(1 − (v/v0)^4)
        let s_star = p.length + p.time_gap * 25.0;
        let closed = p.length + s_star / (1.0 - (25.0f64 / p.desired_speed).powi(4)).sqrt();
        assert!((dx - closed).abs() < 1e-8);
    }

    #[test]
    fn overlap_is_domain_error() {
        assert!(matches!(
            idm_acceleration(10.0, 10.0, 7.0, &right()),
            Err(Error::BumperOverlap { .. })
        ));
    }

    fn accels(own: f64, own_after: f64, fa: f64, fa_after: f64) -> LaneChangeAccelerations {
        LaneChangeAccelerations {
            own,
            own_after,
            follower: 0.0,
            follower_after: 0.0,
            adj_follower: fa,
            adj_follower_after: fa_after,
        }
    }

    #[test]
    fn zero_incentive_keeps_lane() {
        let p = MobilParams::highd_right();
        assert_eq!(mobil_rule(&accels(0.3, 0.3, 0.1, 0.1), &p, Lane::Right), Decision::LaneKeep);
    }

    #[test]
    fn gain_above_threshold_changes_lane() {
        let p = MobilParams::highd_right();
        assert_eq!(mobil_rule(&accels(-1.0, 1.0, 0.0, 0.0), &p, Lane::Right), Decision::LaneChange);
    }

    #[test]
    fn safety_veto() {
        let p = MobilParams::highd_right();
        assert_eq!(mobil_rule(&accels(-5.0, 3.0, -5.0, -5.0), &p, Lane::Right), Decision::LaneKeep);
    }

    #[test]
    fn left_lane_uses_old_follower() {
        let mut p = MobilParams::highd_left();
        p.threshold = 0.0;
        let mut a = accels(0.0, 0.0, 0.0, 0.0);
        a.follower = -1.0;
        a.follower_after = 0.5;
        assert_eq!(mobil_rule(&a, &p, Lane::Left), Decision::LaneChange);
        assert_eq!(mobil_rule(&a, &p, Lane::Right), Decision::LaneKeep);
    }

    fn free_sample(dx_p: f64, dv_p: f64) -> ManeuverSample {
        let free = NeighborFeatures {
            spacing: 500.0,
            speed_diff: 0.0,
            time_gap: 16.0,
            accel: 0.0,
            class: 0.0,
            present: false,
        };
        let mut neighbors = [free; 4];
        neighbors[PREDECESSOR] = NeighborFeatures {
            spacing: dx_p,
            speed_diff: dv_p,
            present: true,
            ..free
        };
        ManeuverSample {
            vehicle_id: 1,
            frame: 0,
            maneuver: Maneuver::KeepRight,
            v_x: 30.0,
            v_y: 0.0,
            a_x: 0.0,
            a_y: 0.0,
            length: 4.5,
            horizon: 2.0,
            neighbors,
        }
    }

    #[test]
    fn slow_close_leader_triggers_overtaking() {
        let p = MobilParams::highd_right();
        assert_eq!(mobil_decide(&free_sample(30.0, -8.0), &p, Lane::Right).unwrap(), Decision::LaneChange);
        assert_eq!(mobil_decide(&free_sample(400.0, 0.0), &p, Lane::Right).unwrap(), Decision::LaneKeep);
        assert!(mobil_decide(&free_sample(5.0, 0.0), &p, Lane::Right).is_err());
        // the total variant never fails and reads the overlap as braking
        let inputs = MobilInputs::from_sample(&free_sample(5.0, 0.0));
        assert_eq!(mobil_decide_total(&inputs, &p, Lane::Right), Decision::LaneChange);
    }

    #[test]
    fn dual_accelerations_match_plain() {
        let inputs = MobilInputs::from_sample(&free_sample(30.0, -8.0));
        let p = MobilParams::highd_right().to_vector();
        let plain = inputs.accelerations::<f64>(&p, true).unwrap();
        let duals: [dual::Dual; 7] = std::array::from_fn(|i| dual::Dual::var(p[i], i));
        let d = inputs.accelerations(&duals, true).unwrap();
        assert_eq!(plain.own, d.own.v);
        assert_eq!(plain.adj_follower_after, d.adj_follower_after.v);
        // ∂a/∂α by central differences
        let h = 1e-6;
        let mut lo = p;
        let mut hi = p;
        lo[2] -= h;
        hi[2] += h;
        let fd = (inputs.accelerations::<f64>(&hi, true).unwrap().own
            - inputs.accelerations::<f64>(&lo, true).unwrap().own)
            / (2.0 * h);
        assert!((fd - d.own.d[2]).abs() < 1e-6);
    }
}
