//! Two-lane ring-road simulator: vehicle-specific IDM car following and
//! lane-specific MOBIL lane changes, recorded in the tracks schema.
//!
//! Positions are emitted in normalized coordinates (`+x` along travel, right
//! lane below the center-line). Each lap of a vehicle becomes a separate
//! track so that `x` stays within `[0, L)` and every track is contiguous.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{
    build_trajectory, Carriageway, CrossingDirection, Lane, Recording, RecordingMeta, TrackFrame, VehicleClass,
};
use crate::features::{snapshot_sample, FeatureSpec, Maneuver, ManeuverSample, PREDECESSOR};
use crate::mobil::{idm_acceleration, margins, IdmParams, MobilInputs, MobilParams, MIN_GAP};
use crate::{Error, Result};

/// Hardest braking the vehicles can physically apply (m/s²).
const MAX_BRAKING: f64 = -9.0;

/// Car-following behaviour of one driver. The IDM length parameter of a
/// pair is `min_gap` plus the two half vehicle lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverModel {
    pub desired_speed: f64,
    pub time_gap: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub min_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassConfig {
    /// Mean driver parameters.
    pub driver: DriverModel,
    /// Each driver parameter is scaled by `1 + jitter·U(−1, 1)`.
    pub jitter: f64,
    pub length: f64,
    pub width: f64,
}

impl ClassConfig {
    pub fn car() -> ClassConfig {
        ClassConfig {
            driver: DriverModel {
                desired_speed: 36.0,
                time_gap: 1.2,
                max_accel: 1.2,
                comfort_decel: 2.0,
                min_gap: 2.0,
            },
            jitter: 0.1,
            length: 4.5,
            width: 1.8,
        }
    }

    pub fn truck() -> ClassConfig {
        ClassConfig {
            driver: DriverModel {
                desired_speed: 24.0,
                time_gap: 1.5,
                max_accel: 0.6,
                comfort_decel: 1.5,
                min_gap: 3.0,
            },
            jitter: 0.05,
            length: 15.0,
            width: 2.5,
        }
    }
}

/// Extra term added to the incentive of the generator's decisions, hidden
/// from the MOBIL rule. Drivers are keener to leave a lane behind a close
/// truck, `truck_bonus · C^P · σ((range − Δx^P)/scale)`, and react to the
/// predecessor's acceleration, `accel_gain · tanh(−a^P / accel_scale)`:
/// braking pushes out of the lane, speeding up holds the driver in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HiddenTerm {
    pub truck_bonus: f64,
    pub range: f64,
    pub scale: f64,
    pub accel_gain: f64,
    pub accel_scale: f64,
}

impl Default for HiddenTerm {
    fn default() -> Self {
        HiddenTerm { truck_bonus: 2.0, range: 80.0, scale: 10.0, accel_gain: 3.0, accel_scale: 0.3 }
    }
}

impl HiddenTerm {
    pub fn value(&self, sample: &ManeuverSample) -> f64 {
        let p = &sample.neighbors[PREDECESSOR];
        if !p.present {
            return 0.0;
        }
        let near = 1.0 / (1.0 + ((p.spacing - self.range) / self.scale).exp());
        self.truck_bonus * p.class * near + self.accel_gain * (-p.accel / self.accel_scale).tanh()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub road_length: f64,
    pub n_cars: usize,
    pub n_trucks: usize,
    pub car: ClassConfig,
    pub truck: ClassConfig,
    pub mobil_right: MobilParams,
    pub mobil_left: MobilParams,
    /// Integration step and output frame interval (s).
    pub dt: f64,
    pub duration: f64,
    /// Duration of the cosine lateral profile (s).
    pub lane_change_duration: f64,
    /// Seconds between two MOBIL evaluations of the same vehicle.
    pub decision_interval: f64,
    /// Gaussian acceleration noise standard deviation (m/s²).
    pub accel_noise: f64,
    /// Probability of flipping a MOBIL decision.
    pub decision_noise: f64,
    pub hidden_term: Option<HiddenTerm>,
    /// Vehicles may only change lanes after this many seconds.
    pub warmup: f64,
    pub lane_width: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            road_length: 2000.0,
            n_cars: 40,
            n_trucks: 8,
            car: ClassConfig::car(),
            truck: ClassConfig::truck(),
            mobil_right: generator_mobil(Lane::Right),
            mobil_left: generator_mobil(Lane::Left),
            dt: 0.1,
            duration: 600.0,
            lane_change_duration: 3.0,
            decision_interval: 1.0,
            accel_noise: 0.0,
            decision_noise: 0.0,
            hidden_term: None,
            warmup: 10.0,
            lane_width: 3.75,
            seed: 0,
        }
    }
}

/// Default lane-change rule of the generator: IDM terms matching the mean
/// car driver, a positive threshold on the right lane and a negative one
/// on the left (the keep-right bias).
pub fn generator_mobil(lane: Lane) -> MobilParams {
    let idm = IdmParams { desired_speed: 36.0, time_gap: 1.2, max_accel: 1.2, comfort_decel: 2.0, length: 6.5 };
    match lane {
        Lane::Right => MobilParams { idm, politeness: 0.5, threshold: 0.6 },
        Lane::Left => MobilParams { idm, politeness: 0.5, threshold: -0.6 },
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("road_length", self.road_length),
            ("dt", self.dt),
            ("lane_change_duration", self.lane_change_duration),
            ("decision_interval", self.decision_interval),
            ("lane_width", self.lane_width),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.duration >= 0.0) || !(self.warmup >= 0.0) || !(self.accel_noise >= 0.0) {
            return Err(Error::Config("duration, warmup and accel_noise must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.decision_noise) {
            return Err(Error::Config(format!("decision_noise must be in [0, 1], got {}", self.decision_noise)));
        }
        for c in [&self.car, &self.truck] {
            if !(0.0..1.0).contains(&c.jitter) || !(c.length > 0.0) || !(c.width > 0.0) {
                return Err(Error::Config("class jitter must be in [0, 1) and sizes > 0".into()));
            }
            let d = c.driver;
            if [d.desired_speed, d.time_gap, d.max_accel, d.comfort_decel].iter().any(|v| !(*v > 0.0))
                || !(d.min_gap >= 0.0)
            {
                return Err(Error::Config("driver parameters must be positive".into()));
            }
        }
        self.mobil_right.validate()?;
        self.mobil_left.validate()?;
        Ok(())
    }

    pub fn frame_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn meta(&self) -> RecordingMeta {
        RecordingMeta {
            recording_id: format!("sim-{}", self.seed),
            frame_rate: self.frame_rate(),
            road_length: self.road_length,
            lane_markings: vec![0.0, self.lane_width, 2.0 * self.lane_width],
            direction: Carriageway::Forward,
            periodic: true,
        }
    }

    fn lane_center(&self, lane: Lane) -> f64 {
        match lane {
            Lane::Right => 0.5 * self.lane_width,
            Lane::Left => 1.5 * self.lane_width,
        }
    }

    fn mobil(&self, lane: Lane) -> &MobilParams {
        match lane {
            Lane::Right => &self.mobil_right,
            Lane::Left => &self.mobil_left,
        }
    }

    pub fn from_toml(text: &str) -> Result<ScenarioConfig> {
        let c: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Ground-truth lane change: decided at `decision_frame`, crossing the
/// center-line at `crossing_frame`. Vehicle ids are track ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeEvent {
    pub vehicle_id: u64,
    pub decision_frame: i64,
    pub crossing_frame: i64,
    pub direction: CrossingDirection,
}

/// One evaluation of the lane-change rule. `sample.maneuver` is the
/// executed decision.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub sample: ManeuverSample,
    pub class: VehicleClass,
    /// The rule's own verdict before decision noise.
    pub rule_change: bool,
    pub flipped: bool,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub recording: Recording,
    pub events: Vec<LaneChangeEvent>,
    pub decisions: Vec<DecisionRecord>,
}

#[derive(Debug, Clone)]
struct Maneuvering {
    from: Lane,
    start: f64,
    decision_frame: i64,
    crossed: bool,
}

#[derive(Debug, Clone)]
struct Vehicle {
    track: u64,
    class: VehicleClass,
    length: f64,
    width: f64,
    driver: DriverModel,
    x: f64,
    y: f64,
    v: f64,
    a: f64,
    v_y: f64,
    a_y: f64,
    /// Lane the vehicle drives in longitudinally (the target during a change).
    lane: Lane,
    maneuver: Option<Maneuvering>,
    phase: i64,
}

impl Vehicle {
    fn occupies(&self, lane: Lane) -> bool {
        self.lane == lane || self.maneuver.as_ref().is_some_and(|m| m.from == lane)
    }
}

fn jittered(d: &DriverModel, jitter: f64, rng: &mut ChaCha8Rng) -> DriverModel {
    let mut j = || 1.0 + jitter * rng.gen_range(-1.0..=1.0);
    DriverModel {
        desired_speed: d.desired_speed * j(),
        time_gap: d.time_gap * j(),
        max_accel: d.max_accel * j(),
        comfort_decel: d.comfort_decel * j(),
        min_gap: d.min_gap * j(),
    }
}

fn pair_params(d: &DriverModel, length: f64, lead_length: f64) -> IdmParams {
    IdmParams {
        desired_speed: d.desired_speed,
        time_gap: d.time_gap,
        max_accel: d.max_accel,
        comfort_decel: d.comfort_decel,
        length: d.min_gap + 0.5 * (length + lead_length),
    }
}

/// IDM acceleration with overlaps turned into maximal braking.
fn follow(d: &DriverModel, length: f64, v: f64, lead: Option<(f64, f64, f64)>) -> f64 {
    let Some((v_lead, spacing, lead_length)) = lead else {
        return idm_acceleration(v, v, f64::INFINITY, &pair_params(d, length, length)).unwrap_or(0.0);
    };
    let p = pair_params(d, length, lead_length);
    let spacing = spacing.max(p.length + MIN_GAP);
    idm_acceleration(v, v_lead, spacing, &p).unwrap_or(MAX_BRAKING).max(MAX_BRAKING)
}

/// Speed at which the IDM is in equilibrium at the given spacing.
pub fn equilibrium_speed(spacing: f64, params: &IdmParams) -> f64 {
    if spacing <= params.length {
        return 0.0;
    }
    let accel = |v: f64| idm_acceleration(v, v, spacing, params).unwrap_or(f64::NEG_INFINITY);
    let (mut lo, mut hi) = (0.0, params.desired_speed);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if accel(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Places vehicles evenly per lane (all trucks on the right lane, spread out)
/// at the equilibrium speed of the slowest driver for that spacing.
fn initial_vehicles(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vehicle>> {
    let total = config.n_cars + config.n_trucks;
    let n_right = (total.div_ceil(2)).max(config.n_trucks);
    let n_left = total - n_right;
    let right_cars = n_right - config.n_trucks;
    let mut right_classes = vec![VehicleClass::Car; n_right];
    for k in 0..config.n_trucks {
        right_classes[k * n_right / config.n_trucks.max(1)] = VehicleClass::Truck;
    }
    debug_assert_eq!(right_classes.iter().filter(|c| **c == VehicleClass::Car).count(), right_cars);
    let mut vehicles = Vec::with_capacity(total);
    for (lane, classes) in [(Lane::Right, right_classes), (Lane::Left, vec![VehicleClass::Car; n_left])] {
        if classes.is_empty() {
            continue;
        }
        let spacing = config.road_length / classes.len() as f64;
        let mut lane_vehicles: Vec<Vehicle> = classes
            .iter()
            .enumerate()
            .map(|(k, &class)| {
                let cc = match class {
                    VehicleClass::Car => &config.car,
                    VehicleClass::Truck => &config.truck,
                };
                Vehicle {
                    track: 0,
                    class,
                    length: cc.length,
                    width: cc.width,
                    driver: jittered(&cc.driver, cc.jitter, rng),
                    x: k as f64 * spacing,
                    y: config.lane_center(lane),
                    v: 0.0,
                    a: 0.0,
                    v_y: 0.0,
                    a_y: 0.0,
                    lane,
                    maneuver: None,
                    phase: 0,
                }
            })
            .collect();
        let n = lane_vehicles.len();
        let mut speed = f64::INFINITY;
        for k in 0..n {
            let lead = &lane_vehicles[(k + 1) % n];
            let me = &lane_vehicles[k];
            let p = pair_params(&me.driver, me.length, lead.length);
            if spacing <= p.length + 1.0 {
                return Err(Error::Config(format!(
                    "initial spacing {spacing:.2} m on the {lane} lane is below the jam spacing {:.2} m + 1 m",
                    p.length
                )));
            }
            speed = speed.min(equilibrium_speed(spacing, &p));
        }
        lane_vehicles.iter_mut().for_each(|v| v.v = speed);
        vehicles.extend(lane_vehicles);
    }
    let steps = (config.decision_interval / config.dt).round().max(1.0) as i64;
    for (i, v) in vehicles.iter_mut().enumerate() {
        v.track = i as u64 + 1;
        v.phase = rng.gen_range(0..steps);
    }
    Ok(vehicles)
}

/// Nearest vehicle ahead of `i` among those occupying `lane`:
/// `(speed, spacing, length)`.
fn leader(vehicles: &[Vehicle], i: usize, lane: Lane, road: f64) -> Option<(f64, f64, f64)> {
    let me = &vehicles[i];
    let mut best: Option<(f64, usize)> = None;
    for (j, o) in vehicles.iter().enumerate() {
        if j == i || !o.occupies(lane) {
            continue;
        }
        let mut d = (o.x - me.x).rem_euclid(road);
        if d == 0.0 && j < i {
            d = road;
        }
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    best.map(|(d, j)| (vehicles[j].v, d, vehicles[j].length))
}

fn track_frame(v: &Vehicle, frame: i64, meta: &RecordingMeta) -> TrackFrame {
    TrackFrame {
        vehicle_id: v.track,
        frame,
        x: v.x,
        y: v.y,
        v_x: v.v,
        v_y: v.v_y,
        a_x: v.a,
        a_y: v.a_y,
        lane: meta.lane_of(v.y),
        length: v.length,
        width: v.width,
        class: v.class,
    }
}

/// Runs a scenario. Deterministic for a given configuration.
pub fn simulate(config: &ScenarioConfig) -> Result<SimulationOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vehicles = initial_vehicles(config, &mut rng)?;
    run(config, vehicles, rng)
}

fn run(config: &ScenarioConfig, mut vehicles: Vec<Vehicle>, mut rng: ChaCha8Rng) -> Result<SimulationOutput> {
    let meta = config.meta();
    let mut next_track = vehicles.len() as u64 + 1;
    let noise = Normal::new(0.0, config.accel_noise.max(1e-300)).expect("finite sd");
    let steps = (config.duration / config.dt).round() as i64;
    let decision_steps = (config.decision_interval / config.dt).round().max(1.0) as i64;
    let warmup_steps = (config.warmup / config.dt).round() as i64;
    let spec = FeatureSpec { horizon: 0.0, ..FeatureSpec::default() };

    let mut tracks: BTreeMap<u64, Vec<TrackFrame>> = BTreeMap::new();
    let mut events = Vec::new();
    let mut decisions = Vec::new();

    for step in 0..steps {
        let frame = step;
        let t = step as f64 * config.dt;
        let snapshot: Vec<TrackFrame> = vehicles.iter().map(|v| track_frame(v, frame, &meta)).collect();
        for f in &snapshot {
            tracks.entry(f.vehicle_id).or_default().push(f.clone());
        }

        if step >= warmup_steps {
            for i in 0..vehicles.len() {
                if vehicles[i].maneuver.is_some() || (step + vehicles[i].phase) % decision_steps != 0 {
                    continue;
                }
                let lane = vehicles[i].lane;
                let mut sample = snapshot_sample(&snapshot[i], &snapshot, &meta, Maneuver::keep(lane), &spec);
                let inputs = MobilInputs::from_sample(&sample);
                let params = config.mobil(lane);
                let acc = inputs
                    .accelerations::<f64>(&params.to_vector(), true)
                    .expect("floored gaps never fail");
                let (safety, mut incentive) = margins(&acc, params.politeness, params.threshold, lane);
                if let Some(h) = &config.hidden_term {
                    incentive += h.value(&sample);
                }
                let rule_change = safety >= 0.0 && incentive > 0.0;
                let flipped = config.decision_noise > 0.0 && rng.gen::<f64>() < config.decision_noise;
                let mut change = rule_change ^ flipped;
                if change && flipped && !physically_free(&vehicles, i, lane.other(), config.road_length) {
                    // a noise-induced change into an occupied gap is not executed
                    change = false;
                }
                if change {
                    sample.maneuver = Maneuver::change(lane);
                    let v = &mut vehicles[i];
                    v.maneuver = Some(Maneuvering { from: lane, start: t, decision_frame: frame, crossed: false });
                    v.lane = lane.other();
                }
                decisions.push(DecisionRecord { sample, class: vehicles[i].class, rule_change, flipped });
            }
        }

        // longitudinal accelerations from the current state
        let accels: Vec<f64> = (0..vehicles.len())
            .map(|i| {
                let v = &vehicles[i];
                let mut a = follow(&v.driver, v.length, v.v, leader(&vehicles, i, v.lane, config.road_length));
                if let Some(m) = &v.maneuver {
                    let other = follow(&v.driver, v.length, v.v, leader(&vehicles, i, m.from, config.road_length));
                    a = a.min(other);
                }
                if config.accel_noise > 0.0 {
                    a += noise.sample(&mut rng);
                }
                a
            })
            .collect();

        for (v, a) in vehicles.iter_mut().zip(accels) {
            v.x += v.v * config.dt;
            v.a = a;
            v.v = (v.v + a * config.dt).max(0.0);
            if v.x >= config.road_length {
                v.x -= config.road_length;
                v.track = next_track;
                next_track += 1;
            }
            if let Some(m) = &mut v.maneuver {
                let (y0, y1) = (config.lane_center(m.from), config.lane_center(v.lane));
                let s = ((t + config.dt - m.start) / config.lane_change_duration).min(1.0);
                let w = std::f64::consts::PI / config.lane_change_duration;
                let phase = std::f64::consts::PI * s;
                v.y = y0 + (y1 - y0) * 0.5 * (1.0 - phase.cos());
                v.v_y = if s < 1.0 { (y1 - y0) * 0.5 * w * phase.sin() } else { 0.0 };
                v.a_y = if s < 1.0 { (y1 - y0) * 0.5 * w * w * phase.cos() } else { 0.0 };
                if !m.crossed && meta.lane_of(v.y) != m.from {
                    m.crossed = true;
                    events.push(LaneChangeEvent {
                        vehicle_id: v.track,
                        decision_frame: m.decision_frame,
                        crossing_frame: frame + 1,
                        direction: match m.from {
                            Lane::Right => CrossingDirection::Overtaking,
                            Lane::Left => CrossingDirection::FoldDown,
                        },
                    });
                }
                if s >= 1.0 {
                    v.maneuver = None;
                }
            }
        }
    }

    let mut trajectories = Vec::with_capacity(tracks.len());
    for (id, frames) in tracks {
        trajectories.push(build_trajectory(id, frames)?);
    }
    // events whose crossing fell after the last recorded frame are dropped
    events.retain(|e| e.crossing_frame < steps);
    Ok(SimulationOutput { recording: Recording::new(meta, trajectories), events, decisions })
}

/// True when `i` fits between its would-be neighbours on `lane` without
/// bumper overlap.
fn physically_free(vehicles: &[Vehicle], i: usize, lane: Lane, road: f64) -> bool {
    let me = &vehicles[i];
    vehicles.iter().enumerate().all(|(j, o)| {
        if j == i || !o.occupies(lane) {
            return true;
        }
        let d = (o.x - me.x).rem_euclid(road);
        let dist = d.min(road - d);
        dist > 0.5 * (me.length + o.length) + me.driver.min_gap
    })
}

/// Writes the ground-truth event file.
pub fn write_events<W: Write>(writer: W, events: &[LaneChangeEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["vehicle_id", "decision_frame", "crossing_frame", "direction"])?;
    for e in events {
        wtr.write_record([
            e.vehicle_id.to_string(),
            e.decision_frame.to_string(),
            e.crossing_frame.to_string(),
            e.direction.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_events_file(path: impl AsRef<Path>, events: &[LaneChangeEvent]) -> Result<()> {
    write_events(std::fs::File::create(path)?, events)
}

pub fn read_events_file(path: impl AsRef<Path>) -> Result<Vec<LaneChangeEvent>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_err = |msg: String| Error::Parse { path: path.to_path_buf(), line: k as u64 + 2, msg };
        let int = |i: usize| -> Result<i64> {
            rec.get(i)
                .ok_or_else(|| parse_err(format!("missing column {i}")))?
                .parse::<i64>()
                .map_err(|e| parse_err(e.to_string()))
        };
        out.push(LaneChangeEvent {
            vehicle_id: int(0)? as u64,
            decision_frame: int(1)?,
            crossing_frame: int(2)?,
            direction: rec.get(3).unwrap_or("").parse().map_err(|e: Error| parse_err(e.to_string()))?,
        });
    }
    Ok(out)
}

/// How the benchmark labels are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Labels are the generator's own noise-free-rule decisions.
    MobilTruth,
    /// The generator adds a hidden truck term to the incentive.
    NoisyNonlinear,
}

impl std::str::FromStr for LabelRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mobil_truth" => Ok(LabelRule::MobilTruth),
            "noisy_nonlinear" => Ok(LabelRule::NoisyNonlinear),
            other => Err(Error::Config(format!("unknown label rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub scenario: ScenarioConfig,
    pub rule: LabelRule,
    /// Lane-keeping decisions are subsampled to at most this many per lane
    /// change, per lane.
    pub keep_ratio: f64,
    pub include_trucks: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            scenario: ScenarioConfig::default(),
            rule: LabelRule::MobilTruth,
            keep_ratio: 4.0,
            include_trucks: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub samples: Vec<ManeuverSample>,
    pub output: SimulationOutput,
}

/// Simulates and returns labeled samples measured at the generator's
/// decision instants. The scenario's hidden term is cleared for
/// `MobilTruth` and defaulted for `NoisyNonlinear`.
pub fn generate_benchmark(config: &BenchmarkConfig) -> Result<Benchmark> {
    if !(config.keep_ratio > 0.0) {
        return Err(Error::Config(format!("keep_ratio must be > 0, got {}", config.keep_ratio)));
    }
    let mut scenario = config.scenario.clone();
    scenario.hidden_term = match config.rule {
        LabelRule::MobilTruth => None,
        LabelRule::NoisyNonlinear => Some(scenario.hidden_term.unwrap_or_default()),
    };
    let output = simulate(&scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x5eed_5a3b_1e00_0001);
    let mut samples = Vec::new();
    for lane in [Lane::Right, Lane::Left] {
        let eligible: Vec<&DecisionRecord> = output
            .decisions
            .iter()
            .filter(|d| d.sample.lane() == lane && (config.include_trucks || d.class == VehicleClass::Car))
            .collect();
        let changes = eligible.iter().filter(|d| d.sample.is_lane_change()).count();
        let keeps = eligible.len() - changes;
        let budget = ((changes as f64 * config.keep_ratio).round() as usize).min(keeps);
        // selection sampling keeps the original order
        let mut remaining = keeps;
        let mut needed = budget;
        for d in eligible {
            if d.sample.is_lane_change() {
                samples.push(d.sample.clone());
                continue;
            }
            if needed > 0 && rng.gen_range(0..remaining) < needed {
                samples.push(d.sample.clone());
                needed -= 1;
            }
            remaining -= 1;
        }
    }
    samples.sort_by_key(|s| (s.frame, s.vehicle_id));
    Ok(Benchmark { samples, output })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::centerline_crossings;
    use crate::mobil::mobil_decide_total;
    use crate::mobil::tests::equilibrium_spacing;

    fn quiet() -> ScenarioConfig {
        ScenarioConfig { warmup: 1e9, ..ScenarioConfig::default() }
    }

    #[test]
    fn free_flow_relaxes_to_desired_speed() {
        let mut c = quiet();
        c.n_cars = 1;
        c.n_trucks = 0;
        c.car.jitter = 0.0;
        c.duration = 121.0;
        let out = simulate(&c).unwrap();
        let mut speeds: Vec<(i64, f64)> = Vec::new();
        for t in &out.recording.trajectories {
            speeds.extend(t.frames.iter().map(|f| (f.frame, f.v_x)));
        }
        speeds.sort_by_key(|s| s.0);
        assert!(speeds.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12));
        let last = speeds.last().unwrap().1;
        assert!((last - c.car.driver.desired_speed).abs() < 0.01, "{last}");
        // one track per lap
        assert!(out.recording.trajectories.len() > 1);
        for t in &out.recording.trajectories {
            assert!(t.frames.iter().all(|f| f.x >= 0.0 && f.x < c.road_length));
        }
    }

    fn placed(c: &ScenarioConfig, class: VehicleClass, x: f64, v: f64) -> Vehicle {
        let cc = if class == VehicleClass::Car { c.car } else { c.truck };
        Vehicle {
            track: 0,
            class,
            length: cc.length,
            width: cc.width,
            driver: cc.driver,
            x,
            y: c.lane_center(Lane::Right),
            v,
            a: 0.0,
            v_y: 0.0,
            a_y: 0.0,
            lane: Lane::Right,
            maneuver: None,
            phase: 0,
        }
    }

    fn run_placed(c: &ScenarioConfig, mut vehicles: Vec<Vehicle>) -> SimulationOutput {
        for (i, v) in vehicles.iter_mut().enumerate() {
            v.track = i as u64 + 1;
        }
        run(c, vehicles, ChaCha8Rng::seed_from_u64(c.seed)).unwrap()
    }

    /// A car trailing a truck settles at the equilibrium spacing for the
    /// truck's speed.
    #[test]
    fn platoon_gap_matches_equilibrium_oracle() {
        let c = ScenarioConfig { road_length: 3000.0, duration: 600.0, ..quiet() };
        let out = run_placed(
            &c,
            vec![placed(&c, VehicleClass::Car, 0.0, 30.0), placed(&c, VehicleClass::Truck, 150.0, 20.0)],
        );
        let end = out.recording.trajectories.iter().map(|t| t.last_frame()).max().unwrap();
        let snap: Vec<&TrackFrame> = out.recording.frames_at(end).collect();
        let car = snap.iter().find(|f| f.class == VehicleClass::Car).unwrap();
        let truck = snap.iter().find(|f| f.class == VehicleClass::Truck).unwrap();
        let spacing = (truck.x - car.x).rem_euclid(c.road_length);
        let oracle = equilibrium_spacing(car.v_x, &pair_params(&c.car.driver, 4.5, 15.0));
        assert!((car.v_x - truck.v_x).abs() < 1e-3);
        assert!((spacing - oracle).abs() < 0.1, "spacing {spacing} vs oracle {oracle}");
    }

    #[test]
    fn over_density_is_rejected() {
        let c = ScenarioConfig { road_length: 100.0, n_cars: 40, ..ScenarioConfig::default() };
        assert!(matches!(simulate(&c), Err(Error::Config(_))));
    }

    #[test]
    fn slow_truck_is_overtaken_once() {
        let c = ScenarioConfig {
            road_length: 4000.0,
            duration: 150.0,
            warmup: 0.0,
            mobil_right: MobilParams::highd_right(),
            mobil_left: MobilParams::highd_left(),
            ..Default::default()
        };
        let out = run_placed(
            &c,
            vec![placed(&c, VehicleClass::Car, 0.0, 33.0), placed(&c, VehicleClass::Truck, 120.0, 24.0)],
        );
        let dirs: Vec<CrossingDirection> = out.events.iter().map(|e| e.direction).collect();
        assert!(
            dirs == [CrossingDirection::Overtaking] || dirs == [CrossingDirection::Overtaking, CrossingDirection::FoldDown],
            "{dirs:?}"
        );
    }

    #[test]
    fn no_collisions_and_conserved_vehicle_count() {
        let c = ScenarioConfig { duration: 300.0, ..ScenarioConfig::default() };
        let out = simulate(&c).unwrap();
        let n = c.n_cars + c.n_trucks;
        let last = out.recording.trajectories.iter().map(|t| t.last_frame()).max().unwrap();
        for frame in (0..=last).step_by(5) {
            let snap: Vec<&TrackFrame> = out.recording.frames_at(frame).collect();
            assert_eq!(snap.len(), n);
            for lane in [Lane::Right, Lane::Left] {
                let mut xs: Vec<(f64, f64)> =
                    snap.iter().filter(|f| f.lane == lane).map(|f| (f.x, f.length)).collect();
                xs.sort_by(|a, b| a.0.total_cmp(&b.0));
                for k in 0..xs.len() {
                    if xs.len() < 2 {
                        break;
                    }
                    let (x0, l0) = xs[k];
                    let (x1, l1) = xs[(k + 1) % xs.len()];
                    let d = (x1 - x0).rem_euclid(c.road_length);
                    assert!(d > 0.5 * (l0 + l1), "overlap at frame {frame}: {d}");
                }
            }
        }
        assert!(!out.events.is_empty());
    }

    #[test]
    fn events_match_recorded_crossings() {
        let c = ScenarioConfig { duration: 200.0, ..ScenarioConfig::default() };
        let out = simulate(&c).unwrap();
        let mut from_tracks: Vec<(u64, i64)> = Vec::new();
        for t in &out.recording.trajectories {
            for x in centerline_crossings(t, &out.recording.meta) {
                from_tracks.push((t.vehicle_id, x.frame));
            }
        }
        from_tracks.sort();
        let mut logged: Vec<(u64, i64)> = out.events.iter().map(|e| (e.vehicle_id, e.crossing_frame)).collect();
        logged.sort();
        assert_eq!(from_tracks, logged);
        for e in &out.events {
            assert!(e.crossing_frame > e.decision_frame);
        }
    }

    #[test]
    fn is_deterministic() {
        let c = ScenarioConfig { duration: 60.0, accel_noise: 0.2, decision_noise: 0.1, ..Default::default() };
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a.recording.trajectories, b.recording.trajectories);
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn noise_free_truth_labels_follow_the_rule() {
        let cfg = BenchmarkConfig {
            scenario: ScenarioConfig { duration: 300.0, ..Default::default() },
            ..Default::default()
        };
        let bench = generate_benchmark(&cfg).unwrap();
        assert!(bench.samples.iter().any(|s| s.is_lane_change()));
        for s in &bench.samples {
            let lane = s.lane();
            let params = cfg.scenario.mobil(lane);
            let d = mobil_decide_total(&MobilInputs::from_sample(s), params, lane);
            assert_eq!(d.is_change(), s.is_lane_change());
        }
    }

    #[test]
    fn zero_duration_gives_no_samples() {
        let cfg = BenchmarkConfig {
            scenario: ScenarioConfig { duration: 0.0, ..Default::default() },
            ..Default::default()
        };
        assert!(generate_benchmark(&cfg).unwrap().samples.is_empty());
    }

    #[test]
    fn events_round_trip() {
        let events = vec![LaneChangeEvent {
            vehicle_id: 3,
            decision_frame: 10,
            crossing_frame: 25,
            direction: CrossingDirection::FoldDown,
        }];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("events.csv");
        write_events_file(&p, &events).unwrap();
        assert_eq!(read_events_file(&p).unwrap(), events);
    }
}
