//! Maneuver samples: the maneuver class plus up to 24 explanatory variables
//! measured a horizon `τ` before the center-line crossing.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{
    centerline_crossings, neighbors_in_snapshot, CrossingDirection, Lane, Neighbor, NeighborSet, Recording,
    RecordingMeta, TrackFrame, Trajectory, VehicleClass,
};
use crate::{Error, Result};

/// Speeds below this are clamped when dividing by `v_x` for time gaps.
pub const MIN_GAP_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Maneuver {
    #[serde(rename = "LKR")]
    KeepRight,
    #[serde(rename = "LKL")]
    KeepLeft,
    #[serde(rename = "FD")]
    FoldDown,
    #[serde(rename = "OV")]
    Overtake,
}

impl Maneuver {
    pub const ALL: [Maneuver; 4] = [Maneuver::KeepRight, Maneuver::KeepLeft, Maneuver::FoldDown, Maneuver::Overtake];

    pub fn is_lane_change(self) -> bool {
        matches!(self, Maneuver::FoldDown | Maneuver::Overtake)
    }

    /// Lane the subject is on when the maneuver is measured.
    pub fn origin_lane(self) -> Lane {
        match self {
            Maneuver::KeepRight | Maneuver::Overtake => Lane::Right,
            Maneuver::KeepLeft | Maneuver::FoldDown => Lane::Left,
        }
    }

    pub fn keep(lane: Lane) -> Maneuver {
        match lane {
            Lane::Right => Maneuver::KeepRight,
            Lane::Left => Maneuver::KeepLeft,
        }
    }

    pub fn change(lane: Lane) -> Maneuver {
        match lane {
            Lane::Right => Maneuver::Overtake,
            Lane::Left => Maneuver::FoldDown,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Maneuver::KeepRight => "LKR",
            Maneuver::KeepLeft => "LKL",
            Maneuver::FoldDown => "FD",
            Maneuver::Overtake => "OV",
        }
    }
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for Maneuver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Maneuver::ALL
            .into_iter()
            .find(|m| m.code() == s)
            .ok_or_else(|| Error::Config(format!("unknown maneuver {s:?}")))
    }
}

/// Slot order used everywhere: P, F, PA, FA.
pub const NEIGHBOR_NAMES: [&str; 4] = ["P", "F", "PA", "FA"];
pub const PREDECESSOR: usize = 0;
pub const FOLLOWER: usize = 1;
pub const ADJ_PREDECESSOR: usize = 2;
pub const ADJ_FOLLOWER: usize = 3;

/// Variables measured with one surrounding vehicle. Absent neighbours carry
/// `NaN` in the four continuous fields until imputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborFeatures {
    pub spacing: f64,
    pub speed_diff: f64,
    pub time_gap: f64,
    pub accel: f64,
    pub class: f64,
    pub present: bool,
}

impl NeighborFeatures {
    pub fn absent() -> NeighborFeatures {
        NeighborFeatures {
            spacing: f64::NAN,
            speed_diff: f64::NAN,
            time_gap: f64::NAN,
            accel: f64::NAN,
            class: 0.0,
            present: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverSample {
    pub vehicle_id: u64,
    /// Measurement frame.
    pub frame: i64,
    pub maneuver: Maneuver,
    pub v_x: f64,
    pub v_y: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub length: f64,
    pub horizon: f64,
    pub neighbors: [NeighborFeatures; 4],
}

impl ManeuverSample {
    pub fn lane(&self) -> Lane {
        self.maneuver.origin_lane()
    }

    pub fn is_lane_change(&self) -> bool {
        self.maneuver.is_lane_change()
    }

    pub fn predecessor(&self) -> &NeighborFeatures {
        &self.neighbors[PREDECESSOR]
    }

    /// Explanatory variables for a subset, in [`feature_names`] order.
    pub fn features(&self, subset: FeatureSubset) -> Vec<f64> {
        let mut out = Vec::with_capacity(subset.arity());
        match subset {
            FeatureSubset::Mobil8 => {
                for n in &self.neighbors {
                    out.push(n.spacing);
                    out.push(n.speed_diff);
                }
            }
            FeatureSubset::Full24 => {
                out.extend([self.v_x, self.v_y, self.a_x, self.a_y]);
                for n in &self.neighbors {
                    out.extend([n.spacing, n.speed_diff, n.time_gap, n.accel, n.class]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubset {
    /// Spacing and speed difference with the four neighbours.
    Mobil8,
    Full24,
}

impl FeatureSubset {
    pub fn arity(self) -> usize {
        match self {
            FeatureSubset::Mobil8 => 8,
            FeatureSubset::Full24 => 24,
        }
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSubset::Mobil8 => "mobil8",
            FeatureSubset::Full24 => "full24",
        })
    }
}

impl std::str::FromStr for FeatureSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mobil8" => Ok(FeatureSubset::Mobil8),
            "full24" => Ok(FeatureSubset::Full24),
            other => Err(Error::Config(format!("unknown feature subset {other:?}"))),
        }
    }
}

pub fn feature_names(subset: FeatureSubset) -> Vec<String> {
    let mut out = Vec::new();
    match subset {
        FeatureSubset::Mobil8 => {
            for s in NEIGHBOR_NAMES {
                out.push(format!("dx_{s}"));
                out.push(format!("dv_{s}"));
            }
        }
        FeatureSubset::Full24 => {
            out.extend(["v_x", "v_y", "a_x", "a_y"].map(String::from));
            for s in NEIGHBOR_NAMES {
                for v in ["dx", "dv", "T", "ax", "C"] {
                    out.push(format!("{v}_{s}"));
                }
            }
        }
    }
    out
}

/// Values written into absent-neighbour slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Imputation {
    /// Spacing standing for a free road (m).
    pub spacing: f64,
}

impl Default for Imputation {
    fn default() -> Self {
        Imputation { spacing: 500.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub subset: FeatureSubset,
    /// Horizon τ before the crossing (s).
    pub horizon: f64,
    pub imputation: Imputation,
    /// Let trucks be subjects too (default: cars only).
    pub include_trucks: bool,
    /// Use the velocities/accelerations stored in the recording instead of
    /// finite differences of positions.
    pub recorded_kinematics: bool,
    /// Finite-difference step δt (s).
    pub delta_t: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            subset: FeatureSubset::Mobil8,
            horizon: 2.0,
            imputation: Imputation::default(),
            include_trucks: false,
            recorded_kinematics: false,
            delta_t: 0.1,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        if !(self.delta_t > 0.0) {
            return Err(Error::Config(format!("delta_t must be > 0, got {}", self.delta_t)));
        }
        if !(self.imputation.spacing > 0.0) {
            return Err(Error::Config("imputation spacing must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub v_x: f64,
    pub v_y: f64,
    pub a_x: f64,
    pub a_y: f64,
}

impl Kinematics {
    pub fn recorded(f: &TrackFrame) -> Kinematics {
        Kinematics { v_x: f.v_x, v_y: f.v_y, a_x: f.a_x, a_y: f.a_y }
    }
}

/// Half-step of the centered differences in frames, and the effective δt.
///
/// δt/2 is rounded to a whole number of frames (at least one).
pub fn difference_step(frame_rate: f64, delta_t: f64) -> (i64, f64) {
    let half = ((delta_t * frame_rate / 2.0).round() as i64).max(1);
    (half, 2.0 * half as f64 / frame_rate)
}

/// Centered finite differences of position: velocities over one δt and
/// accelerations as differences of the half-step-shifted velocities.
/// `None` when the trajectory lacks the frames at `t ± δt`.
pub fn finite_difference_kinematics(
    trajectory: &Trajectory,
    frame: i64,
    frame_rate: f64,
    delta_t: f64,
) -> Option<Kinematics> {
    let (h, dt) = difference_step(frame_rate, delta_t);
    let at = |k: i64| trajectory.at(frame + k * h);
    let (m2, m1, p1, p2) = (at(-2)?, at(-1)?, at(1)?, at(2)?);
    let c = at(0)?;
    let vel = |a: &TrackFrame, b: &TrackFrame| ((b.x - a.x) / dt, (b.y - a.y) / dt);
    let (v_x, v_y) = vel(m1, p1);
    let (vx_plus, vy_plus) = vel(c, p2);
    let (vx_minus, vy_minus) = vel(m2, c);
    Some(Kinematics {
        v_x,
        v_y,
        a_x: (vx_plus - vx_minus) / dt,
        a_y: (vy_plus - vy_minus) / dt,
    })
}

fn time_gap(spacing: f64, length: f64, other_length: f64, v_x: f64) -> f64 {
    (spacing - (length + other_length) / 2.0) / v_x.max(MIN_GAP_SPEED)
}

/// Builds a sample from a subject frame, its kinematics and neighbours.
/// `neighbor_kinematics` supplies the neighbour velocity and acceleration.
pub fn assemble_sample<F>(
    subject: &TrackFrame,
    kin: Kinematics,
    neighbors: &NeighborSet<'_>,
    maneuver: Maneuver,
    horizon: f64,
    mut neighbor_kinematics: F,
) -> ManeuverSample
where
    F: FnMut(&TrackFrame) -> (f64, f64),
{
    let mut describe = |slot: Option<Neighbor<'_>>| match slot {
        None => NeighborFeatures::absent(),
        Some(n) => {
            let (v, a) = neighbor_kinematics(n.frame);
            NeighborFeatures {
                spacing: n.spacing,
                speed_diff: v - kin.v_x,
                time_gap: time_gap(n.spacing, subject.length, n.frame.length, kin.v_x),
                accel: a,
                class: n.frame.class.indicator(),
                present: true,
            }
        }
    };
    let neighbors = [
        describe(neighbors.predecessor),
        describe(neighbors.follower),
        describe(neighbors.adjacent_predecessor),
        describe(neighbors.adjacent_follower),
    ];
    ManeuverSample {
        vehicle_id: subject.vehicle_id,
        frame: subject.frame,
        maneuver,
        v_x: kin.v_x,
        v_y: kin.v_y,
        a_x: kin.a_x,
        a_y: kin.a_y,
        length: subject.length,
        horizon,
        neighbors,
    }
}

/// Sample from a single-frame snapshot using recorded kinematics. The
/// simulator uses this for its own MOBIL decisions.
pub fn snapshot_sample<'a, I>(
    subject: &TrackFrame,
    snapshot: I,
    meta: &RecordingMeta,
    maneuver: Maneuver,
    spec: &FeatureSpec,
) -> ManeuverSample
where
    I: IntoIterator<Item = &'a TrackFrame>,
{
    let neighbors = neighbors_in_snapshot(subject, snapshot, meta);
    let sample = assemble_sample(
        subject,
        Kinematics::recorded(subject),
        &neighbors,
        maneuver,
        spec.horizon,
        |f| (f.v_x, f.a_x),
    );
    impute_missing(&sample, spec)
}

/// Sample for `(vehicle, frame)` in a recording, or `None` when the
/// kinematics cannot be computed at that frame. The result is imputed.
pub fn measure(
    recording: &Recording,
    trajectory: &Trajectory,
    frame: i64,
    maneuver: Maneuver,
    spec: &FeatureSpec,
) -> Option<ManeuverSample> {
    let subject = trajectory.at(frame)?;
    let meta = &recording.meta;
    let kin = if spec.recorded_kinematics {
        Kinematics::recorded(subject)
    } else {
        finite_difference_kinematics(trajectory, frame, meta.frame_rate, spec.delta_t)?
    };
    let neighbors = recording.resolve_neighbors(trajectory.vehicle_id, frame)?;
    let sample = assemble_sample(subject, kin, &neighbors, maneuver, spec.horizon, |f| {
        if spec.recorded_kinematics {
            return (f.v_x, f.a_x);
        }
        // Neighbours near the end of their track fall back to recorded values.
        recording
            .trajectory(f.vehicle_id)
            .and_then(|t| finite_difference_kinematics(t, frame, meta.frame_rate, spec.delta_t))
            .map_or((f.v_x, f.a_x), |k| (k.v_x, k.a_x))
    });
    Some(impute_missing(&sample, spec))
}

/// Fills absent neighbours with the free-road convention: spacing from the
/// imputation constant, zero speed difference and acceleration, car class,
/// and the time gap from the same formula with the subject's length.
pub fn impute_missing(sample: &ManeuverSample, spec: &FeatureSpec) -> ManeuverSample {
    let mut out = sample.clone();
    let spacing = spec.imputation.spacing;
    for n in out.neighbors.iter_mut().filter(|n| !n.present) {
        n.spacing = spacing;
        n.speed_diff = 0.0;
        n.time_gap = time_gap(spacing, sample.length, sample.length, sample.v_x);
        n.accel = 0.0;
        n.class = 0.0;
    }
    out
}

/// Why a candidate subject produced no sample.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    /// Trucks when only cars are subjects.
    pub excluded_class: usize,
    /// Crossings without τ seconds (plus the difference stencil) of history.
    pub short_history: usize,
    /// Crossings whose measurement frame is not on the origin lane.
    pub lane_mismatch: usize,
    /// Lane keepers too short for the difference stencil at the midpoint.
    pub short_track: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub samples: Vec<ManeuverSample>,
    pub skipped: SkipCounts,
}

/// Extracts one sample per crossing (measured `τ` before it) and one per
/// lane-keeping vehicle (measured at the trajectory midpoint). Output is
/// ordered by `(vehicle_id, frame)`.
pub fn extract_samples(recording: &Recording, spec: &FeatureSpec) -> Result<Extraction> {
    spec.validate()?;
    let meta = &recording.meta;
    let horizon_frames = meta.frames_for(spec.horizon);
    let mut out = Extraction::default();
    for traj in &recording.trajectories {
        if traj.class == VehicleClass::Truck && !spec.include_trucks {
            out.skipped.excluded_class += 1;
            continue;
        }
        let crossings = centerline_crossings(traj, meta);
        if crossings.is_empty() {
            let mid = traj.frames[traj.len() / 2].frame;
            let lane = traj.frames[traj.len() / 2].lane;
            match measure(recording, traj, mid, Maneuver::keep(lane), spec) {
                Some(s) => out.samples.push(s),
                None => out.skipped.short_track += 1,
            }
            continue;
        }
        for c in crossings {
            let m = c.frame - horizon_frames;
            let maneuver = match c.direction {
                CrossingDirection::Overtaking => Maneuver::Overtake,
                CrossingDirection::FoldDown => Maneuver::FoldDown,
            };
            let Some(at) = traj.at(m) else {
                out.skipped.short_history += 1;
                continue;
            };
            if meta.lane_of(at.y) != maneuver.origin_lane() {
                out.skipped.lane_mismatch += 1;
                continue;
            }
            match measure(recording, traj, m, maneuver, spec) {
                Some(s) => out.samples.push(s),
                None => out.skipped.short_history += 1,
            }
        }
    }
    out.samples.sort_by_key(|s| (s.vehicle_id, s.frame));
    Ok(out)
}

const TABLE_HEADER_BASE: [&str; 10] =
    ["vehicle_id", "frame", "maneuver", "lane", "horizon", "length", "v_x", "v_y", "a_x", "a_y"];

fn table_header() -> Vec<String> {
    let mut h: Vec<String> = TABLE_HEADER_BASE.iter().map(|s| s.to_string()).collect();
    for s in NEIGHBOR_NAMES {
        for v in ["dx", "dv", "T", "ax", "C", "present"] {
            h.push(format!("{v}_{s}"));
        }
    }
    h
}

/// Writes the sample table: one row per sample in [`table_header`] order.
pub fn write_samples<W: Write>(writer: W, samples: &[ManeuverSample]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(table_header())?;
    for s in samples {
        let mut row = vec![
            s.vehicle_id.to_string(),
            s.frame.to_string(),
            s.maneuver.to_string(),
            s.lane().to_string(),
            s.horizon.to_string(),
            s.length.to_string(),
            s.v_x.to_string(),
            s.v_y.to_string(),
            s.a_x.to_string(),
            s.a_y.to_string(),
        ];
        for n in &s.neighbors {
            row.extend([
                n.spacing.to_string(),
                n.speed_diff.to_string(),
                n.time_gap.to_string(),
                n.accel.to_string(),
                n.class.to_string(),
                u8::from(n.present).to_string(),
            ]);
        }
        wtr.write_record(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_samples_file(path: impl AsRef<Path>, samples: &[ManeuverSample]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_samples(std::io::BufWriter::new(file), samples)
}

pub fn read_samples<R: Read>(reader: R, origin: &Path) -> Result<Vec<ManeuverSample>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let expected = table_header();
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            msg: "unexpected sample table header".into(),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::Parse { path: origin.to_path_buf(), line, msg };
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", expected[i])))
        };
        let mut neighbors = [NeighborFeatures::absent(); 4];
        for (k, n) in neighbors.iter_mut().enumerate() {
            let base = 10 + 6 * k;
            *n = NeighborFeatures {
                spacing: num(base)?,
                speed_diff: num(base + 1)?,
                time_gap: num(base + 2)?,
                accel: num(base + 3)?,
                class: num(base + 4)?,
                present: &rec[base + 5] == "1",
            };
        }
        out.push(ManeuverSample {
            vehicle_id: rec[0].parse().map_err(|e| bad(format!("vehicle_id: {e}")))?,
            frame: rec[1].parse().map_err(|e| bad(format!("frame: {e}")))?,
            maneuver: rec[2].parse().map_err(|_| bad(format!("maneuver {:?}", &rec[2])))?,
            horizon: num(4)?,
            length: num(5)?,
            v_x: num(6)?,
            v_y: num(7)?,
            a_x: num(8)?,
            a_y: num(9)?,
            neighbors,
        });
    }
    Ok(out)
}

pub fn read_samples_file(path: impl AsRef<Path>) -> Result<Vec<ManeuverSample>> {
    let path = path.as_ref();
    read_samples(std::fs::File::open(path)?, path)
}
