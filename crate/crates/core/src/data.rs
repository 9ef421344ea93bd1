//! Trajectory recordings: parsing, validation, neighbour resolution and
//! center-line crossings.
//!
//! Track files use a HighD-compatible subset of columns
//! (`frame,id,x,y,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId,width,height,class`).
//! Extra columns are ignored. `x`/`y` are taken as the vehicle center and
//! `width` as the vehicle length along the road, as in HighD.
//!
//! All coordinates are normalized at load time so that `+x` is the direction
//! of travel and the right (slow) lane lies at smaller `y` than the left lane.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lane {
    Right,
    Left,
}

impl Lane {
    pub fn other(self) -> Lane {
        match self {
            Lane::Right => Lane::Left,
            Lane::Left => Lane::Right,
        }
    }

    /// `laneId` written to track files: 1 for the right lane, 2 for the left.
    pub fn lane_id(self) -> u32 {
        match self {
            Lane::Right => 1,
            Lane::Left => 2,
        }
    }
}

impl fmt::Display for Lane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lane::Right => f.write_str("right"),
            Lane::Left => f.write_str("left"),
        }
    }
}

impl std::str::FromStr for Lane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "right" | "r" => Ok(Lane::Right),
            "left" | "l" => Ok(Lane::Left),
            other => Err(Error::Config(format!("unknown lane {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Car,
    Truck,
}

impl VehicleClass {
    /// Class indicator used as an explanatory variable (truck = 1).
    pub fn indicator(self) -> f64 {
        match self {
            VehicleClass::Car => 0.0,
            VehicleClass::Truck => 1.0,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" => Some(VehicleClass::Car),
            "truck" | "bus" => Some(VehicleClass::Truck),
            _ => None,
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VehicleClass::Car => f.write_str("Car"),
            VehicleClass::Truck => f.write_str("Truck"),
        }
    }
}

/// Orientation of the raw coordinates in a track file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Carriageway {
    /// Already normalized: travel along `+x`, right lane at smaller `y`.
    Forward,
    /// HighD upper carriageway: travel along `-x`, image `y` pointing down.
    Upper,
    /// HighD lower carriageway: travel along `+x`, image `y` pointing down.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub recording_id: String,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    pub road_length: f64,
    /// Lateral marking positions, strictly monotone. The middle one is the
    /// center-line between the two same-direction lanes.
    pub lane_markings: Vec<f64>,
    pub direction: Carriageway,
    /// Ring road: longitudinal positions are taken modulo `road_length` when
    /// resolving neighbours.
    #[serde(default)]
    pub periodic: bool,
}

fn default_frame_rate() -> f64 {
    25.0
}

impl RecordingMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0) || !self.frame_rate.is_finite() {
            return Err(Error::Metadata(format!("frame_rate must be > 0, got {}", self.frame_rate)));
        }
        if !(self.road_length > 0.0) || !self.road_length.is_finite() {
            return Err(Error::Metadata(format!("road_length must be > 0, got {}", self.road_length)));
        }
        if self.lane_markings.len() % 2 == 0 {
            return Err(Error::Metadata(format!(
                "expected an odd number of lane markings with a center-line, got {}",
                self.lane_markings.len()
            )));
        }
        let increasing = self.lane_markings.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.lane_markings.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Error::Metadata("lane markings must be strictly monotone".into()));
        }
        Ok(())
    }

    /// The same metadata expressed in normalized coordinates.
    pub fn normalized(&self) -> RecordingMeta {
        let mut markings: Vec<f64> = match self.direction {
            Carriageway::Lower => self.lane_markings.iter().map(|m| -m).collect(),
            _ => self.lane_markings.clone(),
        };
        markings.sort_by(f64::total_cmp);
        RecordingMeta {
            lane_markings: markings,
            direction: Carriageway::Forward,
            ..self.clone()
        }
    }

    /// Center-line in the coordinates of this metadata.
    pub fn centerline(&self) -> f64 {
        self.lane_markings[self.lane_markings.len() / 2]
    }

    /// Lane for a normalized lateral position.
    pub fn lane_of(&self, y: f64) -> Lane {
        if y < self.centerline() {
            Lane::Right
        } else {
            Lane::Left
        }
    }

    /// Number of frames spanning `seconds`, rounded to the nearest frame.
    pub fn frames_for(&self, seconds: f64) -> i64 {
        (seconds * self.frame_rate).round() as i64
    }

    pub fn read(path: impl AsRef<Path>) -> Result<RecordingMeta> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let meta: RecordingMeta = toml::from_str(&text)
            .map_err(|e| Error::Metadata(format!("{}: {e}", path.display())))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Metadata(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackFrame {
    pub vehicle_id: u64,
    pub frame: i64,
    pub x: f64,
    pub y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub lane: Lane,
    /// Vehicle length along the road (m).
    pub length: f64,
    /// Vehicle width (m).
    pub width: f64,
    pub class: VehicleClass,
}

/// All frames of one vehicle, contiguous and sorted by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub vehicle_id: u64,
    pub class: VehicleClass,
    pub length: f64,
    pub frames: Vec<TrackFrame>,
}

impl Trajectory {
    pub fn first_frame(&self) -> i64 {
        self.frames.first().map_or(0, |f| f.frame)
    }

    pub fn last_frame(&self) -> i64 {
        self.frames.last().map_or(-1, |f| f.frame)
    }

    /// Frame record at an absolute frame index.
    pub fn at(&self, frame: i64) -> Option<&TrackFrame> {
        let offset = frame.checked_sub(self.first_frame())?;
        if offset < 0 {
            return None;
        }
        self.frames.get(offset as usize)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Deserialize)]
struct TrackRow {
    frame: i64,
    id: u64,
    x: f64,
    y: f64,
    #[serde(rename = "xVelocity")]
    x_velocity: f64,
    #[serde(rename = "yVelocity")]
    y_velocity: f64,
    #[serde(rename = "xAcceleration")]
    x_acceleration: f64,
    #[serde(rename = "yAcceleration")]
    y_acceleration: f64,
    #[serde(rename = "laneId", default)]
    #[allow(dead_code)]
    lane_id: Option<String>,
    width: f64,
    height: f64,
    class: String,
}

/// Reads a track file and groups rows into trajectories in normalized
/// coordinates. Lanes are derived from `y` and the center-line.
pub fn load_recording(path: impl AsRef<Path>, meta: &RecordingMeta) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    meta.validate()?;
    let file = std::fs::File::open(path)?;
    read_tracks(file, path, meta)
}

pub fn read_tracks<R: std::io::Read>(
    reader: R,
    origin: &Path,
    meta: &RecordingMeta,
) -> Result<Vec<Trajectory>> {
    let norm = meta.normalized();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut by_vehicle: BTreeMap<u64, Vec<TrackFrame>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| parse_error(origin, &e))?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let row: TrackRow = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg: e.to_string(),
        })?;
        let class = VehicleClass::parse(&row.class).ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg: format!("unknown vehicle class {:?}", row.class),
        })?;
        let values = [
            row.x,
            row.y,
            row.x_velocity,
            row.y_velocity,
            row.x_acceleration,
            row.y_acceleration,
            row.width,
            row.height,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: "non-finite numeric field".into(),
            });
        }
        if !(row.width > 0.0) {
            return Err(Error::Integrity {
                vehicle_id: row.id,
                msg: format!("vehicle length must be > 0, got {} (line {line})", row.width),
            });
        }
        let (x, v_x, a_x) = match meta.direction {
            Carriageway::Upper => (meta.road_length - row.x, -row.x_velocity, -row.x_acceleration),
            _ => (row.x, row.x_velocity, row.x_acceleration),
        };
        let (y, v_y, a_y) = match meta.direction {
            Carriageway::Lower => (-row.y, -row.y_velocity, -row.y_acceleration),
            _ => (row.y, row.y_velocity, row.y_acceleration),
        };
        by_vehicle.entry(row.id).or_default().push(TrackFrame {
            vehicle_id: row.id,
            frame: row.frame,
            x,
            y,
            v_x,
            v_y,
            a_x,
            a_y,
            lane: norm.lane_of(y),
            length: row.width,
            width: row.height,
            class,
        });
    }
    by_vehicle.into_iter().map(|(id, frames)| build_trajectory(id, frames)).collect()
}

fn parse_error(origin: &Path, e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

/// Sorts frames and checks the per-vehicle invariants.
pub fn build_trajectory(vehicle_id: u64, mut frames: Vec<TrackFrame>) -> Result<Trajectory> {
    frames.sort_by_key(|f| f.frame);
    for w in frames.windows(2) {
        if w[1].frame != w[0].frame + 1 {
            return Err(Error::Integrity {
                vehicle_id,
                msg: format!(
                    "frames must be contiguous and strictly increasing, found {} then {}",
                    w[0].frame, w[1].frame
                ),
            });
        }
    }
    let first = frames
        .first()
        .ok_or_else(|| Error::Integrity { vehicle_id, msg: "no frames".into() })?;
    let (class, length) = (first.class, first.length);
    if let Some(f) = frames.iter().find(|f| !(f.length > 0.0)) {
        return Err(Error::Integrity {
            vehicle_id,
            msg: format!("vehicle length must be > 0 at frame {}", f.frame),
        });
    }
    Ok(Trajectory { vehicle_id, class, length, frames })
}

/// Writes trajectories (normalized coordinates) as a track file. Pair with
/// [`RecordingMeta::normalized`] for the sidecar.
pub fn write_recording(path: impl AsRef<Path>, trajectories: &[Trajectory]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_tracks(std::io::BufWriter::new(file), trajectories)
}

pub fn write_tracks<W: std::io::Write>(writer: W, trajectories: &[Trajectory]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "frame",
        "id",
        "x",
        "y",
        "xVelocity",
        "yVelocity",
        "xAcceleration",
        "yAcceleration",
        "laneId",
        "width",
        "height",
        "class",
    ])?;
    for traj in trajectories {
        for f in &traj.frames {
            wtr.write_record(&[
                f.frame.to_string(),
                f.vehicle_id.to_string(),
                f.x.to_string(),
                f.y.to_string(),
                f.v_x.to_string(),
                f.v_y.to_string(),
                f.a_x.to_string(),
                f.a_y.to_string(),
                f.lane.lane_id().to_string(),
                f.length.to_string(),
                f.width.to_string(),
                f.class.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// A loaded recording with a per-frame index. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Recording {
    pub meta: RecordingMeta,
    pub trajectories: Vec<Trajectory>,
    by_frame: BTreeMap<i64, Vec<(usize, usize)>>,
    by_vehicle: BTreeMap<u64, usize>,
}

impl Recording {
    /// `meta` is normalized here; trajectories must already be normalized.
    pub fn new(meta: RecordingMeta, trajectories: Vec<Trajectory>) -> Recording {
        let meta = meta.normalized();
        let mut by_frame: BTreeMap<i64, Vec<(usize, usize)>> = BTreeMap::new();
        let mut by_vehicle = BTreeMap::new();
        for (ti, traj) in trajectories.iter().enumerate() {
            by_vehicle.insert(traj.vehicle_id, ti);
            for (fi, f) in traj.frames.iter().enumerate() {
                by_frame.entry(f.frame).or_default().push((ti, fi));
            }
        }
        Recording { meta, trajectories, by_frame, by_vehicle }
    }

    pub fn load(tracks: impl AsRef<Path>, meta: &RecordingMeta) -> Result<Recording> {
        let trajectories = load_recording(tracks, meta)?;
        Ok(Recording::new(meta.clone(), trajectories))
    }

    pub fn trajectory(&self, vehicle_id: u64) -> Option<&Trajectory> {
        self.by_vehicle.get(&vehicle_id).map(|&i| &self.trajectories[i])
    }

    /// All vehicles present at `frame`.
    pub fn frames_at(&self, frame: i64) -> impl Iterator<Item = &TrackFrame> + '_ {
        self.by_frame
            .get(&frame)
            .into_iter()
            .flatten()
            .map(move |&(ti, fi)| &self.trajectories[ti].frames[fi])
    }

    pub fn resolve_neighbors(&self, vehicle_id: u64, frame: i64) -> Option<NeighborSet<'_>> {
        let subject = self.trajectory(vehicle_id)?.at(frame)?;
        Some(neighbors_in_snapshot(subject, self.frames_at(frame), &self.meta))
    }

    pub fn write(&self, tracks: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<()> {
        write_recording(tracks, &self.trajectories)?;
        self.meta.write(meta_path)
    }
}

/// A surrounding vehicle with its longitudinal spacing to the subject.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor<'a> {
    pub frame: &'a TrackFrame,
    /// Center-to-center longitudinal spacing, always ≥ 0.
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NeighborSet<'a> {
    pub predecessor: Option<Neighbor<'a>>,
    pub follower: Option<Neighbor<'a>>,
    pub adjacent_predecessor: Option<Neighbor<'a>>,
    pub adjacent_follower: Option<Neighbor<'a>>,
}

impl NeighborSet<'_> {
    pub fn ids(&self) -> [Option<u64>; 4] {
        [
            self.predecessor.map(|n| n.frame.vehicle_id),
            self.follower.map(|n| n.frame.vehicle_id),
            self.adjacent_predecessor.map(|n| n.frame.vehicle_id),
            self.adjacent_follower.map(|n| n.frame.vehicle_id),
        ]
    }
}

/// Resolves P, F, PA and FA for `subject` among `others` (all at the same
/// frame; the subject itself may be included and is skipped).
///
/// Vehicles are ordered by `(x, vehicle_id)`; on a ring road by forward
/// distance modulo the road length.
pub fn neighbors_in_snapshot<'a, I>(subject: &TrackFrame, others: I, meta: &RecordingMeta) -> NeighborSet<'a>
where
    I: IntoIterator<Item = &'a TrackFrame>,
{
    // (key, spacing, frame) for the best candidate in each slot
    type Slot<'b> = Option<((f64, u64), f64, &'b TrackFrame)>;
    let mut slots: [Slot<'a>; 4] = [None; 4];
    let ring = meta.periodic;
    let len = meta.road_length;
    for other in others {
        if other.vehicle_id == subject.vehicle_id {
            continue;
        }
        let same_lane = other.lane == subject.lane;
        let (ahead_dist, behind_dist) = if ring {
            let d = (other.x - subject.x).rem_euclid(len);
            if d == 0.0 {
                if other.vehicle_id > subject.vehicle_id {
                    (0.0, len)
                } else {
                    (len, 0.0)
                }
            } else {
                (d, len - d)
            }
        } else {
            let ahead = (other.x, other.vehicle_id) > (subject.x, subject.vehicle_id);
            let d = (other.x - subject.x).abs();
            if ahead {
                (d, f64::INFINITY)
            } else {
                (f64::INFINITY, d)
            }
        };
        let (p_slot, f_slot) = if same_lane { (0, 1) } else { (2, 3) };
        let consider = |slot: &mut Slot<'a>, dist: f64| {
            if !dist.is_finite() {
                return;
            }
            let key = (dist, other.vehicle_id);
            let better = match slot {
                None => true,
                Some((k, _, _)) => key.0 < k.0 || (key.0 == k.0 && key.1 < k.1),
            };
            if better {
                *slot = Some((key, dist, other));
            }
        };
        if ring {
            // On a ring a lone vehicle is both predecessor and follower.
            consider(&mut slots[p_slot], ahead_dist);
            consider(&mut slots[f_slot], behind_dist);
        } else if ahead_dist.is_finite() {
            consider(&mut slots[p_slot], ahead_dist);
        } else {
            consider(&mut slots[f_slot], behind_dist);
        }
    }
    let to_neighbor = |s: Slot<'a>| s.map(|(_, spacing, frame)| Neighbor { frame, spacing });
    NeighborSet {
        predecessor: to_neighbor(slots[0]),
        follower: to_neighbor(slots[1]),
        adjacent_predecessor: to_neighbor(slots[2]),
        adjacent_follower: to_neighbor(slots[3]),
    }
}

/// Direction of a center-line crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrossingDirection {
    /// Overtaking: right lane to left lane.
    #[serde(rename = "OV")]
    Overtaking,
    /// Fold-down: left lane to right lane.
    #[serde(rename = "FD")]
    FoldDown,
}

impl fmt::Display for CrossingDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CrossingDirection::Overtaking => f.write_str("OV"),
            CrossingDirection::FoldDown => f.write_str("FD"),
        }
    }
}

impl std::str::FromStr for CrossingDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "OV" => Ok(CrossingDirection::Overtaking),
            "FD" => Ok(CrossingDirection::FoldDown),
            other => Err(Error::Config(format!("unknown crossing direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crossing {
    /// First frame on the new side of the center-line.
    pub frame: i64,
    pub direction: CrossingDirection,
}

/// One event per change of side of the center-line. `meta` must be in the
/// same (normalized) coordinates as the trajectory.
pub fn centerline_crossings(trajectory: &Trajectory, meta: &RecordingMeta) -> Vec<Crossing> {
    let mut out = Vec::new();
    let mut prev: Option<Lane> = None;
    for f in &trajectory.frames {
        let lane = meta.lane_of(f.y);
        if let Some(p) = prev {
            if p != lane {
                let direction = match lane {
                    Lane::Left => CrossingDirection::Overtaking,
                    Lane::Right => CrossingDirection::FoldDown,
                };
                out.push(Crossing { frame: f.frame, direction });
            }
        }
        prev = Some(lane);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn meta() -> RecordingMeta {
        RecordingMeta {
            recording_id: "t".into(),
            frame_rate: 25.0,
            road_length: 420.0,
            lane_markings: vec![0.0, 3.75, 7.5],
            direction: Carriageway::Forward,
            periodic: false,
        }
    }

    fn tf(id: u64, frame: i64, x: f64, y: f64) -> TrackFrame {
        let m = meta();
        TrackFrame {
            vehicle_id: id,
            frame,
            x,
            y,
            v_x: 30.0,
            v_y: 0.0,
            a_x: 0.0,
            a_y: 0.0,
            lane: m.lane_of(y),
            length: 4.5,
            width: 1.8,
            class: VehicleClass::Car,
        }
    }

    fn csv_text(rows: &[(i64, u64, f64, f64, f64)]) -> String {
        let mut s = String::from(
            "frame,id,x,y,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId,width,height,class,extra\n",
        );
        for &(frame, id, x, y, len) in rows {
            s.push_str(&format!("{frame},{id},{x},{y},30,0,0,0,1,{len},1.8,Car,7\n"));
        }
        s
    }

    #[test]
    fn groups_rows_by_vehicle() {
        let mut rows = Vec::new();
        for id in [1u64, 2] {
            for frame in 0..100 {
                rows.push((frame, id, frame as f64 * 1.2, 1.5, 4.5));
            }
        }
        let text = csv_text(&rows);
        let trajs = read_tracks(text.as_bytes(), Path::new("mem"), &meta()).unwrap();
        assert_eq!(trajs.len(), 2);
        assert!(trajs.iter().all(|t| t.len() == 100));
    }

    #[test]
    fn empty_file_with_header() {
        let text = csv_text(&[]);
        let trajs = read_tracks(text.as_bytes(), Path::new("mem"), &meta()).unwrap();
        assert!(trajs.is_empty());
    }

    #[test]
    fn zero_length_is_integrity_error() {
        let text = csv_text(&[(0, 7, 1.0, 1.0, 0.0)]);
        let err = read_tracks(text.as_bytes(), Path::new("mem"), &meta()).unwrap_err();
        match err {
            Error::Integrity { vehicle_id, .. } => assert_eq!(vehicle_id, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let mut text = csv_text(&[(0, 1, 1.0, 1.0, 4.0)]);
        text.push_str("1,1,notanumber,1,30,0,0,0,1,4,1.8,Car,0\n");
        match read_tracks(text.as_bytes(), Path::new("mem"), &meta()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gap_in_frames_is_integrity_error() {
        let text = csv_text(&[(0, 1, 1.0, 1.0, 4.0), (2, 1, 2.0, 1.0, 4.0)]);
        assert!(matches!(
            read_tracks(text.as_bytes(), Path::new("mem"), &meta()),
            Err(Error::Integrity { vehicle_id: 1, .. })
        ));
    }

    #[test]
    fn upper_carriageway_is_mirrored() {
        let mut m = meta();
        m.direction = Carriageway::Upper;
        let text = "frame,id,x,y,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId,width,height,class\n0,1,400,1,-30,0,-1,0,2,4,2,Car\n";
        let t = read_tracks(text.as_bytes(), Path::new("mem"), &m).unwrap();
        let f = &t[0].frames[0];
        assert_eq!((f.x, f.v_x, f.a_x), (20.0, 30.0, 1.0));
        assert_eq!(f.lane, Lane::Right);

        m.direction = Carriageway::Lower;
        let t = read_tracks(text.as_bytes(), Path::new("mem"), &m).unwrap();
        // y = 1 is the top of the image: the fast lane for +x travel
        assert_eq!(t[0].frames[0].lane, Lane::Left);
    }

    #[test]
    fn metadata_validation() {
        let mut m = meta();
        m.lane_markings = vec![0.0, 3.0, 2.0];
        assert!(m.validate().is_err());
        let mut m = meta();
        m.frame_rate = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn lone_vehicle_has_no_neighbors() {
        let s = tf(1, 0, 100.0, 1.0);
        let n = neighbors_in_snapshot(&s, [&s], &meta());
        assert_eq!(n.ids(), [None; 4]);
    }

    #[test]
    fn nearest_ahead_is_predecessor() {
        let s = tf(1, 0, 100.0, 1.0);
        let a = tf(2, 0, 150.0, 1.0);
        let b = tf(3, 0, 200.0, 1.0);
        let n = neighbors_in_snapshot(&s, [&b, &a, &s], &meta());
        assert_eq!(n.predecessor.unwrap().frame.vehicle_id, 2);
        assert_eq!(n.predecessor.unwrap().spacing, 50.0);
        assert!(n.follower.is_none());
    }

    #[test]
    fn adjacent_follower_only() {
        let s = tf(1, 0, 100.0, 1.0);
        let a = tf(2, 0, 80.0, 5.0);
        let n = neighbors_in_snapshot(&s, [&a], &meta());
        assert_eq!(n.ids(), [None, None, None, Some(2)]);
    }

    #[test]
    fn ties_prefer_smaller_id() {
        let s = tf(5, 0, 100.0, 1.0);
        let a = tf(9, 0, 130.0, 1.0);
        let b = tf(7, 0, 130.0, 1.0);
        let n = neighbors_in_snapshot(&s, [&a, &b], &meta());
        assert_eq!(n.predecessor.unwrap().frame.vehicle_id, 7);
    }

    #[test]
    fn ring_wraps_around() {
        let mut m = meta();
        m.periodic = true;
        m.road_length = 1000.0;
        let s = tf(1, 0, 990.0, 1.0);
        let a = tf(2, 0, 10.0, 1.0);
        let n = neighbors_in_snapshot(&s, [&a], &m);
        assert_eq!(n.predecessor.unwrap().spacing, 20.0);
        assert_eq!(n.follower.unwrap().spacing, 980.0);
    }

    fn traj_from_y(ys: &[f64]) -> Trajectory {
        let frames = ys.iter().enumerate().map(|(i, &y)| tf(1, i as i64, i as f64, y)).collect();
        build_trajectory(1, frames).unwrap()
    }

    #[test]
    fn no_crossing_within_lane() {
        let t = traj_from_y(&[1.0; 20]);
        assert!(centerline_crossings(&t, &meta()).is_empty());
    }

    #[test]
    fn single_overtaking_crossing() {
        let ys: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 * 0.3).collect();
        let t = traj_from_y(&ys);
        let c = centerline_crossings(&t, &meta());
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].direction, CrossingDirection::Overtaking);
        let first_left = ys.iter().position(|&y| y >= 3.75).unwrap() as i64;
        assert_eq!(c[0].frame, first_left);
    }

    #[test]
    fn zigzag_alternates() {
        // y(t) = 3.75 + 2 sin(2π t / 40) starting slightly in the right lane:
        // sign changes by hand at t = 20, 40, 60 for t in [1, 70].
        let ys: Vec<f64> = (1..=70)
            .map(|t| 3.75 - 2.0 * (2.0 * std::f64::consts::PI * (t as f64 - 0.5) / 40.0).sin())
            .collect();
        let t = traj_from_y(&ys);
        let c = centerline_crossings(&t, &meta());
        let dirs: Vec<_> = c.iter().map(|c| c.direction).collect();
        assert_eq!(
            dirs,
            vec![CrossingDirection::Overtaking, CrossingDirection::FoldDown, CrossingDirection::Overtaking]
        );
        let frames: Vec<i64> = c.iter().map(|c| c.frame).collect();
        assert_eq!(frames, vec![20, 40, 60]);
    }
}
