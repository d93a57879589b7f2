//! SORT-style multi-object tracking: constant-velocity Kalman prediction,
//! `1 - IoU` costs, Hungarian assignment and a tentative → confirmed →
//! deleted track lifecycle. One [`Tracker::step`] per snapshot.

pub mod assignment;
pub mod kalman;

use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::detection::{iou, BBox, Detection};
pub use assignment::{hungarian, CostMatrix};
pub use kalman::{KalmanFilter, KalmanNoise};

pub const TRACK_CSV_HEADER: &str = "t_us,track_id,x1,y1,w,h,status";

#[derive(Debug, Error, PartialEq)]
pub enum TrackerError {
    #[error("snapshot t={t} precedes previous snapshot t={prev}")]
    TimeReversed { t: u64, prev: u64 },
    #[error("invalid tracker parameters: {0}")]
    InvalidParams(String),
    #[error("track file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

impl TrackStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
            TrackStatus::Deleted => "deleted",
        }
    }
}

impl std::str::FromStr for TrackStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tentative" => Ok(TrackStatus::Tentative),
            "confirmed" => Ok(TrackStatus::Confirmed),
            "deleted" => Ok(TrackStatus::Deleted),
            other => Err(format!("unknown track status '{other}'")),
        }
    }
}

impl fmt::Display for TrackStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackerParams {
    pub iou_threshold: f64,
    /// A track is deleted once it has missed more than this many snapshots
    /// in a row.
    pub max_age: u32,
    /// Consecutive matched snapshots (birth included) needed to confirm.
    pub min_hits: u32,
    pub emit_tentative: bool,
    pub noise: KalmanNoise,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            iou_threshold: 0.3,
            max_age: 5,
            min_hits: 3,
            emit_tentative: false,
            noise: KalmanNoise::default(),
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(TrackerError::InvalidParams(format!(
                "iou_threshold {} outside [0, 1]",
                self.iou_threshold
            )));
        }
        if self.max_age < 1 || self.min_hits < 1 {
            return Err(TrackerError::InvalidParams("max_age and min_hits must be at least 1".into()));
        }
        if !self.noise.is_valid() {
            return Err(TrackerError::InvalidParams("noise variances must be non-negative (measurement > 0)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KalmanTrack {
    pub id: u64,
    pub filter: KalmanFilter,
    /// Consecutive matched snapshots.
    pub hits: u32,
    /// Consecutive missed snapshots.
    pub misses: u32,
    pub status: TrackStatus,
    pub last_t: u64,
}

impl KalmanTrack {
    fn new(id: u64, det: &Detection, noise: KalmanNoise) -> Self {
        Self {
            id,
            filter: KalmanFilter::new(&kalman::bbox_to_measurement(&det.bbox), noise),
            hits: 1,
            misses: 0,
            status: TrackStatus::Tentative,
            last_t: det.t,
        }
    }

    pub fn predict(&mut self) -> BBox {
        self.filter.predict()
    }

    pub fn bbox(&self) -> BBox {
        self.filter.bbox()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackedBox {
    pub id: u64,
    pub bbox: BBox,
    pub t: u64,
    pub status: TrackStatus,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Association {
    /// `(detection index, track index)`, sorted by detection index.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_dets: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

/// Hungarian matching on `1 - IoU`; matched pairs below `iou_threshold`
/// are split back into unmatched.
pub fn associate(dets: &[Detection], tracks: &[BBox], iou_threshold: f64) -> Association {
    let iou_m = CostMatrix::from_fn(dets.len(), tracks.len(), |i, j| iou(&dets[i].bbox, &tracks[j]));
    let cost = CostMatrix::from_fn(dets.len(), tracks.len(), |i, j| 1.0 - iou_m.get(i, j));
    let mut det_used = vec![false; dets.len()];
    let mut trk_used = vec![false; tracks.len()];
    let mut matches = Vec::new();
    for (d, t) in hungarian(&cost) {
        if iou_m.get(d, t) >= iou_threshold {
            det_used[d] = true;
            trk_used[t] = true;
            matches.push((d, t));
        }
    }
    Association {
        matches,
        unmatched_dets: (0..dets.len()).filter(|&i| !det_used[i]).collect(),
        unmatched_tracks: (0..tracks.len()).filter(|&j| !trk_used[j]).collect(),
    }
}

#[derive(Clone, Debug)]
pub struct Tracker {
    params: TrackerParams,
    tracks: Vec<KalmanTrack>,
    next_id: u64,
    last_t: Option<u64>,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Result<Self, TrackerError> {
        params.validate()?;
        Ok(Self {
            params,
            tracks: Vec::new(),
            next_id: 1,
            last_t: None,
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    /// Live (tentative or confirmed) tracks in creation order.
    pub fn tracks(&self) -> &[KalmanTrack] {
        &self.tracks
    }

    pub fn step(&mut self, dets: &[Detection], t: u64) -> Result<Vec<TrackedBox>, TrackerError> {
        if let Some(prev) = self.last_t {
            if t < prev {
                return Err(TrackerError::TimeReversed { t, prev });
            }
        }
        self.last_t = Some(t);

        let predicted: Vec<BBox> = self.tracks.iter_mut().map(KalmanTrack::predict).collect();
        let assoc = associate(dets, &predicted, self.params.iou_threshold);

        for &(d, k) in &assoc.matches {
            let track = &mut self.tracks[k];
            let z = kalman::bbox_to_measurement(&dets[d].bbox);
            if track.filter.update(&z) {
                track.hits += 1;
                track.misses = 0;
                track.last_t = t;
            } else {
                track.hits = 0;
                track.misses += 1;
            }
        }
        for &k in &assoc.unmatched_tracks {
            let track = &mut self.tracks[k];
            track.hits = 0;
            track.misses += 1;
        }
        for track in &mut self.tracks {
            if track.misses > self.params.max_age {
                track.status = TrackStatus::Deleted;
            } else if track.status == TrackStatus::Tentative && track.hits >= self.params.min_hits {
                track.status = TrackStatus::Confirmed;
            }
        }
        self.tracks.retain(|tr| tr.status != TrackStatus::Deleted);

        for &d in &assoc.unmatched_dets {
            let z = kalman::bbox_to_measurement(&dets[d].bbox);
            if z.iter().any(|v| !v.is_finite()) || dets[d].bbox.area() <= 0.0 {
                continue;
            }
            let mut track = KalmanTrack::new(self.next_id, &dets[d], self.params.noise);
            track.last_t = t;
            if track.hits >= self.params.min_hits {
                track.status = TrackStatus::Confirmed;
            }
            self.next_id += 1;
            self.tracks.push(track);
        }

        Ok(self
            .tracks
            .iter()
            .filter(|tr| tr.status == TrackStatus::Confirmed || self.params.emit_tentative)
            .map(|tr| TrackedBox {
                id: tr.id,
                bbox: tr.bbox(),
                t,
                status: tr.status,
            })
            .collect())
    }
}

/// Runs the tracker over snapshots in order and concatenates the output.
pub fn track_sequence<'a, I>(params: TrackerParams, snapshots: I) -> Result<Vec<TrackedBox>, TrackerError>
where
    I: IntoIterator<Item = (u64, &'a [Detection])>,
{
    let mut tracker = Tracker::new(params)?;
    let mut out = Vec::new();
    for (t, dets) in snapshots {
        out.extend(tracker.step(dets, t)?);
    }
    Ok(out)
}

/// Writes rows sorted by `(t_us, track_id)`. Coordinates carry six decimals,
/// so reading a file back and rewriting it reproduces the same bytes.
pub fn write_tracks<W: Write>(rows: &[TrackedBox], mut sink: W) -> std::io::Result<()> {
    let mut sorted: Vec<&TrackedBox> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.t, r.id));
    writeln!(sink, "{TRACK_CSV_HEADER}")?;
    for r in sorted {
        writeln!(
            sink,
            "{},{},{:.6},{:.6},{:.6},{:.6},{}",
            r.t,
            r.id,
            r.bbox.x1,
            r.bbox.y1,
            r.bbox.width(),
            r.bbox.height(),
            r.status
        )?;
    }
    sink.flush()
}

pub fn read_tracks<R: BufRead>(source: R) -> Result<Vec<TrackedBox>, TrackerError> {
    let io = |e: std::io::Error| TrackerError::Io(e.to_string());
    let mut lines = source.lines();
    let header = lines.next().transpose().map_err(io)?.unwrap_or_default();
    if header.trim() != TRACK_CSV_HEADER {
        return Err(TrackerError::Parse {
            line: 1,
            reason: format!("expected header '{TRACK_CSV_HEADER}', got '{header}'"),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let bad = |reason: String| TrackerError::Parse { line: i + 2, reason };
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(bad(format!("expected 7 fields, got {}", fields.len())));
        }
        let num = |k: usize| fields[k].parse::<f64>().map_err(|_| bad(format!("bad number '{}'", fields[k])));
        let t = fields[0].parse::<u64>().map_err(|_| bad(format!("bad timestamp '{}'", fields[0])))?;
        let id = fields[1].parse::<u64>().map_err(|_| bad(format!("bad track id '{}'", fields[1])))?;
        let (x1, y1, w, h) = (num(2)?, num(3)?, num(4)?, num(5)?);
        if !(w >= 0.0 && h >= 0.0) {
            return Err(bad(format!("negative box size {w}x{h}")));
        }
        let status = fields[6].parse::<TrackStatus>().map_err(bad)?;
        rows.push(TrackedBox {
            id,
            bbox: BBox::new(x1, y1, x1 + w, y1 + h),
            t,
            status,
        });
    }
    Ok(rows)
}
