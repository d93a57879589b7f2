//! Bounding boxes, IoU, the connected-component blob detector that runs on
//! decayed time surfaces, and the JSON-lines detection file format.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timesurface::SnapshotPair;

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("detection file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("invalid blob parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Axis-aligned box in corner form. For raster boxes the upper edges are
/// exclusive: a single pixel `(x, y)` is `(x, y, x + 1, y + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub t: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = DetectionError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(DetectionError::InvalidParams(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }
}

impl Connectivity {
    pub fn as_u8(self) -> u8 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    fn offsets(self) -> &'static [(i32, i32)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlobParams {
    pub threshold: f64,
    pub min_area: usize,
    pub connectivity: Connectivity,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            threshold: 0.35,
            min_area: 15,
            connectivity: Connectivity::Eight,
        }
    }
}

impl BlobParams {
    pub fn new(threshold: f64, min_area: usize, connectivity: Connectivity) -> Result<Self, DetectionError> {
        let p = Self {
            threshold,
            min_area,
            connectivity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(DetectionError::InvalidParams(format!(
                "threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.min_area == 0 {
            return Err(DetectionError::InvalidParams("min_area must be at least 1".into()));
        }
        Ok(())
    }
}

/// A labelled component: its pixels and the detection built from them.
#[derive(Clone, Debug, PartialEq)]
pub struct Blob {
    pub pixels: Vec<(usize, usize)>,
    pub detection: Detection,
}

/// Max-combines the two polarity channels, thresholds, labels connected
/// components and returns one detection per component of at least
/// `min_area` pixels. Sorted by descending score, then `(y1, x1)`.
pub fn detect_blobs(img: &SnapshotPair, params: &BlobParams) -> Vec<Detection> {
    label_blobs(img, params)
        .into_iter()
        .map(|b| b.detection)
        .collect()
}

pub fn label_blobs(img: &SnapshotPair, params: &BlobParams) -> Vec<Blob> {
    let (w, h) = (img.width(), img.height());
    let [neg, pos] = &img.channels;
    let combined: Vec<f64> = neg.data.iter().zip(&pos.data).map(|(a, b)| a.max(*b)).collect();
    let mut visited: Vec<bool> = combined.iter().map(|&v| v < params.threshold).collect();
    let mut blobs = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            for &(dx, dy) in params.connectivity.offsets() {
                let (nx, ny) = (x as i32 + dx, y as i32 + dy);
                if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        if pixels.len() < params.min_area {
            continue;
        }
        let (mut x1, mut y1, mut x2, mut y2) = (usize::MAX, usize::MAX, 0, 0);
        let mut sum = 0.0;
        for &(x, y) in &pixels {
            x1 = x1.min(x);
            y1 = y1.min(y);
            x2 = x2.max(x);
            y2 = y2.max(y);
            sum += combined[y * w + x];
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        blobs.push(Blob {
            detection: Detection {
                bbox: BBox::new(x1 as f64, y1 as f64, (x2 + 1) as f64, (y2 + 1) as f64),
                score: sum / pixels.len() as f64,
                t: img.t,
            },
            pixels,
        });
    }
    blobs.sort_by(|a, b| {
        let (da, db) = (&a.detection, &b.detection);
        db.score
            .total_cmp(&da.score)
            .then(da.bbox.y1.total_cmp(&db.bbox.y1))
            .then(da.bbox.x1.total_cmp(&db.bbox.x1))
    });
    blobs
}

/// Detections grouped by snapshot timestamp, ascending.
pub type DetectionSet = BTreeMap<u64, Vec<Detection>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    score: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSnapshot {
    t: u64,
    boxes: Vec<JsonBox>,
}

/// Reads one `{"t": .., "boxes": [..]}` object per line. Lines sharing a
/// timestamp are merged in file order.
pub fn load_detections<R: BufRead>(source: R) -> Result<DetectionSet, DetectionError> {
    let mut out = DetectionSet::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| DetectionError::Malformed {
            line: line_no,
            reason,
        };
        let snap: JsonSnapshot = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let entry = out.entry(snap.t).or_default();
        for b in snap.boxes {
            let bbox = BBox::new(b.x1, b.y1, b.x2, b.y2);
            if !bbox.is_valid() {
                return Err(malformed(format!(
                    "box ({}, {}, {}, {}) has x2 < x1 or y2 < y1",
                    b.x1, b.y1, b.x2, b.y2
                )));
            }
            if !(0.0..=1.0).contains(&b.score) {
                return Err(malformed(format!("score {} outside [0, 1]", b.score)));
            }
            entry.push(Detection {
                bbox,
                score: b.score,
                t: snap.t,
            });
        }
    }
    Ok(out)
}

/// Writes one line per snapshot in ascending timestamp order.
pub fn write_detections<W: Write>(set: &DetectionSet, mut sink: W) -> Result<(), DetectionError> {
    for (&t, dets) in set {
        let snap = JsonSnapshot {
            t,
            boxes: dets
                .iter()
                .map(|d| JsonBox {
                    x1: d.bbox.x1,
                    y1: d.bbox.y1,
                    x2: d.bbox.x2,
                    y2: d.bbox.y2,
                    score: d.score,
                })
                .collect(),
        };
        let line = serde_json::to_string(&snap).map_err(|e| DetectionError::Malformed {
            line: 0,
            reason: e.to_string(),
        })?;
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}
