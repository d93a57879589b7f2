//! Plane-induced homographies between the frame camera and the event camera.
//!
//! Factors live in normalized camera coordinates: a point `X1` in the first
//! camera maps to `X2 = R X1 + t`, and the scene plane is `n·X1 + d = 0`.
//! On that plane `X2 = (R - t nᵀ / d) X1`. Pixel-domain maps are obtained with
//! the intrinsics as `K2 · H · K1⁻¹`.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::event::{Event, EventStream, SensorGeometry};

const ORTHO_TOL: f64 = 1e-9;
const INFINITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CalibError {
    #[error("homography is singular (det = {0:e})")]
    Singular(f64),
    #[error("invalid homography factors: {0}")]
    InvalidFactors(String),
    #[error("point ({x}, {y}) maps to infinity")]
    AtInfinity { x: f64, y: f64 },
    #[error("calibration file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("calibration file: {0}")]
    Missing(String),
}

/// A non-singular 3×3 projective map on homogeneous pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    /// Normalizes to `H[2][2] = 1` when that entry is nonzero, otherwise so
    /// the largest-magnitude bottom-row entry is positive.
    pub fn new(m: Matrix3<f64>) -> Result<Self, CalibError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::Singular(f64::NAN));
        }
        let scale = m.norm();
        let det = m.determinant();
        if scale == 0.0 || det.abs() <= 1e-12 * scale.powi(3) {
            return Err(CalibError::Singular(det));
        }
        let m = if m[(2, 2)] != 0.0 {
            m / m[(2, 2)]
        } else {
            let lead = (0..3)
                .map(|c| m[(2, c)])
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap();
            if lead < 0.0 {
                -m
            } else {
                m
            }
        };
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            m: Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.m[(r, c)];
            }
        }
        out
    }

    pub fn inverse(&self) -> Result<Self, CalibError> {
        let inv = self
            .m
            .try_inverse()
            .ok_or(CalibError::Singular(self.m.determinant()))?;
        Self::new(inv)
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Self, CalibError> {
        Self::new(self.m * first.m)
    }

    /// Lifts a normalized-coordinate homography to pixels: `K2 · H · K1⁻¹`.
    pub fn to_pixels(&self, k1: &Matrix3<f64>, k2: &Matrix3<f64>) -> Result<Self, CalibError> {
        let k1_inv = k1
            .try_inverse()
            .ok_or(CalibError::Singular(k1.determinant()))?;
        Self::new(k2 * self.m * k1_inv)
    }

    pub fn warp_point(&self, x: f64, y: f64) -> Result<(f64, f64), CalibError> {
        let v = self.m * Vector3::new(x, y, 1.0);
        if v.z.abs() <= INFINITY_TOL {
            return Err(CalibError::AtInfinity { x, y });
        }
        Ok((v.x / v.z, v.y / v.z))
    }
}

impl fmt::Display for Homography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.to_row_major();
        let parts: Vec<String> = e.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// `(R, t, n, d)` with `R` a proper rotation, `n` a unit normal and `d > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomographyFactors {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
    pub n: Vector3<f64>,
    pub d: f64,
}

impl HomographyFactors {
    pub fn new(
        r: Matrix3<f64>,
        t: Vector3<f64>,
        n: Vector3<f64>,
        d: f64,
    ) -> Result<Self, CalibError> {
        let f = Self { r, t, n, d };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), CalibError> {
        let ortho = (self.r.transpose() * self.r - Matrix3::identity()).abs().max();
        if !(ortho <= ORTHO_TOL) {
            return Err(CalibError::InvalidFactors(format!(
                "R is not orthonormal (max |RᵀR - I| = {ortho:e})"
            )));
        }
        let det = self.r.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(CalibError::InvalidFactors(format!("det(R) = {det}, expected +1")));
        }
        if !((self.n.norm() - 1.0).abs() <= ORTHO_TOL) {
            return Err(CalibError::InvalidFactors(format!(
                "plane normal has length {}",
                self.n.norm()
            )));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(CalibError::InvalidFactors(format!("plane offset d = {} must be positive", self.d)));
        }
        if self.t.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::InvalidFactors("translation is not finite".into()));
        }
        Ok(())
    }

    /// `‖t‖ / d`, the quantity that controls the rotational approximation.
    pub fn translation_ratio(&self) -> f64 {
        self.t.norm() / self.d
    }
}

/// `H = R - t nᵀ / d`.
pub fn compose_homography(f: &HomographyFactors) -> Result<Homography, CalibError> {
    f.validate()?;
    Homography::new(f.r - f.t * f.n.transpose() / f.d)
}

/// Drops the translation term: `H ≈ R`.
pub fn rotational_approximation(f: &HomographyFactors) -> Homography {
    Homography::new(f.r).expect("rotation matrices are non-singular")
}

pub fn warp_point(h: &Homography, pt: (f64, f64)) -> Result<(f64, f64), CalibError> {
    h.warp_point(pt.0, pt.1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarpedStream {
    pub stream: EventStream,
    /// Events whose warped pixel fell outside the target sensor.
    pub dropped_outside: usize,
    /// Events that mapped to infinity.
    pub dropped_infinite: usize,
}

impl WarpedStream {
    pub fn dropped(&self) -> usize {
        self.dropped_outside + self.dropped_infinite
    }
}

/// Warps each event pixel and rounds to the nearest integer pixel. Events that
/// land outside `target` or at infinity are dropped and counted.
pub fn warp_events(h: &Homography, stream: &EventStream, target: SensorGeometry) -> WarpedStream {
    let mut dropped_outside = 0;
    let mut dropped_infinite = 0;
    let mut events = Vec::with_capacity(stream.events.len());
    for ev in &stream.events {
        match h.warp_point(ev.x as f64, ev.y as f64) {
            Ok((x, y)) => match round_into(x, y, target) {
                Some((x, y)) => events.push(Event { x, y, ..*ev }),
                None => dropped_outside += 1,
            },
            Err(_) => dropped_infinite += 1,
        }
    }
    WarpedStream {
        stream: EventStream::new(target, events),
        dropped_outside,
        dropped_infinite,
    }
}

fn round_into(x: f64, y: f64, target: SensorGeometry) -> Option<(u16, u16)> {
    let (rx, ry) = (x.round(), y.round());
    if rx >= 0.0 && ry >= 0.0 && rx < target.width() as f64 && ry < target.height() as f64 {
        Some((rx as u16, ry as u16))
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproximationReport {
    pub translation_ratio: f64,
    pub max_deviation_px: f64,
    pub mean_deviation_px: f64,
    pub samples: usize,
    /// `max_deviation_px` exceeded the tolerance the report was built with.
    pub flagged: bool,
}

/// Compares the pixel warps of the full and rotation-only homographies on a
/// regular grid over `source` (every `step` pixels, borders included).
pub fn approximation_report(
    f: &HomographyFactors,
    k1: &Matrix3<f64>,
    k2: &Matrix3<f64>,
    source: SensorGeometry,
    step: usize,
    tolerance_px: f64,
) -> Result<ApproximationReport, CalibError> {
    let full = compose_homography(f)?.to_pixels(k1, k2)?;
    let approx = rotational_approximation(f).to_pixels(k1, k2)?;
    let step = step.max(1);
    let axis = |len: u16| {
        let last = len as usize - 1;
        let mut v: Vec<usize> = (0..=last).step_by(step).collect();
        if *v.last().unwrap() != last {
            v.push(last);
        }
        v
    };
    let (xs, ys) = (axis(source.width()), axis(source.height()));
    let mut max_dev: f64 = 0.0;
    let mut sum = 0.0;
    let mut samples = 0;
    for &y in &ys {
        for &x in &xs {
            let a = full.warp_point(x as f64, y as f64)?;
            let b = approx.warp_point(x as f64, y as f64)?;
            let dev = (a.0 - b.0).hypot(a.1 - b.1);
            max_dev = max_dev.max(dev);
            sum += dev;
            samples += 1;
        }
    }
    Ok(ApproximationReport {
        translation_ratio: f.translation_ratio(),
        max_deviation_px: max_dev,
        mean_deviation_px: sum / samples as f64,
        samples,
        flagged: max_dev > tolerance_px,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CalibModel {
    /// Normalized-coordinate homography given directly.
    Homography(Homography),
    Factors(HomographyFactors),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WarpDirection {
    FrameToEvent,
    EventToFrame,
}

impl std::str::FromStr for WarpDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frame2event" => Ok(WarpDirection::FrameToEvent),
            "event2frame" => Ok(WarpDirection::EventToFrame),
            other => Err(format!("unknown direction '{other}' (frame2event|event2frame)")),
        }
    }
}

/// Two-camera calibration: `K1` is the frame camera, `K2` the event camera,
/// and the model maps frame-camera coordinates into the event camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub k1: Matrix3<f64>,
    pub k2: Matrix3<f64>,
    pub model: CalibModel,
}

impl Calibration {
    /// Parses `key = value` lines; `#` starts a comment. Keys: `K1`, `K2`, and
    /// either `H` or `R` (with optional `t`, `n`, `d`).
    pub fn parse(text: &str) -> Result<Self, CalibError> {
        let mut values: HashMap<String, (usize, Vec<f64>)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CalibError::Parse {
                line: line_no,
                reason: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = key.trim();
            let expected = match key {
                "K1" | "K2" | "H" | "R" => 9,
                "t" | "n" => 3,
                "d" => 1,
                other => {
                    return Err(CalibError::Parse {
                        line: line_no,
                        reason: format!("unknown key '{other}'"),
                    })
                }
            };
            let nums = value
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CalibError::Parse {
                    line: line_no,
                    reason: format!("{key}: {e}"),
                })?;
            if nums.len() != expected {
                return Err(CalibError::Parse {
                    line: line_no,
                    reason: format!("{key} needs {expected} numbers, got {}", nums.len()),
                });
            }
            if values.insert(key.to_string(), (line_no, nums)).is_some() {
                return Err(CalibError::Parse {
                    line: line_no,
                    reason: format!("duplicate key '{key}'"),
                });
            }
        }
        let mat = |key: &str| -> Result<Matrix3<f64>, CalibError> {
            let (_, v) = values
                .get(key)
                .ok_or_else(|| CalibError::Missing(format!("missing {key}")))?;
            Ok(Matrix3::from_row_slice(v))
        };
        let vec3 = |key: &str| values.get(key).map(|(_, v)| Vector3::new(v[0], v[1], v[2]));
        let k1 = mat("K1")?;
        let k2 = mat("K2")?;
        let model = match (values.contains_key("H"), values.contains_key("R")) {
            (true, true) => return Err(CalibError::Missing("give either H or R, not both".into())),
            (false, false) => return Err(CalibError::Missing("missing H or R".into())),
            (true, false) => CalibModel::Homography(Homography::new(mat("H")?)?),
            (false, true) => {
                let t = vec3("t").unwrap_or_else(Vector3::zeros);
                let (n, d) = match (vec3("n"), values.get("d")) {
                    (Some(n), Some((_, d))) => (n, d[0]),
                    (None, None) if t == Vector3::zeros() => (Vector3::new(0.0, 0.0, -1.0), 1.0),
                    _ => return Err(CalibError::Missing("t requires n and d".into())),
                };
                CalibModel::Factors(HomographyFactors::new(mat("R")?, t, n, d)?)
            }
        };
        Ok(Self { k1, k2, model })
    }

    /// Normalized-coordinate homography (frame → event).
    pub fn normalized(&self) -> Result<Homography, CalibError> {
        match &self.model {
            CalibModel::Homography(h) => Ok(*h),
            CalibModel::Factors(f) => compose_homography(f),
        }
    }

    pub fn pixel_homography(&self, direction: WarpDirection) -> Result<Homography, CalibError> {
        let f2e = self.normalized()?.to_pixels(&self.k1, &self.k2)?;
        match direction {
            WarpDirection::FrameToEvent => Ok(f2e),
            WarpDirection::EventToFrame => f2e.inverse(),
        }
    }
}
