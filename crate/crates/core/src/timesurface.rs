//! Per-polarity time maps with exponential-decay rendering.
//!
//! Each cell holds the timestamp of the latest event at that pixel and
//! polarity. Rendering at query time `t` maps a cell with timestamp `T` to
//! `exp(-(t - T) / tau)` and untouched cells to `0.0`.

use thiserror::Error;

use crate::event::{Event, Polarity, SensorGeometry};

const NEVER: u64 = u64::MAX;

/// Decay constant used when none is configured, in microseconds.
pub const DEFAULT_TAU_US: f64 = 50_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum SurfaceError {
    #[error("event at t={t} arrived after t={last} was already ingested")]
    OutOfOrder { t: u64, last: u64 },
    #[error("event pixel ({x}, {y}) outside {geometry} surface")]
    OutOfBounds {
        x: u16,
        y: u16,
        geometry: SensorGeometry,
    },
    #[error("query at t={t} precedes last ingested event t={last}")]
    QueryInPast { t: u64, last: u64 },
    #[error("timestamp {0} is reserved")]
    ReservedTimestamp(u64),
    #[error("decay constant must be finite and positive, got {0}")]
    InvalidTau(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayParams {
    tau_us: f64,
}

impl DecayParams {
    pub fn new(tau_us: f64) -> Result<Self, SurfaceError> {
        if tau_us.is_finite() && tau_us > 0.0 {
            Ok(Self { tau_us })
        } else {
            Err(SurfaceError::InvalidTau(tau_us))
        }
    }

    pub fn tau_us(&self) -> f64 {
        self.tau_us
    }
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            tau_us: DEFAULT_TAU_US,
        }
    }
}

/// Row-major single-channel image.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl IntensityGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// 8-bit quantization, `round(255 * v)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

/// Two decayed channels; `channels[0]` is negative polarity, `channels[1]`
/// positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotPair {
    pub t: u64,
    pub channels: [IntensityGrid; 2],
}

impl SnapshotPair {
    pub fn width(&self) -> usize {
        self.channels[0].width
    }

    pub fn height(&self) -> usize {
        self.channels[0].height
    }

    pub fn channel(&self, p: Polarity) -> &IntensityGrid {
        &self.channels[p.channel()]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimeSurface {
    geometry: SensorGeometry,
    // (y * width + x) * 2 + channel
    cells: Vec<u64>,
    last_t: u64,
}

impl TimeSurface {
    pub fn new(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            cells: vec![NEVER; geometry.pixel_count() * 2],
            last_t: 0,
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn last_ingested_t(&self) -> u64 {
        self.last_t
    }

    #[inline]
    fn index(&self, x: u16, y: u16, p: Polarity) -> usize {
        (y as usize * self.geometry.width() as usize + x as usize) * 2 + p.channel()
    }

    /// Latest timestamp at `(x, y, p)`, `None` if nothing arrived there.
    pub fn get(&self, x: u16, y: u16, p: Polarity) -> Option<u64> {
        match self.cells[self.index(x, y, p)] {
            NEVER => None,
            t => Some(t),
        }
    }

    #[inline]
    pub fn update(&mut self, e: &Event) -> Result<(), SurfaceError> {
        if e.t < self.last_t {
            return Err(SurfaceError::OutOfOrder {
                t: e.t,
                last: self.last_t,
            });
        }
        if !self.geometry.contains(e.x, e.y) {
            return Err(SurfaceError::OutOfBounds {
                x: e.x,
                y: e.y,
                geometry: self.geometry,
            });
        }
        if e.t == NEVER {
            return Err(SurfaceError::ReservedTimestamp(e.t));
        }
        let i = self.index(e.x, e.y, e.p);
        self.cells[i] = e.t;
        self.last_t = e.t;
        Ok(())
    }

    pub fn update_all<'a, I>(&mut self, events: I) -> Result<(), SurfaceError>
    where
        I: IntoIterator<Item = &'a Event>,
    {
        events.into_iter().try_for_each(|e| self.update(e))
    }

    pub fn decayed_image(
        &self,
        t_query: u64,
        params: DecayParams,
        p: Polarity,
    ) -> Result<IntensityGrid, SurfaceError> {
        if t_query < self.last_t {
            return Err(SurfaceError::QueryInPast {
                t: t_query,
                last: self.last_t,
            });
        }
        let width = self.geometry.width() as usize;
        let height = self.geometry.height() as usize;
        let tau = params.tau_us();
        let data = self
            .cells
            .iter()
            .skip(p.channel())
            .step_by(2)
            .map(|&ts| decay(t_query, ts, tau))
            .collect();
        Ok(IntensityGrid {
            width,
            height,
            data,
        })
    }

    pub fn snapshot_pair(
        &self,
        t_query: u64,
        params: DecayParams,
    ) -> Result<SnapshotPair, SurfaceError> {
        Ok(SnapshotPair {
            t: t_query,
            channels: [
                self.decayed_image(t_query, params, Polarity::Negative)?,
                self.decayed_image(t_query, params, Polarity::Positive)?,
            ],
        })
    }

    pub fn reset(&mut self) {
        self.cells.fill(NEVER);
        self.last_t = 0;
    }
}

#[inline]
fn decay(t_query: u64, ts: u64, tau: f64) -> f64 {
    if ts == NEVER {
        0.0
    } else {
        (-((t_query - ts) as f64) / tau).exp()
    }
}
