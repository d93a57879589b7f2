//! Synthetic event-camera scenes: hard-edged elliptical agents over a uniform
//! background, rendered to log intensity and turned into events with a
//! per-pixel contrast-threshold model. Ground-truth boxes and trigger
//! timestamps are produced at the frame rate.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::BBox;
use crate::event::{Event, EventStream, Polarity, SensorGeometry};
use crate::timesurface::IntensityGrid;

pub const GT_CSV_HEADER: &str = "t_us,agent_id,x1,y1,x2,y2";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidConfig(String),
    #[error("scene file: {0}")]
    Parse(String),
    #[error("ground-truth file line {line}: {reason}")]
    GtParse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One axis of a sinusoidal path: `center + amplitude · sin(2π f t + phase)`,
/// `t` in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisMotion {
    pub center: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase: f64,
}

impl AxisMotion {
    pub fn fixed(center: f64) -> Self {
        Self {
            center,
            amplitude: 0.0,
            frequency_hz: 0.0,
            phase: 0.0,
        }
    }

    fn position(&self, t_s: f64) -> f64 {
        self.center + self.amplitude * (TAU * self.frequency_hz * t_s + self.phase).sin()
    }

    fn velocity(&self, t_s: f64) -> f64 {
        self.amplitude * TAU * self.frequency_hz * (TAU * self.frequency_hz * t_s + self.phase).cos()
    }

    /// Scales the temporal frequency (and so the speed).
    fn faster(&self, factor: f64) -> Self {
        Self {
            frequency_hz: self.frequency_hz * factor,
            ..*self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    Sinusoidal { x: AxisMotion, y: AxisMotion },
    /// Catmull-Rom spline through `[t_us, x, y]` points, held constant
    /// outside the covered time range.
    Waypoints { points: Vec<[f64; 3]> },
}

impl Trajectory {
    /// Position and velocity (px/s) at `t` microseconds.
    pub fn state(&self, t_us: u64) -> ((f64, f64), (f64, f64)) {
        let t_s = t_us as f64 * 1e-6;
        match self {
            Trajectory::Sinusoidal { x, y } => {
                ((x.position(t_s), y.position(t_s)), (x.velocity(t_s), y.velocity(t_s)))
            }
            Trajectory::Waypoints { points } => catmull_rom(points, t_us as f64),
        }
    }

    fn faster(&self, factor: f64) -> Self {
        match self {
            Trajectory::Sinusoidal { x, y } => Trajectory::Sinusoidal {
                x: x.faster(factor),
                y: y.faster(factor),
            },
            Trajectory::Waypoints { points } => Trajectory::Waypoints {
                points: points.iter().map(|p| [p[0] / factor, p[1], p[2]]).collect(),
            },
        }
    }
}

fn catmull_rom(points: &[[f64; 3]], t: f64) -> ((f64, f64), (f64, f64)) {
    let n = points.len();
    if n == 1 || t <= points[0][0] {
        return ((points[0][1], points[0][2]), (0.0, 0.0));
    }
    if t >= points[n - 1][0] {
        return ((points[n - 1][1], points[n - 1][2]), (0.0, 0.0));
    }
    let i = points.partition_point(|p| p[0] <= t) - 1;
    let p1 = points[i];
    let p2 = points[i + 1];
    let p0 = if i == 0 { p1 } else { points[i - 1] };
    let p3 = if i + 2 < n { points[i + 2] } else { p2 };
    let dt = p2[0] - p1[0];
    let s = (t - p1[0]) / dt;
    let coord = |k: usize| {
        // tangents scaled to the segment duration (uniform parametrization)
        let m1 = (p2[k] - p0[k]) * dt / (p2[0] - p0[0]).max(dt);
        let m2 = (p3[k] - p1[k]) * dt / (p3[0] - p1[0]).max(dt);
        let (s2, s3) = (s * s, s * s * s);
        let pos = (2.0 * s3 - 3.0 * s2 + 1.0) * p1[k]
            + (s3 - 2.0 * s2 + s) * m1
            + (-2.0 * s3 + 3.0 * s2) * p2[k]
            + (s3 - s2) * m2;
        let dpos = (6.0 * s2 - 6.0 * s) * p1[k]
            + (3.0 * s2 - 4.0 * s + 1.0) * m1
            + (-6.0 * s2 + 6.0 * s) * p2[k]
            + (3.0 * s2 - 2.0 * s) * m2;
        (pos, dpos / dt * 1e6)
    };
    let (x, vx) = coord(1);
    let (y, vy) = coord(2);
    ((x, y), (vx, vy))
}

/// Elliptical agent whose major axis follows its direction of motion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    /// `(a, b)` in pixels; `a` lies along the direction of motion.
    pub semi_axes: (f64, f64),
    pub intensity: f64,
    pub trajectory: Trajectory,
}

/// Agent placement at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub cx: f64,
    pub cy: f64,
    /// Heading in radians.
    pub angle: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Pose {
    /// Whether the pixel with center `(px + 0.5, py + 0.5)` is covered.
    #[inline]
    pub fn covers(&self, px: usize, py: usize) -> bool {
        let dx = px as f64 + 0.5 - self.cx;
        let dy = py as f64 + 0.5 - self.cy;
        let lx = dx * self.cos + dy * self.sin;
        let ly = -dx * self.sin + dy * self.cos;
        (lx / self.a).powi(2) + (ly / self.b).powi(2) <= 1.0
    }

    /// Tight axis-aligned bounds of the rotated ellipse.
    pub fn bbox(&self) -> BBox {
        let hw = ((self.a * self.cos).powi(2) + (self.b * self.sin).powi(2)).sqrt();
        let hh = ((self.a * self.sin).powi(2) + (self.b * self.cos).powi(2)).sqrt();
        BBox::new(self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)
    }

    /// Inclusive pixel ranges that can contain covered pixel centers,
    /// clipped to the sensor; `None` when entirely outside.
    fn pixel_span(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let b = self.bbox();
        let lo = |v: f64| (v - 0.5).ceil().max(0.0);
        let hi = |v: f64, n: usize| (v - 0.5).floor().min(n as f64 - 1.0);
        let (x0, x1) = (lo(b.x1), hi(b.x2, width));
        let (y0, y1) = (lo(b.y1), hi(b.y2, height));
        (x0 <= x1 && y0 <= y1).then(|| (x0 as usize, x1 as usize, y0 as usize, y1 as usize))
    }
}

impl AgentSpec {
    pub fn pose(&self, t_us: u64) -> Pose {
        let ((cx, cy), (vx, vy)) = self.trajectory.state(t_us);
        let angle = if vx == 0.0 && vy == 0.0 { 0.0 } else { vy.atan2(vx) };
        let (sin, cos) = angle.sin_cos();
        Pose {
            cx,
            cy,
            angle,
            a: self.semi_axes.0,
            b: self.semi_axes.1,
            cos,
            sin,
        }
    }
}

fn default_micro_step() -> u64 {
    100
}
fn default_contrast() -> f64 {
    0.2
}
fn default_background() -> f64 {
    0.6
}
fn default_frame_rate() -> f64 {
    120.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub width: u16,
    pub height: u16,
    pub duration_us: u64,
    #[serde(default = "default_micro_step")]
    pub micro_step_us: u64,
    #[serde(default = "default_contrast")]
    pub contrast_threshold: f64,
    #[serde(default = "default_background")]
    pub background_intensity: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    /// Randomizes stock-scene phases and directions; recorded for provenance
    /// in custom scenes.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, rename = "agent")]
    pub agents: Vec<AgentSpec>,
}

impl SceneConfig {
    pub fn geometry(&self) -> Result<SensorGeometry, SimError> {
        SensorGeometry::new(self.width, self.height)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    /// Parses the TOML scene format and validates it.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let cfg: SceneConfig = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene configs serialize")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        self.geometry()?;
        if self.micro_step_us < 1 {
            return bad("micro_step_us must be at least 1".into());
        }
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return bad(format!("contrast_threshold {} must be positive", self.contrast_threshold));
        }
        if !(self.background_intensity > 0.0 && self.background_intensity.is_finite()) {
            return bad("background_intensity must be positive".into());
        }
        if !(self.frame_rate_hz > 0.0 && self.frame_rate_hz.is_finite()) {
            return bad("frame_rate_hz must be positive".into());
        }
        let (w, h) = (self.width as f64, self.height as f64);
        for (i, agent) in self.agents.iter().enumerate() {
            let (a, b) = agent.semi_axes;
            if !(a >= 1.0 && b >= 1.0 && a.is_finite() && b.is_finite()) {
                return bad(format!("agent {i}: semi-axes must be at least 1 px"));
            }
            if !(agent.intensity > 0.0 && agent.intensity.is_finite()) {
                return bad(format!("agent {i}: intensity must be positive"));
            }
            let r = a.max(b);
            let within = |c: f64, amp: f64, len: f64| c - amp.abs() - r >= 0.0 && c + amp.abs() + r <= len;
            match &agent.trajectory {
                Trajectory::Sinusoidal { x, y } => {
                    if !(within(x.center, x.amplitude, w) && within(y.center, y.amplitude, h)) {
                        return bad(format!("agent {i}: path leaves the sensor"));
                    }
                }
                Trajectory::Waypoints { points } => {
                    if points.is_empty() {
                        return bad(format!("agent {i}: no waypoints"));
                    }
                    if points.windows(2).any(|p| p[1][0] <= p[0][0]) {
                        return bad(format!("agent {i}: waypoint times must increase"));
                    }
                    if points.iter().any(|p| !(within(p[1], 0.0, w) && within(p[2], 0.0, h))) {
                        return bad(format!("agent {i}: waypoint leaves the sensor"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn poses(&self, t_us: u64) -> Vec<Pose> {
        self.agents.iter().map(|a| a.pose(t_us)).collect()
    }

    /// Trigger timestamps `round(k · 10⁶ / frame_rate)` up to the duration.
    pub fn trigger_times(&self) -> Vec<u64> {
        (0u64..)
            .map(|k| (k as f64 * 1e6 / self.frame_rate_hz).round() as u64)
            .take_while(|&t| t <= self.duration_us)
            .collect()
    }

    /// Same scene with every trajectory `factor` times faster.
    pub fn with_speed(&self, factor: f64) -> Self {
        let mut cfg = self.clone();
        for a in &mut cfg.agents {
            a.trajectory = a.trajectory.faster(factor);
        }
        cfg
    }

    fn log_levels(&self) -> (f64, Vec<f64>) {
        (
            self.background_intensity.ln(),
            self.agents.iter().map(|a| a.intensity.ln()).collect(),
        )
    }
}

/// Log intensity of one pixel: the last listed covering agent wins.
#[inline]
fn pixel_log(poses: &[Pose], agent_logs: &[f64], background: f64, x: usize, y: usize) -> f64 {
    poses
        .iter()
        .zip(agent_logs)
        .rev()
        .find(|(p, _)| p.covers(x, y))
        .map_or(background, |(_, &l)| l)
}

pub fn render_log_intensity(cfg: &SceneConfig, t_us: u64) -> IntensityGrid {
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let (bg, logs) = cfg.log_levels();
    let poses = cfg.poses(t_us);
    let mut grid = IntensityGrid::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            grid.set(x, y, pixel_log(&poses, &logs, bg, x, y));
        }
    }
    grid
}

/// Per-pixel contrast-threshold event model. Each pixel keeps its initial
/// log intensity and a signed count of threshold crossings; its reference
/// level is `initial + count · C`.
#[derive(Clone, Debug)]
pub struct ThresholdModel {
    width: usize,
    contrast: f64,
    base: Vec<f64>,
    level: Vec<i64>,
}

impl ThresholdModel {
    pub fn new(width: usize, contrast: f64, initial: Vec<f64>) -> Self {
        let n = initial.len();
        Self {
            width,
            contrast,
            base: initial,
            level: vec![0; n],
        }
    }

    pub fn contrast(&self) -> f64 {
        self.contrast
    }

    /// Emits one event per threshold crossing between the pixel's reference
    /// level and `log_i`, all stamped `t`.
    #[inline]
    pub fn observe(&mut self, t: u64, x: usize, y: usize, log_i: f64, out: &mut Vec<Event>) {
        let i = y * self.width + x;
        let base = self.base[i];
        let c = self.contrast;
        let mut level = self.level[i];
        while log_i >= base + (level + 1) as f64 * c {
            level += 1;
            out.push(Event::new(t, x as u16, y as u16, Polarity::Positive));
        }
        while log_i <= base + (level - 1) as f64 * c {
            level -= 1;
            out.push(Event::new(t, x as u16, y as u16, Polarity::Negative));
        }
        self.level[i] = level;
    }

    /// Reference level of pixel `(x, y)`.
    pub fn reference(&self, x: usize, y: usize) -> f64 {
        let i = y * self.width + x;
        self.base[i] + self.level[i] as f64 * self.contrast
    }
}

/// Drives a [`ThresholdModel`] from an arbitrary log-intensity field sampled
/// at every micro-step boundary `micro_step, 2·micro_step, … ≤ duration`.
/// `field(t, grid)` fills a row-major grid; events within a step are ordered
/// by `(y, x)`.
pub fn simulate_field<F>(
    geometry: SensorGeometry,
    duration_us: u64,
    micro_step_us: u64,
    contrast: f64,
    mut field: F,
) -> Vec<Event>
where
    F: FnMut(u64, &mut [f64]),
{
    assert!(micro_step_us >= 1, "micro step must be at least 1 µs");
    let (w, h) = (geometry.width() as usize, geometry.height() as usize);
    let mut grid = vec![0.0; w * h];
    field(0, &mut grid);
    let mut model = ThresholdModel::new(w, contrast, grid.clone());
    let mut events = Vec::new();
    let mut t = micro_step_us;
    while t <= duration_us {
        field(t, &mut grid);
        for y in 0..h {
            for x in 0..w {
                model.observe(t, x, y, grid[y * w + x], &mut events);
            }
        }
        t += micro_step_us;
    }
    events
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GtBox {
    pub agent_id: u32,
    pub bbox: BBox,
}

/// True agent boxes per ground-truth timestamp.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub frames: BTreeMap<u64, Vec<GtBox>>,
}

impl GroundTruth {
    pub fn box_count(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn write_csv<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "{GT_CSV_HEADER}")?;
        for (t, boxes) in &self.frames {
            for b in boxes {
                writeln!(
                    sink,
                    "{t},{},{},{},{},{}",
                    b.agent_id, b.bbox.x1, b.bbox.y1, b.bbox.x2, b.bbox.y2
                )?;
            }
        }
        sink.flush()
    }

    pub fn read_csv<R: BufRead>(source: R) -> Result<Self, SimError> {
        let mut lines = source.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != GT_CSV_HEADER {
            return Err(SimError::GtParse {
                line: 1,
                reason: format!("expected header '{GT_CSV_HEADER}', got '{header}'"),
            });
        }
        let mut gt = GroundTruth::default();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let bad = |reason: String| SimError::GtParse { line: i + 2, reason };
            let f: Vec<&str> = text.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(bad(format!("expected 6 fields, got {}", f.len())));
            }
            let t: u64 = f[0].parse().map_err(|_| bad(format!("bad timestamp '{}'", f[0])))?;
            let agent_id: u32 = f[1].parse().map_err(|_| bad(format!("bad agent id '{}'", f[1])))?;
            let mut c = [0.0; 4];
            for k in 0..4 {
                c[k] = f[k + 2].parse().map_err(|_| bad(format!("bad coordinate '{}'", f[k + 2])))?;
            }
            let bbox = BBox::new(c[0], c[1], c[2], c[3]);
            if !bbox.is_valid() {
                return Err(bad("box has x2 < x1 or y2 < y1".into()));
            }
            gt.frames.entry(t).or_default().push(GtBox { agent_id, bbox });
        }
        Ok(gt)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub events: EventStream,
    pub ground_truth: GroundTruth,
    pub triggers: Vec<u64>,
}

/// Runs the scene. Only pixels that an agent covers at either end of a
/// micro-step are re-evaluated; all others keep the background level.
pub fn simulate(cfg: &SceneConfig) -> Result<Simulation, SimError> {
    cfg.validate()?;
    let geometry = cfg.geometry()?;
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let (bg, logs) = cfg.log_levels();
    let initial = render_log_intensity(cfg, 0);
    let mut model = ThresholdModel::new(w, cfg.contrast_threshold, initial.data);

    let mut events = Vec::new();
    let mut prev_poses = cfg.poses(0);
    let mut spans: Vec<Vec<(usize, usize)>> = vec![Vec::new(); h];
    let mut t = cfg.micro_step_us;
    while t <= cfg.duration_us {
        let poses = cfg.poses(t);
        for row in &mut spans {
            row.clear();
        }
        for pose in prev_poses.iter().chain(&poses) {
            if let Some((x0, x1, y0, y1)) = pose.pixel_span(w, h) {
                for row in &mut spans[y0..=y1] {
                    row.push((x0, x1));
                }
            }
        }
        for (y, row) in spans.iter_mut().enumerate() {
            if row.is_empty() {
                continue;
            }
            row.sort_unstable();
            let mut cursor = 0usize;
            for &(x0, x1) in row.iter() {
                for x in x0.max(cursor)..=x1 {
                    let l = pixel_log(&poses, &logs, bg, x, y);
                    model.observe(t, x, y, l, &mut events);
                }
                cursor = cursor.max(x1 + 1);
            }
        }
        prev_poses = poses;
        t += cfg.micro_step_us;
    }

    let triggers = cfg.trigger_times();
    let mut ground_truth = GroundTruth::default();
    for &tt in &triggers {
        let boxes = cfg
            .poses(tt)
            .iter()
            .enumerate()
            .map(|(i, p)| GtBox {
                agent_id: i as u32,
                bbox: p.bbox(),
            })
            .collect();
        ground_truth.frames.insert(tt, boxes);
    }
    Ok(Simulation {
        events: EventStream::new(geometry, events),
        ground_truth,
        triggers,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayFrame {
    pub t: u64,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// 8-bit quantization of linear intensity: `round(255 · min(I, 1))`.
pub fn quantize_log_intensity(log_i: f64) -> u8 {
    (log_i.exp().clamp(0.0, 1.0) * 255.0).round() as u8
}

/// One grayscale frame per trigger timestamp.
pub fn render_frames(cfg: &SceneConfig) -> Vec<GrayFrame> {
    cfg.trigger_times()
        .into_iter()
        .map(|t| {
            let grid = render_log_intensity(cfg, t);
            GrayFrame {
                t,
                width: grid.width,
                height: grid.height,
                pixels: grid.data.iter().map(|&l| quantize_log_intensity(l)).collect(),
            }
        })
        .collect()
}

pub const STOCK_SCENES: [&str; 6] = ["fish1", "fish2", "fish3", "fish4", "fish5", "fish6"];

/// Speed of stock agents along their circular paths, px/s.
const STOCK_SPEED: f64 = 115.0;
/// Stock agent semi-axes. Near-round bodies keep the leading and trailing
/// event crescents of a moving agent connected in the time surface.
const STOCK_AXES: (f64, f64) = (6.25, 6.0);

/// Stock "fish tank" scenes `fish1` … `fish6`: 128×128 px, 10 s, 120 Hz
/// triggers. Each fish circles inside its own disk, so paths never cross.
/// `seed` picks the starting phase and the direction of each circle.
pub fn stock_scene(name: &str, seed: u64) -> Option<SceneConfig> {
    let k: usize = name.strip_prefix("fish")?.parse().ok()?;
    let (centers, radius): (Vec<(f64, f64)>, f64) = match k {
        1 => (vec![(64.0, 64.0)], 40.0),
        2 => (vec![(36.0, 64.0), (92.0, 64.0)], 21.0),
        3 => (vec![(32.0, 34.0), (96.0, 34.0), (64.0, 94.0)], 22.0),
        4 => (vec![(32.0, 32.0), (96.0, 32.0), (32.0, 96.0), (96.0, 96.0)], 22.0),
        5 | 6 => {
            let all = [(21.0, 32.0), (64.0, 32.0), (107.0, 32.0), (21.0, 96.0), (64.0, 96.0), (107.0, 96.0)];
            (all[..k].to_vec(), 14.0)
        }
        _ => return None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frequency_hz = STOCK_SPEED / (TAU * radius);
    let agents = centers
        .into_iter()
        .map(|(cx, cy)| {
            let phase = rng.random_range(0.0..TAU);
            let direction = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            AgentSpec {
                semi_axes: STOCK_AXES,
                intensity: 0.15,
                trajectory: Trajectory::Sinusoidal {
                    x: AxisMotion {
                        center: cx,
                        amplitude: radius,
                        frequency_hz,
                        phase: phase + std::f64::consts::FRAC_PI_2,
                    },
                    y: AxisMotion {
                        center: cy,
                        amplitude: radius * direction,
                        frequency_hz,
                        phase,
                    },
                },
            }
        })
        .collect();
    Some(SceneConfig {
        width: 128,
        height: 128,
        duration_us: 10_000_000,
        micro_step_us: default_micro_step(),
        contrast_threshold: default_contrast(),
        background_intensity: default_background(),
        frame_rate_hz: default_frame_rate(),
        seed,
        agents,
    })
}
