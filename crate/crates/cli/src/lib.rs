//! Command-line front end for the `evtrack` pipeline.
//!
//! Every stage reads and writes plain files (events → detections → tracks →
//! report), so any stage can be replaced by an external tool.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Deserialize;

use evtrack::calibration::{approximation_report, warp_events, CalibModel, Calibration, WarpDirection};
use evtrack::detection::{detect_blobs, load_detections, write_detections, BlobParams, Connectivity, Detection, DetectionSet};
use evtrack::event::{read_events, validate_stream, write_events, EventFormat};
use evtrack::metrics::evaluate;
use evtrack::simulator::{render_frames, simulate, stock_scene, GroundTruth, SceneConfig, STOCK_SCENES};
use evtrack::sync::{read_triggers, register_triggers, write_triggers, EventWindow};
use evtrack::timesurface::{DecayParams, TimeSurface, DEFAULT_TAU_US};
use evtrack::tracker::{read_tracks, write_tracks, TrackedBox, Tracker, TrackerParams};
use evtrack::{EventStream, SensorGeometry};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Data(_) => exit::DATA,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn data<E: std::fmt::Display>(stage: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{stage}: {e}"))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 20, f))
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

#[derive(Parser, Debug)]
#[command(name = "evtrack", version, about = "Event-camera multi-object tracking pipeline")]
pub struct Cli {
    /// TOML parameter file; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate events, ground truth and triggers from a synthetic scene.
    Simulate(SimulateArgs),
    /// Write decayed time-surface images at given timestamps.
    Render(RenderArgs),
    /// Run the blob detector on time-surface snapshots.
    Detect(DetectArgs),
    /// Run the full detection and tracking pipeline.
    Track(TrackArgs),
    /// Score tracks (and optionally detections) against ground truth.
    Eval(EvalArgs),
    /// Map events through a two-camera calibration.
    Warp(WarpArgs),
    /// Print stream statistics.
    Info(InfoArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Event file (`.csv` for text, anything else for binary).
    #[arg(long, value_name = "PATH")]
    events: PathBuf,
    /// Sensor size `WxH`, required for CSV input.
    #[arg(long, value_name = "WxH")]
    geometry: Option<String>,
}

#[derive(Args, Debug)]
struct SurfaceArgs {
    /// Time-surface decay constant in microseconds.
    #[arg(long, default_value_t = DEFAULT_TAU_US)]
    tau_us: f64,
}

#[derive(Args, Debug)]
struct BlobArgs {
    /// Intensity threshold for blob pixels.
    #[arg(long, default_value_t = 0.35)]
    threshold: f64,
    /// Smallest blob kept, in pixels.
    #[arg(long, default_value_t = 15)]
    min_area: usize,
    /// Pixel connectivity, 4 or 8.
    #[arg(long, default_value_t = 8)]
    connectivity: u8,
}

#[derive(Args, Debug)]
struct TrackerArgs {
    /// Minimum IoU for a detection to match a track.
    #[arg(long, default_value_t = 0.3)]
    iou_threshold: f64,
    /// Consecutive misses tolerated before a track is deleted.
    #[arg(long, default_value_t = 5)]
    max_age: u32,
    /// Matches needed before a track is confirmed.
    #[arg(long, default_value_t = 3)]
    min_hits: u32,
    /// Also emit tentative tracks.
    #[arg(long, default_value_t = false)]
    emit_tentative: bool,
}

#[derive(Args, Debug)]
struct WindowArgs {
    /// Events per snapshot: `since-prev` or `half-open:<us>`.
    #[arg(long, default_value = "since-prev")]
    window: String,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// TOML scene description.
    #[arg(long, value_name = "PATH", conflicts_with = "stock")]
    scene: Option<PathBuf>,
    /// Built-in scene (fish1 … fish6).
    #[arg(long)]
    stock: Option<String>,
    /// Seed for stock-scene randomization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output event file.
    #[arg(long, value_name = "PATH")]
    out_events: PathBuf,
    /// Output ground-truth CSV.
    #[arg(long, value_name = "PATH")]
    out_gt: Option<PathBuf>,
    /// Output trigger timestamps, one per line.
    #[arg(long, value_name = "PATH")]
    out_triggers: Option<PathBuf>,
    /// Directory for grayscale PGM frames, one per trigger.
    #[arg(long, value_name = "DIR")]
    out_frames: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Query timestamps in microseconds (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    at: Vec<u64>,
    /// Also render at every timestamp listed in this file.
    #[arg(long, value_name = "PATH")]
    triggers: Option<PathBuf>,
    /// Output directory for `surface_<t>_<neg|pos>.pgm`.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Also write a false-color PNG (red = positive, blue = negative).
    #[arg(long, default_value_t = false)]
    png: bool,
    #[command(flatten)]
    surface: SurfaceArgs,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Trigger timestamps, one snapshot per line.
    #[arg(long, value_name = "PATH")]
    triggers: PathBuf,
    /// Output detections as JSON lines.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[command(flatten)]
    surface: SurfaceArgs,
    #[command(flatten)]
    blob: BlobArgs,
    #[command(flatten)]
    window: WindowArgs,
}

#[derive(Args, Debug)]
struct TrackArgs {
    /// Event file; not needed with `--detections`.
    #[arg(long, value_name = "PATH")]
    events: Option<PathBuf>,
    /// Sensor size `WxH`, required for CSV input.
    #[arg(long, value_name = "WxH")]
    geometry: Option<String>,
    /// Trigger timestamps, one snapshot per line.
    #[arg(long, value_name = "PATH")]
    triggers: Option<PathBuf>,
    /// Precomputed detections (JSON lines); bypasses the blob detector.
    #[arg(long, value_name = "PATH")]
    detections: Option<PathBuf>,
    /// Output track CSV.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[command(flatten)]
    surface: SurfaceArgs,
    #[command(flatten)]
    blob: BlobArgs,
    #[command(flatten)]
    tracker: TrackerArgs,
    #[command(flatten)]
    window: WindowArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Track CSV.
    #[arg(long, value_name = "PATH")]
    tracks: PathBuf,
    /// Ground-truth CSV.
    #[arg(long, value_name = "PATH")]
    gt: PathBuf,
    /// Detections (JSON lines) for average precision.
    #[arg(long, value_name = "PATH")]
    detections: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Print a table instead of JSON.
    #[arg(long, default_value_t = false)]
    pretty: bool,
    /// Column label for the table.
    #[arg(long, default_value = "time-surface")]
    label: String,
}

#[derive(Args, Debug)]
struct WarpArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Calibration file (`K1`, `K2`, and `H` or `R`/`t`/`n`/`d`).
    #[arg(long, value_name = "PATH")]
    calib: Option<PathBuf>,
    /// `event2frame` or `frame2event`.
    #[arg(long, default_value = "event2frame")]
    direction: String,
    /// Output sensor size `WxH`; defaults to the input size.
    #[arg(long, value_name = "WxH")]
    target: Option<String>,
    /// Output event file.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Grid step for the rotation-only deviation report, in pixels.
    #[arg(long, default_value_t = 8)]
    report_step: usize,
    /// Deviation above which the rotation-only model is flagged, in pixels.
    #[arg(long, default_value_t = 0.5)]
    tolerance_px: f64,
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Time the time-surface update over the whole stream.
    #[arg(long, default_value_t = false)]
    bench: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SurfaceSection {
    tau_us: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionSection {
    threshold: Option<f64>,
    min_area: Option<usize>,
    connectivity: Option<u8>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackerSection {
    iou_threshold: Option<f64>,
    max_age: Option<u32>,
    min_hits: Option<u32>,
    emit_tentative: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SyncSection {
    window: Option<String>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    scene: Option<PathBuf>,
    calibration: Option<PathBuf>,
    seed: Option<u64>,
    #[serde(default)]
    surface: SurfaceSection,
    #[serde(default)]
    detection: DetectionSection,
    #[serde(default)]
    tracker: TrackerSection,
    #[serde(default)]
    sync: SyncSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Flag value if it was typed, else the config value, else the flag default.
fn pick<T>(m: &ArgMatches, id: &str, flag: T, cfg: Option<T>) -> T {
    if m.value_source(id) == Some(ValueSource::CommandLine) {
        flag
    } else {
        cfg.unwrap_or(flag)
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn decay_params(m: &ArgMatches, a: &SurfaceArgs, c: &PipelineConfig) -> Result<DecayParams> {
    DecayParams::new(pick(m, "tau_us", a.tau_us, c.surface.tau_us)).map_err(usage)
}

fn blob_params(m: &ArgMatches, a: &BlobArgs, c: &PipelineConfig) -> Result<BlobParams> {
    let d = &c.detection;
    let connectivity = Connectivity::try_from(pick(m, "connectivity", a.connectivity, d.connectivity)).map_err(usage)?;
    BlobParams::new(
        pick(m, "threshold", a.threshold, d.threshold),
        pick(m, "min_area", a.min_area, d.min_area),
        connectivity,
    )
    .map_err(usage)
}

fn tracker_params(m: &ArgMatches, a: &TrackerArgs, c: &PipelineConfig) -> Result<TrackerParams> {
    let t = &c.tracker;
    let params = TrackerParams {
        iou_threshold: pick(m, "iou_threshold", a.iou_threshold, t.iou_threshold),
        max_age: pick(m, "max_age", a.max_age, t.max_age),
        min_hits: pick(m, "min_hits", a.min_hits, t.min_hits),
        emit_tentative: pick(m, "emit_tentative", a.emit_tentative, t.emit_tentative),
        ..TrackerParams::default()
    };
    params.validate().map_err(usage)?;
    Ok(params)
}

fn window(m: &ArgMatches, a: &WindowArgs, c: &PipelineConfig) -> Result<EventWindow> {
    pick(m, "window", a.window.clone(), c.sync.window.clone()).parse().map_err(CliError::Usage)
}

fn geometry_arg(s: Option<&str>) -> Result<Option<SensorGeometry>> {
    s.map(|g| SensorGeometry::parse(g).map_err(usage)).transpose()
}

fn load_events(path: &Path, geometry: Option<&str>) -> Result<EventStream> {
    let geometry = geometry_arg(geometry)?;
    let format = EventFormat::from_path(path);
    if format == EventFormat::Csv && geometry.is_none() {
        return Err(CliError::Usage(format!("{}: CSV events need --geometry WxH", path.display())));
    }
    read_events(open(path)?, format, geometry).map_err(|e| CliError::Data(format!("events {}: {e}", path.display())))
}

fn save_events(stream: &EventStream, path: &Path) -> Result<()> {
    write_events(stream, create(path)?, EventFormat::from_path(path))
        .map(|_| ())
        .map_err(|e| CliError::Data(format!("writing {}: {e}", path.display())))
}

fn load_triggers(path: &Path) -> Result<Vec<u64>> {
    read_triggers(open(path)?).map_err(|e| CliError::Data(format!("triggers {}: {e}", path.display())))
}

/// Runs the time surface and blob detector at every trigger timestamp.
pub fn detect_snapshots(
    events: &EventStream,
    triggers: Vec<u64>,
    window: EventWindow,
    decay: DecayParams,
    blobs: &BlobParams,
) -> std::result::Result<Vec<(u64, Vec<Detection>)>, String> {
    let n = triggers.len();
    let timeline = register_triggers(triggers, n).map_err(|e| format!("sync: {e}"))?;
    let mut surface = TimeSurface::new(events.geometry);
    let mut out = Vec::with_capacity(n);
    for (i, &t) in timeline.frame_times().iter().enumerate() {
        let slice = timeline
            .events_for_frame(&events.events, i, window)
            .map_err(|e| format!("sync: {e}"))?;
        if matches!(window, EventWindow::HalfOpen { .. }) {
            surface.reset();
        }
        surface.update_all(slice).map_err(|e| format!("time surface: {e}"))?;
        let snapshot = surface.snapshot_pair(t, decay).map_err(|e| format!("time surface: {e}"))?;
        out.push((t, detect_blobs(&snapshot, blobs)));
    }
    Ok(out)
}

/// Steps the tracker over `snapshots` in order.
pub fn run_tracker(
    params: TrackerParams,
    snapshots: &[(u64, Vec<Detection>)],
) -> std::result::Result<Vec<TrackedBox>, String> {
    let mut tracker = Tracker::new(params).map_err(|e| format!("tracker: {e}"))?;
    let mut rows = Vec::new();
    for (t, dets) in snapshots {
        rows.extend(tracker.step(dets, *t).map_err(|e| format!("tracker: {e}"))?);
    }
    Ok(rows)
}

fn cmd_simulate(a: &SimulateArgs, m: &ArgMatches, cfg: &PipelineConfig) -> Result<()> {
    let scene_path = a.scene.clone().or_else(|| cfg.scene.clone());
    let seed = pick(m, "seed", a.seed, cfg.seed);
    let scene = match (&a.stock, scene_path) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --scene or --stock".into())),
        (None, None) => return Err(CliError::Usage("a scene is required (--scene or --stock)".into())),
        (Some(name), None) => stock_scene(name, seed).ok_or_else(|| {
            CliError::Usage(format!("unknown stock scene '{name}' (one of {})", STOCK_SCENES.join(", ")))
        })?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Data(format!("cannot read scene {}: {e}", path.display())))?;
            let mut scene = SceneConfig::parse(&text).map_err(|e| CliError::Data(format!("scene {}: {e}", path.display())))?;
            if m.value_source("seed") == Some(ValueSource::CommandLine) || cfg.seed.is_some() {
                scene.seed = seed;
            }
            scene
        }
    };
    let sim = simulate(&scene).map_err(data("simulate"))?;
    save_events(&sim.events, &a.out_events)?;
    if let Some(path) = &a.out_gt {
        sim.ground_truth.write_csv(create(path)?).map_err(data("ground truth"))?;
    }
    if let Some(path) = &a.out_triggers {
        write_triggers(&sim.triggers, create(path)?).map_err(data("triggers"))?;
    }
    if let Some(dir) = &a.out_frames {
        std::fs::create_dir_all(dir).map_err(data("frames"))?;
        for (i, frame) in render_frames(&scene).into_iter().enumerate() {
            let img = image::GrayImage::from_raw(frame.width as u32, frame.height as u32, frame.pixels)
                .ok_or_else(|| CliError::Internal("frame buffer size mismatch".into()))?;
            img.save(dir.join(format!("frame_{i:05}.pgm"))).map_err(data("frames"))?;
        }
    }
    println!(
        "simulated {} events, {} triggers, {} ground-truth boxes",
        sim.events.len(),
        sim.triggers.len(),
        sim.ground_truth.box_count()
    );
    Ok(())
}

fn cmd_render(a: &RenderArgs, m: &ArgMatches, cfg: &PipelineConfig) -> Result<()> {
    let decay = decay_params(m, &a.surface, cfg)?;
    let events = load_events(&a.input.events, a.input.geometry.as_deref())?;
    let mut times = a.at.clone();
    if let Some(path) = &a.triggers {
        times.extend(load_triggers(path)?);
    }
    if times.is_empty() {
        return Err(CliError::Usage("no query timestamps (use --at or --triggers)".into()));
    }
    times.sort_unstable();
    times.dedup();
    std::fs::create_dir_all(&a.out_dir).map_err(data("render"))?;
    let (w, h) = (events.geometry.width() as u32, events.geometry.height() as u32);
    let mut surface = TimeSurface::new(events.geometry);
    let mut next = 0;
    for t in times {
        let end = next + events.events[next..].partition_point(|e| e.t <= t);
        surface.update_all(&events.events[next..end]).map_err(data("time surface"))?;
        next = end;
        let pair = surface.snapshot_pair(t, decay).map_err(data("time surface"))?;
        for (grid, name) in pair.channels.iter().zip(["neg", "pos"]) {
            let img = image::GrayImage::from_raw(w, h, grid.to_u8())
                .ok_or_else(|| CliError::Internal("image buffer size mismatch".into()))?;
            img.save(a.out_dir.join(format!("surface_{t}_{name}.pgm"))).map_err(data("render"))?;
        }
        if a.png {
            let (neg, pos) = (pair.channels[0].to_u8(), pair.channels[1].to_u8());
            let rgb: Vec<u8> = pos.iter().zip(&neg).flat_map(|(&p, &n)| [p, 0, n]).collect();
            let img = image::RgbImage::from_raw(w, h, rgb)
                .ok_or_else(|| CliError::Internal("image buffer size mismatch".into()))?;
            img.save(a.out_dir.join(format!("surface_{t}.png"))).map_err(data("render"))?;
        }
    }
    Ok(())
}

fn cmd_detect(a: &DetectArgs, m: &ArgMatches, cfg: &PipelineConfig) -> Result<()> {
    let decay = decay_params(m, &a.surface, cfg)?;
    let blobs = blob_params(m, &a.blob, cfg)?;
    let window = window(m, &a.window, cfg)?;
    let events = load_events(&a.input.events, a.input.geometry.as_deref())?;
    let triggers = load_triggers(&a.triggers)?;
    let snapshots = detect_snapshots(&events, triggers, window, decay, &blobs).map_err(data("detect"))?;
    let set: DetectionSet = snapshots.into_iter().filter(|(_, d)| !d.is_empty()).collect();
    write_detections(&set, create(&a.out)?).map_err(data("detect"))?;
    Ok(())
}

fn cmd_track(a: &TrackArgs, m: &ArgMatches, cfg: &PipelineConfig) -> Result<()> {
    let params = tracker_params(m, &a.tracker, cfg)?;
    let decay = decay_params(m, &a.surface, cfg)?;
    let blobs = blob_params(m, &a.blob, cfg)?;
    let window = window(m, &a.window, cfg)?;
    let triggers = a.triggers.as_deref().map(load_triggers).transpose()?;
    let snapshots = match (&a.detections, &a.events) {
        (Some(path), _) => {
            let set = load_detections(open(path)?).map_err(|e| CliError::Data(format!("detections {}: {e}", path.display())))?;
            let mut times: Vec<u64> = set.keys().copied().chain(triggers.into_iter().flatten()).collect();
            times.sort_unstable();
            times.dedup();
            times
                .into_iter()
                .map(|t| (t, set.get(&t).cloned().unwrap_or_default()))
                .collect()
        }
        (None, Some(events_path)) => {
            let triggers = triggers.ok_or_else(|| CliError::Usage("--triggers is required without --detections".into()))?;
            let events = load_events(events_path, a.geometry.as_deref())?;
            detect_snapshots(&events, triggers, window, decay, &blobs).map_err(data("track"))?
        }
        (None, None) => return Err(CliError::Usage("give --events or --detections".into())),
    };
    let rows = run_tracker(params, &snapshots).map_err(data("track"))?;
    write_tracks(&rows, create(&a.out)?).map_err(data("track"))?;
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let tracks = read_tracks(open(&a.tracks)?).map_err(|e| CliError::Data(format!("tracks {}: {e}", a.tracks.display())))?;
    let gt = GroundTruth::read_csv(open(&a.gt)?).map_err(|e| CliError::Data(format!("ground truth {}: {e}", a.gt.display())))?;
    let dets = a
        .detections
        .as_deref()
        .map(|p| load_detections(open(p)?).map_err(|e| CliError::Data(format!("detections {}: {e}", p.display()))))
        .transpose()?;
    let report = evaluate(&tracks, &gt, dets.as_ref()).map_err(data("eval"))?;
    let text = if a.pretty {
        report.table(&a.label)
    } else {
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))? + "\n"
    };
    match &a.out {
        Some(path) => {
            let mut f = create(path)?;
            f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(data("eval"))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_warp(a: &WarpArgs, cfg: &PipelineConfig) -> Result<()> {
    let direction: WarpDirection = a.direction.parse().map_err(CliError::Usage)?;
    let calib_path = a
        .calib
        .clone()
        .or_else(|| cfg.calibration.clone())
        .ok_or_else(|| CliError::Usage("a calibration file is required (--calib)".into()))?;
    let text = std::fs::read_to_string(&calib_path)
        .map_err(|e| CliError::Data(format!("cannot read calibration {}: {e}", calib_path.display())))?;
    let calib = Calibration::parse(&text).map_err(|e| CliError::Data(format!("calibration {}: {e}", calib_path.display())))?;
    let target = geometry_arg(a.target.as_deref())?;
    let events = load_events(&a.input.events, a.input.geometry.as_deref())?;
    let h = calib.pixel_homography(direction).map_err(data("calibration"))?;
    let warped = warp_events(&h, &events, target.unwrap_or(events.geometry));
    save_events(&warped.stream, &a.out)?;
    println!(
        "warped {} events, dropped {} outside the target and {} at infinity",
        warped.stream.len(),
        warped.dropped_outside,
        warped.dropped_infinite
    );
    if let CalibModel::Factors(f) = &calib.model {
        let report = approximation_report(f, &calib.k1, &calib.k2, events.geometry, a.report_step, a.tolerance_px)
            .map_err(data("calibration"))?;
        println!(
            "rotation-only model: |t|/d = {:.3e}, max deviation {:.4} px, mean {:.4} px over {} samples{}",
            report.translation_ratio,
            report.max_deviation_px,
            report.mean_deviation_px,
            report.samples,
            if report.flagged { " (exceeds tolerance)" } else { "" }
        );
    }
    Ok(())
}

/// Mean event rate over the stream's time span, in events per second.
pub fn mean_event_rate(count: usize, first_t: u64, last_t: u64) -> Option<f64> {
    (last_t > first_t).then(|| count as f64 / ((last_t - first_t) as f64 * 1e-6))
}

fn cmd_info(a: &InfoArgs) -> Result<()> {
    let events = load_events(&a.input.events, a.input.geometry.as_deref())?;
    let report = validate_stream(&events);
    println!("geometry: {}", events.geometry);
    println!("events: {}", report.count);
    if let (Some(first), Some(last)) = (report.first_t, report.last_t) {
        println!("first_t_us: {first}");
        println!("last_t_us: {last}");
        println!("duration_s: {:.6}", (last - first) as f64 * 1e-6);
        if let Some(rate) = mean_event_rate(report.count, first, last) {
            println!("rate: {:.0} events/s", rate);
        }
    }
    if a.bench {
        let mut surface = TimeSurface::new(events.geometry);
        let start = Instant::now();
        surface.update_all(&events.events).map_err(data("bench"))?;
        let secs = start.elapsed().as_secs_f64().max(1e-9);
        std::hint::black_box(&surface);
        println!(
            "bench: {} events in {:.3} s, {:.0} events/s",
            events.len(),
            secs,
            events.len() as f64 / secs
        );
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the selected subcommand.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.print().map_err(|e| CliError::Internal(e.to_string()))?;
                return Ok(());
            }
            return Err(CliError::Usage(e.render().to_string()));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, sub, &cfg),
        Command::Render(a) => cmd_render(a, sub, &cfg),
        Command::Detect(a) => cmd_detect(a, sub, &cfg),
        Command::Track(a) => cmd_track(a, sub, &cfg),
        Command::Eval(a) => cmd_eval(a),
        Command::Warp(a) => cmd_warp(a, &cfg),
        Command::Info(a) => cmd_info(a),
    }
}

