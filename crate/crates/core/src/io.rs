//! File formats: frame and truth exchange files, aggregated clouds, run
//! configuration, scenario specs, and flat report tables.
//!
//! Frame-shaped data travels as line-delimited JSON — one frame per line —
//! which streams, diffs, and round-trips losslessly (floats are written
//! shortest-exact, so write → read → write is byte-identical). Configuration
//! is TOML. Angles in files are degrees; everything in memory is radians.
//! All writers go through a write-temp-then-rename so a crashed run never
//! leaves a half-written file behind.

use crate::aggregate::{AggregatedCloud, AggregatedPoint, FrameRecord, PointSource};
use crate::doppler::{EgoState, EgoVelocity, RadarPoint};
use crate::geometry::Vec3;
use crate::heading::{
    build_table, GThetaTable, HeadingDistribution, QuadratureSpec, DEFAULT_RESOLUTION_DEGREES,
};
use crate::sim::{
    EgoSegment, FieldOfView, GroundTruth, NoiseSpec, ObjectClass, ObjectSpec, ScenarioSpec,
    StaticStrip,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { path: path.display().to_string(), line, message: message.into() }
}

fn invalid_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Invalid { path: path.display().to_string(), message: message.into() }
}

/// Write through a temp file in the target directory, then rename into
/// place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    let mut f = fs::File::create(&tmp).map_err(|e| file_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| file_err(&tmp, e))?;
    f.sync_all().map_err(|e| file_err(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| file_err(path, e))?;
    Ok(())
}

// ─── Frame files ───

#[derive(Serialize, Deserialize)]
struct EgoLine {
    vx: f64,
    vy: f64,
    yaw_rate: f64,
}

#[derive(Serialize, Deserialize)]
struct PointLine {
    x: f64,
    y: f64,
    z: f64,
    d: f64,
    i: f64,
}

#[derive(Serialize, Deserialize)]
struct FrameLine {
    t: f64,
    ego: EgoLine,
    points: Vec<PointLine>,
}

pub fn frames_to_string(frames: &[FrameRecord]) -> String {
    let mut out = String::new();
    for f in frames {
        let line = FrameLine {
            t: f.t,
            ego: EgoLine {
                vx: f.ego.velocity.cx,
                vy: f.ego.velocity.cy,
                yaw_rate: f.ego.yaw_rate,
            },
            points: f
                .points
                .iter()
                .map(|p| PointLine {
                    x: p.position.x,
                    y: p.position.y,
                    z: p.position.z,
                    d: p.doppler,
                    i: p.intensity,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

pub fn write_frames(path: &Path, frames: &[FrameRecord]) -> Result<(), IoError> {
    atomic_write(path, frames_to_string(frames).as_bytes())
}

pub fn read_frames(path: &Path) -> Result<Vec<FrameRecord>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut frames = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: FrameLine = serde_json::from_str(raw)
            .map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        if !line.t.is_finite() {
            return Err(parse_err(path, i + 1, "non-finite timestamp"));
        }
        if let Some(prev) = frames.last().map(|f: &FrameRecord| f.t) {
            if line.t <= prev {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("timestamp {} not after previous {}", line.t, prev),
                ));
            }
        }
        let mut points = Vec::with_capacity(line.points.len());
        for (pi, p) in line.points.iter().enumerate() {
            if ![p.x, p.y, p.z, p.d, p.i].iter().all(|v| v.is_finite()) {
                return Err(parse_err(path, i + 1, format!("point {pi} has non-finite values")));
            }
            points.push(RadarPoint {
                position: Vec3::new(p.x, p.y, p.z),
                doppler: p.d,
                intensity: p.i,
            });
        }
        frames.push(FrameRecord {
            t: line.t,
            ego: EgoState {
                velocity: EgoVelocity::new(line.ego.vx, line.ego.vy),
                yaw_rate: line.ego.yaw_rate,
            },
            points,
        });
    }
    Ok(frames)
}

// ─── Ground-truth files ───

pub fn truth_to_string(truth: &GroundTruth) -> String {
    let mut out = String::new();
    for f in &truth.frames {
        out.push_str(&serde_json::to_string(f).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<(), IoError> {
    atomic_write(path, truth_to_string(truth).as_bytes())
}

pub fn read_truth(path: &Path) -> Result<GroundTruth, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut truth = GroundTruth::default();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let frame = serde_json::from_str(raw)
            .map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        truth.frames.push(frame);
    }
    Ok(truth)
}

// ─── Aggregated-cloud files ───

#[derive(Serialize, Deserialize)]
struct AggPointLine {
    x: f64,
    y: f64,
    z: f64,
    /// Doppler feature (dynamic Doppler unless ego removal was disabled).
    v: f64,
    i: f64,
    /// Source frame offset: 0 current, -1 previous, ...
    k: i32,
    /// Index within the source frame's input point list; optional so files
    /// from other producers still parse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct AggFrameLine {
    t: f64,
    points: Vec<AggPointLine>,
}

/// One aggregation output per input frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedFrame {
    pub t: f64,
    pub cloud: AggregatedCloud,
}

pub fn aggregated_to_string(frames: &[AggregatedFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        let line = AggFrameLine {
            t: f.t,
            points: f
                .cloud
                .points
                .iter()
                .zip(&f.cloud.sources)
                .map(|(p, s)| AggPointLine {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                    v: p.v_dyn,
                    i: p.intensity,
                    k: p.frame_index,
                    s: Some(s.index),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

pub fn write_aggregated(path: &Path, frames: &[AggregatedFrame]) -> Result<(), IoError> {
    atomic_write(path, aggregated_to_string(frames).as_bytes())
}

/// Read aggregated clouds. Provenance is reconstructed only when every point
/// carries its source ordinal; otherwise `sources` comes back empty and
/// truth-dependent evaluation will refuse the file.
pub fn read_aggregated(path: &Path) -> Result<Vec<AggregatedFrame>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut frames = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: AggFrameLine = serde_json::from_str(raw)
            .map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        let mut cloud = AggregatedCloud::default();
        let complete = line.points.iter().all(|p| p.s.is_some());
        for p in &line.points {
            if p.k > 0 {
                return Err(parse_err(path, i + 1, format!("frame offset {} > 0", p.k)));
            }
            cloud.points.push(AggregatedPoint {
                x: p.x,
                y: p.y,
                z: p.z,
                v_dyn: p.v,
                intensity: p.i,
                frame_index: p.k,
            });
            if complete {
                cloud
                    .sources
                    .push(PointSource { frame_index: p.k, index: p.s.unwrap() });
            }
        }
        frames.push(AggregatedFrame { t: line.t, cloud });
    }
    Ok(frames)
}

// ─── Run configuration ───

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Current frame only.
    None,
    /// Short fixed window, no compensation.
    Standard,
    /// Adaptive per-point durations with radial compensation.
    Doppdrive,
    /// Full window with radial compensation, no retention limit.
    FixedDuration,
}

impl AggregationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMode::None => "none",
            AggregationMode::Standard => "standard",
            AggregationMode::Doppdrive => "doppdrive",
            AggregationMode::FixedDuration => "fixed_duration",
        }
    }
}

impl std::str::FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(AggregationMode::None),
            "standard" => Ok(AggregationMode::Standard),
            "doppdrive" => Ok(AggregationMode::Doppdrive),
            "fixed_duration" => Ok(AggregationMode::FixedDuration),
            other => Err(format!(
                "unknown mode {other:?} (expected none, standard, doppdrive, or fixed_duration)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgoVelocitySource {
    /// Trust the per-frame metadata.
    Metadata,
    /// Estimate from the static returns each frame; metadata ignored.
    Estimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HeadingSection {
    kind: String,
    mu_deg: f64,
    b_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    mode: AggregationMode,
    tolerance_d: f64,
    window_seconds: f64,
    baseline_window_seconds: f64,
    ego_velocity_source: EgoVelocitySource,
    seed: u64,
    heading: HeadingSection,
    #[serde(default)]
    remove_ego_doppler: Option<bool>,
    #[serde(default)]
    static_speed_epsilon: Option<f64>,
    #[serde(default)]
    resolution_deg: Option<f64>,
}

/// A validated run configuration with its lookup table already built.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: AggregationMode,
    pub tolerance_d: f64,
    pub window_seconds: f64,
    pub baseline_window_seconds: f64,
    pub ego_velocity_source: EgoVelocitySource,
    pub seed: u64,
    pub heading_mu: f64,
    pub heading_b: f64,
    pub remove_ego_doppler: bool,
    pub static_speed_epsilon: f64,
    pub g_table: GThetaTable,
}

impl RunConfig {
    pub fn to_aggregation_config(&self) -> crate::aggregate::AggregationConfig {
        let mut cfg = crate::aggregate::AggregationConfig::new(self.g_table.clone());
        cfg.tolerance_d = self.tolerance_d;
        cfg.window_seconds = self.window_seconds;
        cfg.baseline_window_seconds = self.baseline_window_seconds;
        cfg.remove_ego_doppler = self.remove_ego_doppler;
        cfg.static_speed_epsilon = self.static_speed_epsilon;
        cfg
    }
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let file: RunConfigFile =
        toml::from_str(&text).map_err(|e| invalid_err(path, e.to_string()))?;
    if file.heading.kind != "laplace" {
        return Err(invalid_err(
            path,
            format!(
                "heading.kind = {:?}: only \"laplace\" is supported in run configs \
                 (empirical models are fit from samples via the library)",
                file.heading.kind
            ),
        ));
    }
    let mu = file.heading.mu_deg.to_radians();
    let b = file.heading.b_deg.to_radians();
    let dist = HeadingDistribution::laplace(mu, b)
        .map_err(|e| invalid_err(path, e.to_string()))?;
    let resolution = file
        .resolution_deg
        .unwrap_or(DEFAULT_RESOLUTION_DEGREES)
        .to_radians();
    let g_table = build_table(&dist, resolution, &QuadratureSpec::default())
        .map_err(|e| invalid_err(path, e.to_string()))?;
    let cfg = RunConfig {
        mode: file.mode,
        tolerance_d: file.tolerance_d,
        window_seconds: file.window_seconds,
        baseline_window_seconds: file.baseline_window_seconds,
        ego_velocity_source: file.ego_velocity_source,
        seed: file.seed,
        heading_mu: mu,
        heading_b: b,
        remove_ego_doppler: file.remove_ego_doppler.unwrap_or(true),
        static_speed_epsilon: file.static_speed_epsilon.unwrap_or(0.1),
        g_table,
    };
    // Surface aggregation-parameter problems at load, not first use.
    cfg.to_aggregation_config()
        .validate()
        .map_err(|e| invalid_err(path, e.to_string()))?;
    Ok(cfg)
}

// ─── Scenario files ───

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EgoSegmentFile {
    duration: f64,
    speed: f64,
    #[serde(default)]
    yaw_rate_deg_per_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ObjectFile {
    class: ObjectClass,
    #[serde(default)]
    extent: Option<[f64; 3]>,
    position: [f64; 2],
    speed: f64,
    heading_deg: f64,
    points_per_frame: f64,
    #[serde(default)]
    allow_offscreen_spawn: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StripFile {
    start: [f64; 2],
    end: [f64; 2],
    density_per_meter: f64,
    #[serde(default = "default_strip_z")]
    z: f64,
}

fn default_strip_z() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NoiseFile {
    sigma_range: f64,
    sigma_azimuth_deg: f64,
    sigma_doppler: f64,
    intensity_jitter: f64,
}

impl Default for NoiseFile {
    fn default() -> Self {
        let n = NoiseSpec::default();
        NoiseFile {
            sigma_range: n.sigma_range,
            sigma_azimuth_deg: n.sigma_azimuth.to_degrees(),
            sigma_doppler: n.sigma_doppler,
            intensity_jitter: n.intensity_jitter,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FovFile {
    azimuth_deg: f64,
    max_range: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    duration: f64,
    fps: f64,
    seed: u64,
    fov: FovFile,
    #[serde(default)]
    noise: NoiseFile,
    ego: Vec<EgoSegmentFile>,
    #[serde(default)]
    object: Vec<ObjectFile>,
    #[serde(default)]
    strip: Vec<StripFile>,
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let file: ScenarioFile =
        toml::from_str(&text).map_err(|e| invalid_err(path, e.to_string()))?;
    let spec = ScenarioSpec {
        duration: file.duration,
        fps: file.fps,
        ego_profile: file
            .ego
            .iter()
            .map(|s| EgoSegment {
                duration: s.duration,
                speed: s.speed,
                yaw_rate: s.yaw_rate_deg_per_s.to_radians(),
            })
            .collect(),
        objects: file
            .object
            .iter()
            .map(|o| ObjectSpec {
                class: o.class,
                extent: o.extent,
                position: o.position,
                speed: o.speed,
                heading: o.heading_deg.to_radians(),
                points_per_frame: o.points_per_frame,
                allow_offscreen_spawn: o.allow_offscreen_spawn,
            })
            .collect(),
        static_strips: file
            .strip
            .iter()
            .map(|s| StaticStrip {
                start: s.start,
                end: s.end,
                density_per_meter: s.density_per_meter,
                z: s.z,
            })
            .collect(),
        noise: NoiseSpec {
            sigma_range: file.noise.sigma_range,
            sigma_azimuth: file.noise.sigma_azimuth_deg.to_radians(),
            sigma_doppler: file.noise.sigma_doppler,
            intensity_jitter: file.noise.intensity_jitter,
        },
        field_of_view: FieldOfView {
            azimuth_deg: file.fov.azimuth_deg,
            max_range: file.fov.max_range,
        },
        seed: file.seed,
    };
    spec.validate().map_err(|e| invalid_err(path, e.to_string()))?;
    Ok(spec)
}

// ─── Flat report tables ───

/// `metric,bin,value` rows — the exchange format between eval and plot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportTable {
    pub rows: Vec<(String, String, f64)>,
}

impl ReportTable {
    pub fn push(&mut self, metric: impl Into<String>, bin: impl Into<String>, value: f64) {
        self.rows.push((metric.into(), bin.into(), value));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,bin,value\n");
        for (m, b, v) in &self.rows {
            debug_assert!(!m.contains(',') && !b.contains(','));
            out.push_str(&format!("{m},{b},{v}\n"));
        }
        out
    }
}

pub fn write_table(path: &Path, table: &ReportTable) -> Result<(), IoError> {
    atomic_write(path, table.to_csv().as_bytes())
}

pub fn read_table(path: &Path) -> Result<ReportTable, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut table = ReportTable::default();
    for (i, raw) in text.lines().enumerate() {
        if i == 0 {
            if raw.trim() != "metric,bin,value" {
                return Err(parse_err(path, 1, "expected header `metric,bin,value`"));
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = raw.splitn(3, ',').collect();
        if parts.len() != 3 {
            return Err(parse_err(path, i + 1, "expected three comma-separated columns"));
        }
        let value: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|e| parse_err(path, i + 1, format!("bad value: {e}")))?;
        table.push(parts[0].trim(), parts[1].trim(), value);
    }
    Ok(table)
}
