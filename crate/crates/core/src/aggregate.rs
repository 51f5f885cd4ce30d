//! Sliding-window temporal aggregation of radar frames.
//!
//! All modes express every retained point in the newest frame's coordinates
//! ("the current frame") using the ego motion integrated from per-frame
//! metadata. They differ in how far back they reach and in what they do with
//! dynamic points:
//!
//! - [`single_frame`]: the current frame only.
//! - [`standard_aggregate`]: a short fixed window, no motion compensation.
//! - [`fixed_duration_aggregate`]: the full window with per-point radial
//!   Doppler compensation and no retention limit. Serves as the reference
//!   when measuring what the adaptive mode discards.
//! - [`doppdrive_aggregate`]: radial compensation plus a per-point retention
//!   limit. A point moving radially at |v| seen at azimuth theta keeps up to
//!   `tolerance_d / (|v| * g(theta))` seconds of history, which bounds the
//!   expected residual tangential offset by `tolerance_d`.
//!
//! Retention uses a closed comparison: a point exactly at its duration limit
//! stays. Output points are ordered by source frame (oldest first), then by
//! input order within the frame. Each output point carries exactly six
//! features (x, y, z, dynamic Doppler, intensity, frame index); the parallel
//! `sources` list ties points back to their source frame for evaluation.

use crate::doppler::{decompose, DopplerError, EgoState, RadarPoint};
use crate::geometry::{
    pose_increment, radial_frame_at, GeometryError, MotionSample, Pose2, Vec3,
};
use crate::heading::GThetaTable;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("aggregation window is empty")]
    EmptyWindow,
    #[error("invalid aggregation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Doppler(#[from] DopplerError),
}

/// One radar frame: timestamp, ego motion metadata, detections.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub t: f64,
    pub ego: EgoState,
    pub points: Vec<RadarPoint>,
}

/// Aggregation settings. Angles radians, durations seconds, distances meters.
#[derive(Debug, Clone)]
pub struct AggregationConfig {
    /// Offset budget for the residual tangential displacement, meters.
    pub tolerance_d: f64,
    /// Maximum history the adaptive and fixed-duration modes may use.
    pub window_seconds: f64,
    /// History used by [`standard_aggregate`].
    pub baseline_window_seconds: f64,
    /// When false, the baseline modes emit the raw Doppler instead of the
    /// ego-compensated one. The adaptive mode always emits the dynamic part
    /// (its shift is defined by it).
    pub remove_ego_doppler: bool,
    /// Below this |v_dyn| a point is treated as static: it keeps the whole
    /// window (the duration bound would diverge) but is still shifted by its
    /// literal v_dyn.
    pub static_speed_epsilon: f64,
    pub g_table: GThetaTable,
}

impl AggregationConfig {
    pub fn new(g_table: GThetaTable) -> Self {
        AggregationConfig {
            tolerance_d: 2.0,
            window_seconds: 2.0,
            baseline_window_seconds: 0.7,
            remove_ego_doppler: true,
            static_speed_epsilon: 0.1,
            g_table,
        }
    }

    pub fn validate(&self) -> Result<(), AggregateError> {
        if !(self.tolerance_d.is_finite() && self.tolerance_d > 0.0) {
            return Err(AggregateError::InvalidConfig(format!(
                "tolerance_d = {}",
                self.tolerance_d
            )));
        }
        if !(self.baseline_window_seconds > 0.0
            && self.window_seconds >= self.baseline_window_seconds)
        {
            return Err(AggregateError::InvalidConfig(format!(
                "window_seconds = {} must be >= baseline_window_seconds = {} > 0",
                self.window_seconds, self.baseline_window_seconds
            )));
        }
        if !(self.static_speed_epsilon >= 0.0) {
            return Err(AggregateError::InvalidConfig(format!(
                "static_speed_epsilon = {}",
                self.static_speed_epsilon
            )));
        }
        Ok(())
    }
}

/// One aggregated point: the six output features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Dynamic Doppler, or the raw Doppler when ego removal is disabled in a
    /// baseline mode.
    pub v_dyn: f64,
    pub intensity: f64,
    /// Source frame relative to the current frame: 0 for current, -1 for the
    /// previous frame, and so on.
    pub frame_index: i32,
}

/// Provenance of one aggregated point: its source frame offset and its index
/// within that frame's input point list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointSource {
    pub frame_index: i32,
    pub index: u32,
}

/// Aggregation output: points plus a parallel provenance list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregatedCloud {
    pub points: Vec<AggregatedPoint>,
    pub sources: Vec<PointSource>,
}

impl AggregatedCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// ─── Frame buffer ───

/// Sliding window of frames. Pushing a frame evicts everything strictly
/// older than `window_seconds` before the new frame's timestamp.
#[derive(Debug, Clone)]
pub struct FrameBuffer {
    window_seconds: f64,
    frames: Vec<FrameRecord>,
}

impl FrameBuffer {
    pub fn new(window_seconds: f64) -> Self {
        FrameBuffer { window_seconds, frames: Vec::new() }
    }

    /// Append the newest frame. Timestamps must be strictly increasing.
    pub fn push_frame(&mut self, frame: FrameRecord) -> Result<(), AggregateError> {
        if let Some(last) = self.frames.last() {
            if frame.t <= last.t {
                return Err(AggregateError::Geometry(GeometryError::NonMonotonicTimestamps {
                    index: self.frames.len(),
                    t: frame.t,
                    prev: last.t,
                }));
            }
        }
        let cutoff = frame.t - self.window_seconds;
        self.frames.push(frame);
        let first_kept = self.frames.partition_point(|f| f.t < cutoff);
        if first_kept > 0 {
            self.frames.drain(..first_kept);
        }
        Ok(())
    }

    /// Immutable snapshot of the window, oldest first.
    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

// ─── Per-point operations ───

/// Longest history a point may keep, seconds. Unlimited durations (static
/// points, or the g floor keeping the denominator finite) cap at the window.
pub fn duration_limit(v_dyn: f64, theta: f64, cfg: &AggregationConfig) -> f64 {
    let speed = v_dyn.abs();
    if speed < cfg.static_speed_epsilon {
        return cfg.window_seconds;
    }
    let g = cfg.g_table.lookup(theta);
    (cfg.tolerance_d / (speed * g)).min(cfg.window_seconds)
}

/// Move a decomposed point along its own line of sight by `v_dyn * dt`.
/// The point is taken in current-frame coordinates with the radar at the
/// origin; inside the aggregation loop the radial direction is instead fixed
/// at the measuring frame before shifting.
pub fn radial_shift(
    point: &crate::doppler::DecomposedPoint,
    dt: f64,
) -> Result<Vec3, AggregateError> {
    let frame = radial_frame_at(&point.point.position)?;
    Ok(point.point.position + frame.r_hat * (point.v_dyn * dt))
}

// ─── Window transforms ───

fn validate_window(window: &[FrameRecord]) -> Result<(), AggregateError> {
    if window.is_empty() {
        return Err(AggregateError::EmptyWindow);
    }
    for i in 1..window.len() {
        if window[i].t <= window[i - 1].t {
            return Err(AggregateError::Geometry(GeometryError::NonMonotonicTimestamps {
                index: i,
                t: window[i].t,
                prev: window[i - 1].t,
            }));
        }
    }
    Ok(())
}

/// Pose mapping each frame's coordinates into the current (last) frame,
/// built from the same per-interval increments that
/// [`crate::geometry::accumulate_pose`] integrates.
fn window_poses(window: &[FrameRecord]) -> Vec<Pose2> {
    let n = window.len();
    let mut displacement = vec![Pose2::identity(); n];
    for j in (0..n - 1).rev() {
        let dt = window[j + 1].t - window[j].t;
        let e = &window[j].ego;
        let inc = pose_increment(e.velocity.cx, e.velocity.cy, e.yaw_rate, dt);
        displacement[j] = inc.compose(&displacement[j + 1]);
    }
    displacement.iter().map(Pose2::inverse).collect()
}

fn motion_sample(frame: &FrameRecord) -> MotionSample {
    MotionSample {
        t: frame.t,
        vx: frame.ego.velocity.cx,
        vy: frame.ego.velocity.cy,
        yaw_rate: frame.ego.yaw_rate,
    }
}

/// Body-frame motion samples for a window, ready for
/// [`crate::geometry::accumulate_pose`].
pub fn window_motion_samples(window: &[FrameRecord]) -> Vec<MotionSample> {
    window.iter().map(motion_sample).collect()
}

// ─── Aggregation modes ───

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Single,
    Standard,
    FixedDuration,
    DoppDrive,
}

fn aggregate(
    window: &[FrameRecord],
    cfg: &AggregationConfig,
    mode: Mode,
) -> Result<AggregatedCloud, AggregateError> {
    cfg.validate()?;
    validate_window(window)?;
    let n = window.len();
    let t0 = window[n - 1].t;
    let poses = window_poses(window);

    let mut out = AggregatedCloud::default();
    for (j, frame) in window.iter().enumerate() {
        let dt = t0 - frame.t;
        match mode {
            Mode::Single if j != n - 1 => continue,
            Mode::Standard if dt > cfg.baseline_window_seconds => continue,
            _ => {}
        }
        let k = j as i32 - (n as i32 - 1);
        let pose = &poses[j];
        for (i, p) in frame.points.iter().enumerate() {
            let dec = decompose(p, &frame.ego.velocity)?;
            let compensate = mode == Mode::DoppDrive || mode == Mode::FixedDuration;
            if mode == Mode::DoppDrive && dt > duration_limit(dec.v_dyn, dec.theta, cfg) {
                continue;
            }
            let q = pose.apply(&p.position);
            let (x, y) = if compensate {
                // Radial direction of the measuring frame, rotated into
                // current-frame axes; the frame-k radar origin is what the
                // shift is radial to.
                let (s, c) = dec.theta.sin_cos();
                let r_hat = pose.rotate(&Vec3::new(s, c, 0.0));
                let shift = dec.v_dyn * dt;
                (q.x + r_hat.x * shift, q.y + r_hat.y * shift)
            } else {
                (q.x, q.y)
            };
            let v_out = if compensate || cfg.remove_ego_doppler { dec.v_dyn } else { p.doppler };
            out.points.push(AggregatedPoint {
                x,
                y,
                z: q.z,
                v_dyn: v_out,
                intensity: p.intensity,
                frame_index: k,
            });
            out.sources.push(PointSource { frame_index: k, index: i as u32 });
        }
    }
    Ok(out)
}

/// Adaptive per-point aggregation with radial Doppler compensation.
pub fn doppdrive_aggregate(
    window: &[FrameRecord],
    cfg: &AggregationConfig,
) -> Result<AggregatedCloud, AggregateError> {
    aggregate(window, cfg, Mode::DoppDrive)
}

/// Fixed short-window aggregation without motion compensation.
pub fn standard_aggregate(
    window: &[FrameRecord],
    cfg: &AggregationConfig,
) -> Result<AggregatedCloud, AggregateError> {
    aggregate(window, cfg, Mode::Standard)
}

/// Radial compensation over the whole window with no retention limit; the
/// reference the adaptive mode's eliminations are counted against.
pub fn fixed_duration_aggregate(
    window: &[FrameRecord],
    cfg: &AggregationConfig,
) -> Result<AggregatedCloud, AggregateError> {
    aggregate(window, cfg, Mode::FixedDuration)
}

/// The current frame alone, in its own coordinates.
pub fn single_frame(
    window: &[FrameRecord],
    cfg: &AggregationConfig,
) -> Result<AggregatedCloud, AggregateError> {
    aggregate(window, cfg, Mode::Single)
}
