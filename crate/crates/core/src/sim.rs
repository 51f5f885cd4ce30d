//! Synthetic multi-frame radar scenes with exact ground truth.
//!
//! A scenario is a fully deterministic function of its spec (seed included):
//! the ego drives a piecewise-constant speed/yaw-rate profile, rigid objects
//! translate at constant velocity, and every frame re-samples reflection
//! points on the faces currently visible to the radar — detections are not
//! persistent across frames, only the objects are. Static background comes
//! from guardrail-like strips.
//!
//! Each emitted point gets a Doppler synthesized as `d = v + h (+ noise)`,
//! where `v` is the object's true radial speed along the measured ray and
//! `h` is the ego-speed component at the measured azimuth; the ground truth
//! records `v` and the tangential component `u` so tests can hold the
//! decomposition and the shift equations to account. [`oracle_shift`]
//! reconstructs, for any point and any later frame, where the point really
//! is ("accurate") and where radial-only compensation puts it.
//!
//! Frames use per-frame RNG streams from a single scenario seed, so
//! generation is reproducible bit-for-bit and order-independent.

use crate::doppler::{ego_speed_doppler, EgoState, EgoVelocity, RadarPoint};
use crate::geometry::{
    azimuth_of, normalize_angle, pose_increment, radial_frame_at, Pose2, Vec3,
};
use crate::aggregate::FrameRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Range at which an object emits its nominal `points_per_frame`; density
/// falls off as the inverse square beyond it.
pub const REFERENCE_RANGE: f64 = 20.0;
/// Near-field cap on the density scale factor.
const DENSITY_SCALE_MAX: f64 = 6.0;
/// Points closer than this are discarded (degenerate azimuth, under the
/// bumper in practice).
const MIN_RANGE: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no frame {frame} in ground truth")]
    UnknownFrame { frame: usize },
    #[error("no point {index} in ground-truth frame {frame}")]
    UnknownPoint { frame: usize, index: usize },
}

// ─── Scenario spec ───

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Car,
    Van,
    Truck,
}

impl ObjectClass {
    /// Constant part of the intensity model.
    pub fn base_intensity(self) -> f64 {
        match self {
            ObjectClass::Car => 12.0,
            ObjectClass::Van => 15.0,
            ObjectClass::Truck => 18.0,
        }
    }

    /// Length, width, height in meters.
    pub fn default_extent(self) -> [f64; 3] {
        match self {
            ObjectClass::Car => [4.5, 1.9, 1.5],
            ObjectClass::Van => [5.5, 2.1, 2.2],
            ObjectClass::Truck => [9.0, 2.5, 3.2],
        }
    }
}

const STATIC_INTENSITY: f64 = 8.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub class: ObjectClass,
    /// Length, width, height; defaults to the class extent.
    #[serde(default)]
    pub extent: Option<[f64; 3]>,
    /// BEV spawn position in world coordinates (the ego starts at the
    /// origin facing +y).
    pub position: [f64; 2],
    /// Signed speed along the heading, m/s.
    pub speed: f64,
    /// Heading angle alpha, radians. Zero points the object along +y
    /// (parallel to the ego's initial axis); positive turns its velocity
    /// toward -x.
    pub heading: f64,
    /// Poisson mean of reflections per frame at [`REFERENCE_RANGE`].
    pub points_per_frame: f64,
    /// Permit spawning outside the field of view (it may drive in later).
    #[serde(default)]
    pub allow_offscreen_spawn: bool,
}

impl ObjectSpec {
    pub fn extent(&self) -> [f64; 3] {
        self.extent.unwrap_or_else(|| self.class.default_extent())
    }

    /// World-frame velocity implied by speed and heading.
    pub fn velocity(&self) -> (f64, f64) {
        (-self.speed * self.heading.sin(), self.speed * self.heading.cos())
    }
}

/// One leg of the ego profile: constant body-frame forward speed and yaw
/// rate for `duration` seconds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EgoSegment {
    pub duration: f64,
    pub speed: f64,
    #[serde(default)]
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FieldOfView {
    /// Half-angle: detections keep |azimuth| <= this.
    pub azimuth_deg: f64,
    pub max_range: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_range: f64,
    pub sigma_azimuth: f64,
    pub sigma_doppler: f64,
    pub intensity_jitter: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            sigma_range: 0.15,
            sigma_azimuth: 0.3_f64.to_radians(),
            sigma_doppler: 0.1,
            intensity_jitter: 1.0,
        }
    }
}

impl NoiseSpec {
    pub fn zero() -> Self {
        NoiseSpec {
            sigma_range: 0.0,
            sigma_azimuth: 0.0,
            sigma_doppler: 0.0,
            intensity_jitter: 0.0,
        }
    }
}

/// A guardrail-like line of static reflectors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StaticStrip {
    pub start: [f64; 2],
    pub end: [f64; 2],
    /// Poisson mean of reflections per meter of strip at
    /// [`REFERENCE_RANGE`].
    pub density_per_meter: f64,
    #[serde(default = "default_strip_z")]
    pub z: f64,
}

fn default_strip_z() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub duration: f64,
    pub fps: f64,
    pub ego_profile: Vec<EgoSegment>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub static_strips: Vec<StaticStrip>,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub field_of_view: FieldOfView,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::InvalidScenario(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return err(format!("duration = {}", self.duration));
        }
        if !(1.0..=50.0).contains(&self.fps) {
            return err(format!("fps = {} outside [1, 50]", self.fps));
        }
        let fov = &self.field_of_view;
        if !(fov.max_range > 0.0) {
            return err(format!("max_range = {}", fov.max_range));
        }
        if !(fov.azimuth_deg > 0.0 && fov.azimuth_deg <= 180.0) {
            return err(format!("azimuth_deg = {}", fov.azimuth_deg));
        }
        if self.ego_profile.is_empty() {
            return err("ego_profile is empty".into());
        }
        for (i, seg) in self.ego_profile.iter().enumerate() {
            if !(seg.duration > 0.0) || !seg.speed.is_finite() || !seg.yaw_rate.is_finite() {
                return err(format!("ego segment {i} is malformed"));
            }
        }
        let n = self.noise;
        if n.sigma_range < 0.0
            || n.sigma_azimuth < 0.0
            || n.sigma_doppler < 0.0
            || n.intensity_jitter < 0.0
        {
            return err("noise sigmas must be nonnegative".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            let e = o.extent();
            if e.iter().any(|&v| !(v > 0.0)) {
                return err(format!("object {i}: extent must be positive"));
            }
            if o.heading.abs() > std::f64::consts::PI {
                return err(format!("object {i}: |heading| > pi"));
            }
            if !o.speed.is_finite() || o.points_per_frame < 0.0 {
                return err(format!("object {i}: bad speed or density"));
            }
            if !o.allow_offscreen_spawn {
                let p = Vec3::new(o.position[0], o.position[1], 0.0);
                let r = p.norm_xy();
                let theta = azimuth_of(&p)
                    .map_err(|_| SimError::InvalidScenario(format!("object {i} at origin")))?;
                if r > fov.max_range || theta.abs() > fov.azimuth_deg.to_radians() {
                    return err(format!(
                        "object {i} spawns outside the field of view (set \
                         allow_offscreen_spawn to permit)"
                    ));
                }
            }
        }
        for (i, s) in self.static_strips.iter().enumerate() {
            if !(s.density_per_meter >= 0.0) {
                return err(format!("strip {i}: negative density"));
            }
        }
        Ok(())
    }

    /// Frames span [0, duration): duration times fps of them.
    pub fn frame_count(&self) -> usize {
        ((self.duration * self.fps).round() as usize).max(1)
    }
}

// ─── Ground truth ───

/// BEV box of one object in world coordinates. `yaw` rotates the box frame
/// (+y = travel direction) into world axes, CCW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthBox {
    pub object: u32,
    pub center: [f64; 2],
    pub length: f64,
    pub width: f64,
    pub yaw: f64,
    pub speed: f64,
    /// Whether the box center is inside the field of view this frame.
    pub in_fov: bool,
}

impl TruthBox {
    /// BEV corners in world coordinates, counterclockwise.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        box_corners(self.center, self.yaw, self.length, self.width)
    }
}

/// Ground truth for one emitted point, indexed in parallel with the frame's
/// point list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    /// Source object id, or `None` for static background.
    pub object: Option<u32>,
    /// True radial speed along the measured ray, m/s.
    pub v: f64,
    /// True tangential speed across the measured ray, m/s.
    pub u: f64,
    /// Measured (noise-included) position in world coordinates.
    pub pos_world: Vec3,
    /// Object velocity in world coordinates.
    pub vel_world: [f64; 2],
    pub speed: f64,
    /// Angle between object travel direction and ego forward axis, degrees
    /// in [0, 180]. Zero for static points.
    pub heading_rel_deg: f64,
    /// Measured BEV range from the radar, m.
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFrame {
    pub t: f64,
    /// World pose of the ego at this frame (maps ego coordinates to world).
    pub ego_pose: Pose2,
    pub boxes: Vec<TruthBox>,
    pub points: Vec<TruthPoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frames: Vec<TruthFrame>,
}

/// Where a measured point "really" went, expressed in the current frame.
#[derive(Debug, Clone, Copy)]
pub struct OracleShift {
    /// Rigid ego-motion transform only, no object-motion compensation.
    pub transformed: Vec3,
    /// Full compensation along the true velocity (radial and tangential).
    pub accurate: Vec3,
    /// Radial-only compensation: what the aggregator can reach from Doppler
    /// alone.
    pub radial_only: Vec3,
    pub v: f64,
    pub u: f64,
    /// Elapsed time from the measuring frame to the current frame.
    pub dt: f64,
    /// Measuring-ray radial direction, expressed in current-frame axes.
    pub r_hat: Vec3,
    /// Measuring-ray tangential direction, expressed in current-frame axes.
    pub t_hat: Vec3,
}

/// Reconstruct the oracle positions of point `index` of frame `frame_k`,
/// expressed in frame `current`.
pub fn oracle_shift(
    truth: &GroundTruth,
    frame_k: usize,
    index: usize,
    current: usize,
) -> Result<OracleShift, SimError> {
    let tf = truth.frames.get(frame_k).ok_or(SimError::UnknownFrame { frame: frame_k })?;
    let cf = truth.frames.get(current).ok_or(SimError::UnknownFrame { frame: current })?;
    let tp = tf
        .points
        .get(index)
        .ok_or(SimError::UnknownPoint { frame: frame_k, index })?;
    let dt = cf.t - tf.t;
    let inv0 = cf.ego_pose.inverse();

    let transformed = inv0.apply(&tp.pos_world);
    let moved = tp.pos_world + Vec3::new(tp.vel_world[0] * dt, tp.vel_world[1] * dt, 0.0);
    let accurate = inv0.apply(&moved);

    // Radial direction fixed at the measuring frame, like the aggregator's.
    let local_k = tf.ego_pose.inverse().apply(&tp.pos_world);
    let frame = radial_frame_at(&local_k)
        .map_err(|_| SimError::UnknownPoint { frame: frame_k, index })?;
    let shift_world = tf.ego_pose.rotate(&(frame.r_hat * (tp.v * dt)));
    let radial_only = inv0.apply(&(tp.pos_world + shift_world));
    let r_hat = inv0.rotate(&tf.ego_pose.rotate(&frame.r_hat));
    let t_hat = inv0.rotate(&tf.ego_pose.rotate(&frame.t_hat));

    Ok(OracleShift {
        transformed,
        accurate,
        radial_only,
        v: tp.v,
        u: tp.u,
        dt,
        r_hat,
        t_hat,
    })
}

// ─── Synthesis ───

struct EgoTrack {
    /// World pose per frame.
    poses: Vec<Pose2>,
    /// Metadata (body-frame velocity, yaw rate) per frame.
    states: Vec<EgoState>,
    times: Vec<f64>,
}

fn build_ego_track(spec: &ScenarioSpec) -> EgoTrack {
    let n = spec.frame_count();
    let dt = 1.0 / spec.fps;
    let mut bounds = Vec::with_capacity(spec.ego_profile.len());
    let mut acc = 0.0;
    for seg in &spec.ego_profile {
        acc += seg.duration;
        bounds.push(acc);
    }
    let segment_at = |t: f64| -> &EgoSegment {
        let idx = bounds.partition_point(|&b| b <= t + 1e-12);
        &spec.ego_profile[idx.min(spec.ego_profile.len() - 1)]
    };

    let mut poses = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut pose = Pose2::identity();
    for j in 0..n {
        // j / fps, not j * (1/fps): sums of the rounded step drift off the
        // representable grid and break window-boundary comparisons.
        let t = j as f64 / spec.fps;
        let seg = segment_at(t);
        poses.push(pose);
        states.push(EgoState {
            velocity: EgoVelocity::new(0.0, seg.speed),
            yaw_rate: seg.yaw_rate,
        });
        times.push(t);
        pose = pose.compose(&pose_increment(0.0, seg.speed, seg.yaw_rate, dt));
    }
    EgoTrack { poses, states, times }
}

/// BEV corners of an object box, world frame, counterclockwise.
fn box_corners(center: [f64; 2], yaw: f64, length: f64, width: f64) -> [[f64; 2]; 4] {
    let (s, c) = yaw.sin_cos();
    // Box +y (travel) axis and +x axis in world coordinates.
    let ay = [-s, c];
    let ax = [c, s];
    let half_l = 0.5 * length;
    let half_w = 0.5 * width;
    let mut corners = [[0.0; 2]; 4];
    for (i, (fy, fx)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)]
        .into_iter()
        .enumerate()
    {
        corners[i] = [
            center[0] + fy * half_l * ay[0] + fx * half_w * ax[0],
            center[1] + fy * half_l * ay[1] + fx * half_w * ax[1],
        ];
    }
    corners
}

/// Edges of the box whose outward normal faces the sensor, with lengths for
/// weighting.
fn visible_edges(corners: &[[f64; 2]; 4], sensor: [f64; 2]) -> Vec<([f64; 2], [f64; 2], f64)> {
    let mut edges = Vec::with_capacity(4);
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        // Outward normal of edge a->b for a CCW polygon points right of ab.
        let nx = b[1] - a[1];
        let ny = a[0] - b[0];
        let towards = (sensor[0] - mid[0]) * nx + (sensor[1] - mid[1]) * ny;
        if towards > 0.0 {
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            edges.push((a, b, len));
        }
    }
    edges
}

fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let n: f64 = Poisson::new(mean).expect("positive finite mean").sample(rng);
    n as usize
}

fn density_scale(range: f64) -> f64 {
    ((REFERENCE_RANGE / range.max(MIN_RANGE)).powi(2)).min(DENSITY_SCALE_MAX)
}

/// Generate the frame sequence and its ground truth.
pub fn synthesize(spec: &ScenarioSpec) -> Result<(Vec<FrameRecord>, GroundTruth), SimError> {
    spec.validate()?;
    let track = build_ego_track(spec);
    let n = track.times.len();
    let fov_az = spec.field_of_view.azimuth_deg.to_radians();
    let max_range = spec.field_of_view.max_range;
    let noise = spec.noise;

    let object_vel: Vec<(f64, f64)> = spec.objects.iter().map(ObjectSpec::velocity).collect();

    let mut frames = Vec::with_capacity(n);
    let mut truth = GroundTruth { frames: Vec::with_capacity(n) };

    for j in 0..n {
        let t = track.times[j];
        let ego_pose = track.poses[j];
        let ego_state = track.states[j];
        let inv = ego_pose.inverse();
        let sensor_world = [ego_pose.tx, ego_pose.ty];
        // Azimuth of the ego forward axis in world coordinates.
        let ego_forward_azimuth = -ego_pose.yaw;

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(j as u64 + 1);

        let mut points = Vec::new();
        let mut truth_points = Vec::new();
        let mut boxes = Vec::with_capacity(spec.objects.len());

        let mut emit = |world: Vec3,
                        vel_world: (f64, f64),
                        object: Option<u32>,
                        speed: f64,
                        base_intensity: f64,
                        rng: &mut ChaCha8Rng| {
            let local_true = inv.apply(&world);
            let r_true = local_true.norm_xy();
            if r_true < MIN_RANGE {
                return;
            }
            let theta_true = match azimuth_of(&local_true) {
                Ok(a) => a,
                Err(_) => return,
            };
            let xi_r: f64 = rng.sample(StandardNormal);
            let xi_a: f64 = rng.sample(StandardNormal);
            let xi_d: f64 = rng.sample(StandardNormal);
            let xi_i: f64 = rng.sample(StandardNormal);
            let r = r_true + noise.sigma_range * xi_r;
            let theta = theta_true + noise.sigma_azimuth * xi_a;
            if r < MIN_RANGE || r > max_range || theta.abs() > fov_az {
                return;
            }
            let (st, ct) = theta.sin_cos();
            let local = Vec3::new(r * st, r * ct, local_true.z);

            // True v and u along the measured ray: exact at every noise
            // level because they are defined at the measured geometry.
            let rf = radial_frame_at(&local).expect("range checked above");
            let vel_ego_axes = inv.rotate(&Vec3::new(vel_world.0, vel_world.1, 0.0));
            let v = rf.r_hat.dot_xy(&vel_ego_axes);
            let u = rf.t_hat.dot_xy(&vel_ego_axes);
            // h at the azimuth a consumer will reconstruct from the stored
            // position (rf.theta), not the sampled one: the two differ by
            // ulps through atan2, and Doppler decomposition must recover
            // v bitwise on noise-free data.
            let h = ego_speed_doppler(rf.theta, &ego_state.velocity);
            let d = v + h + noise.sigma_doppler * xi_d;
            let intensity = base_intensity + noise.intensity_jitter * xi_i;

            let heading_rel_deg = if speed == 0.0 {
                0.0
            } else {
                let motion_azimuth = vel_world.0.atan2(vel_world.1);
                normalize_angle(motion_azimuth - ego_forward_azimuth)
                    .abs()
                    .to_degrees()
            };

            points.push(RadarPoint { position: local, doppler: d, intensity });
            truth_points.push(TruthPoint {
                object,
                v,
                u,
                pos_world: ego_pose.apply(&local),
                vel_world: [vel_world.0, vel_world.1],
                speed,
                heading_rel_deg,
                range: r,
            });
        };

        for (id, obj) in spec.objects.iter().enumerate() {
            let (wx, wy) = object_vel[id];
            let center = [obj.position[0] + wx * t, obj.position[1] + wy * t];
            let extent = obj.extent();
            let center_local = inv.apply(&Vec3::new(center[0], center[1], 0.0));
            let center_range = center_local.norm_xy();
            let in_fov = center_range >= MIN_RANGE
                && center_range <= max_range
                && azimuth_of(&center_local).map(|a| a.abs() <= fov_az).unwrap_or(false);
            boxes.push(TruthBox {
                object: id as u32,
                center,
                length: extent[0],
                width: extent[1],
                yaw: obj.heading,
                speed: obj.speed,
                in_fov,
            });

            let mean = obj.points_per_frame * density_scale(center_range);
            let count = poisson_count(mean, &mut rng);
            if count == 0 {
                continue;
            }
            let corners = box_corners(center, obj.heading, extent[0], extent[1]);
            let edges = visible_edges(&corners, sensor_world);
            let total_len: f64 = edges.iter().map(|e| e.2).sum();
            if total_len <= 0.0 {
                continue;
            }
            for _ in 0..count {
                let mut pick = rng.gen::<f64>() * total_len;
                let mut chosen = &edges[0];
                for e in &edges {
                    if pick <= e.2 {
                        chosen = e;
                        break;
                    }
                    pick -= e.2;
                }
                let s = rng.gen::<f64>();
                let wx_p = chosen.0[0] + s * (chosen.1[0] - chosen.0[0]);
                let wy_p = chosen.0[1] + s * (chosen.1[1] - chosen.0[1]);
                let z = 0.2 + rng.gen::<f64>() * (0.8 * extent[2] - 0.2).max(0.1);
                emit(
                    Vec3::new(wx_p, wy_p, z),
                    (wx, wy),
                    Some(id as u32),
                    obj.speed,
                    obj.class.base_intensity(),
                    &mut rng,
                );
            }
        }

        for strip in &spec.static_strips {
            let dx = strip.end[0] - strip.start[0];
            let dy = strip.end[1] - strip.start[1];
            let len = (dx * dx + dy * dy).sqrt();
            if len <= 0.0 || strip.density_per_meter <= 0.0 {
                continue;
            }
            let cells = len.ceil() as usize;
            let cell_len = len / cells as f64;
            for c in 0..cells {
                let mid = (c as f64 + 0.5) / cells as f64;
                let mid_world =
                    Vec3::new(strip.start[0] + mid * dx, strip.start[1] + mid * dy, strip.z);
                let r = inv.apply(&mid_world).norm_xy();
                if r > max_range * 1.05 {
                    continue;
                }
                let mean = strip.density_per_meter * cell_len * density_scale(r);
                let count = poisson_count(mean, &mut rng);
                for _ in 0..count {
                    let s = (c as f64 + rng.gen::<f64>()) / cells as f64;
                    let world = Vec3::new(
                        strip.start[0] + s * dx,
                        strip.start[1] + s * dy,
                        strip.z,
                    );
                    emit(world, (0.0, 0.0), None, 0.0, STATIC_INTENSITY, &mut rng);
                }
            }
        }

        frames.push(FrameRecord { t, ego: ego_state, points });
        truth.frames.push(TruthFrame { t, ego_pose, boxes, points: truth_points });
    }
    Ok((frames, truth))
}

// ─── Sparsification ───

/// Range-dependent keep probability, piecewise linear between knots and flat
/// beyond the ends. Must be monotone non-increasing.
#[derive(Debug, Clone)]
pub struct DensityProfile {
    knots: Vec<(f64, f64)>,
}

impl DensityProfile {
    pub fn flat(p: f64) -> Self {
        DensityProfile { knots: vec![(0.0, p.clamp(0.0, 1.0))] }
    }

    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, SimError> {
        if knots.is_empty() {
            return Err(SimError::InvalidScenario("density profile needs a knot".into()));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SimError::InvalidScenario(
                    "density profile ranges must increase".into(),
                ));
            }
            if w[1].1 > w[0].1 {
                return Err(SimError::InvalidScenario(
                    "density profile must be non-increasing in range".into(),
                ));
            }
        }
        if knots.iter().any(|&(r, p)| r < 0.0 || !(0.0..=1.0).contains(&p)) {
            return Err(SimError::InvalidScenario("density profile out of range".into()));
        }
        Ok(DensityProfile { knots })
    }

    pub fn keep_probability(&self, range: f64) -> f64 {
        let k = &self.knots;
        if range <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            if range <= w[1].0 {
                let f = (range - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + f * (w[1].1 - w[0].1);
            }
        }
        k[k.len() - 1].1
    }
}

/// Thin frames (and their ground truth, index-parallel) by a seeded
/// range-dependent subsampling.
pub fn sparsify(
    frames: &[FrameRecord],
    truth: &GroundTruth,
    profile: &DensityProfile,
    seed: u64,
) -> Result<(Vec<FrameRecord>, GroundTruth), SimError> {
    if frames.len() != truth.frames.len() {
        return Err(SimError::InvalidScenario(
            "frames and ground truth have different lengths".into(),
        ));
    }
    let mut out_frames = Vec::with_capacity(frames.len());
    let mut out_truth = GroundTruth { frames: Vec::with_capacity(frames.len()) };
    for (j, (f, tf)) in frames.iter().zip(&truth.frames).enumerate() {
        if f.points.len() != tf.points.len() {
            return Err(SimError::InvalidScenario(format!(
                "frame {j}: point/truth length mismatch"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bab_5e1e_c7ed_0001);
        rng.set_stream(j as u64 + 1);
        let mut nf = FrameRecord { t: f.t, ego: f.ego, points: Vec::new() };
        let mut nt = TruthFrame {
            t: tf.t,
            ego_pose: tf.ego_pose,
            boxes: tf.boxes.clone(),
            points: Vec::new(),
        };
        for (p, tp) in f.points.iter().zip(&tf.points) {
            let keep = rng.gen::<f64>() < profile.keep_probability(p.position.norm_xy());
            if keep {
                nf.points.push(*p);
                nt.points.push(*tp);
            }
        }
        out_frames.push(nf);
        out_truth.frames.push(nt);
    }
    Ok((out_frames, out_truth))
}

// ─── Preset scenarios ───

/// Inverse-CDF sample of a Laplace(mu, b) truncated to [-pi/2, pi/2].
pub fn sample_truncated_laplace<R: Rng>(mu: f64, b: f64, rng: &mut R) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    let cdf = |x: f64| -> f64 {
        if x < mu {
            0.5 * ((x - mu) / b).exp()
        } else {
            1.0 - 0.5 * (-(x - mu) / b).exp()
        }
    };
    let lo = cdf(-half);
    let hi = cdf(half);
    let p = lo + rng.gen::<f64>() * (hi - lo);
    let x = if p < 0.5 {
        mu + b * (2.0 * p).ln()
    } else {
        mu - b * (2.0 * (1.0 - p)).ln()
    };
    x.clamp(-half, half)
}

/// A multi-lane highway mix: same-direction traffic at several speeds,
/// slow and fast oncoming traffic, two crossing movers held at high
/// azimuth, and guardrails. Exercises near/far, every speed bin, and
/// every relative-heading bin.
pub fn highway_mix(seed: u64) -> ScenarioSpec {
    let lane = 3.7;
    let objects = vec![
        // Same-direction lanes. None of these is ever overtaken by the
        // ego, so they hold low azimuth for the whole run.
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [-lane, 42.0],
            speed: 21.0,
            heading: 0.0,
            points_per_frame: 30.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [lane, 68.0],
            speed: 31.0,
            heading: 0.0,
            points_per_frame: 30.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [0.0, 27.0],
            speed: 22.5,
            heading: 0.0,
            points_per_frame: 30.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Truck,
            extent: None,
            position: [0.0, 105.0],
            speed: 21.0,
            heading: 0.0,
            points_per_frame: 45.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Van,
            extent: None,
            position: [0.0, 150.0],
            speed: 20.0,
            heading: 0.0,
            points_per_frame: 35.0,
            allow_offscreen_spawn: false,
        },
        // Drifting-back slow movers in the outer lane; the ego gains on
        // them slowly enough that they never come close.
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [2.0 * lane, 110.0],
            speed: 11.0,
            heading: 0.0,
            points_per_frame: 30.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [2.0 * lane, 130.0],
            speed: 9.0,
            heading: 0.0,
            points_per_frame: 35.0,
            allow_offscreen_spawn: false,
        },
        // Oncoming lane, slow and fast.
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [-2.0 * lane, 90.0],
            speed: 16.0,
            heading: std::f64::consts::PI,
            points_per_frame: 30.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [-2.0 * lane, 150.0],
            speed: 14.0,
            heading: std::f64::consts::PI,
            points_per_frame: 30.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [-2.0 * lane, 60.0],
            speed: 38.0,
            heading: std::f64::consts::PI,
            points_per_frame: 12.0,
            allow_offscreen_spawn: false,
        },
        // Crossing movers placed so the ego passes them before they reach
        // its lane: they ride the 45-55 degree azimuth band until they
        // leave the field of view and never dip toward the axis. Two start
        // near, two far, so crossing traffic is in view for the whole run.
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [66.0, 57.0],
            speed: 25.0,
            heading: std::f64::consts::FRAC_PI_2,
            points_per_frame: 40.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Van,
            extent: None,
            position: [-60.0, 55.0],
            speed: 24.0,
            heading: -std::f64::consts::FRAC_PI_2,
            points_per_frame: 40.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [134.0, 119.0],
            speed: 25.0,
            heading: std::f64::consts::FRAC_PI_2,
            points_per_frame: 40.0,
            allow_offscreen_spawn: false,
        },
        ObjectSpec {
            class: ObjectClass::Van,
            extent: None,
            position: [-125.0, 110.0],
            speed: 24.0,
            heading: -std::f64::consts::FRAC_PI_2,
            points_per_frame: 40.0,
            allow_offscreen_spawn: false,
        },
        // A diagonal merger drifting away to the right.
        ObjectSpec {
            class: ObjectClass::Car,
            extent: None,
            position: [20.0, 120.0],
            speed: 17.0,
            heading: -std::f64::consts::FRAC_PI_4,
            points_per_frame: 30.0,
            allow_offscreen_spawn: false,
        },
    ];
    let strips = vec![
        StaticStrip { start: [-11.0, 5.0], end: [-11.0, 175.0], density_per_meter: 0.5, z: 0.5 },
        StaticStrip { start: [11.0, 5.0], end: [11.0, 175.0], density_per_meter: 0.5, z: 0.5 },
    ];
    ScenarioSpec {
        duration: 6.0,
        fps: 20.0,
        ego_profile: vec![EgoSegment { duration: 6.0, speed: 25.0, yaw_rate: 0.0 }],
        objects,
        static_strips: strips,
        noise: NoiseSpec::default(),
        field_of_view: FieldOfView { azimuth_deg: 55.0, max_range: 180.0 },
        seed,
    }
}

/// Many dynamic objects whose headings are drawn from a truncated Laplace
/// around the ego axis — the distribution the duration limit assumes.
/// Noise-free, straight ego.
pub fn heading_mix(seed: u64, mu: f64, b: f64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut objects = Vec::new();
    for i in 0..16 {
        let heading = sample_truncated_laplace(mu, b, &mut rng);
        let speed = 8.0 + 27.0 * rng.gen::<f64>();
        let theta = -50.0 + 100.0 * rng.gen::<f64>();
        let range = 30.0 + 120.0 * rng.gen::<f64>();
        let (s, c) = theta.to_radians().sin_cos();
        let class = match i % 3 {
            0 => ObjectClass::Car,
            1 => ObjectClass::Van,
            _ => ObjectClass::Truck,
        };
        objects.push(ObjectSpec {
            class,
            extent: None,
            position: [range * s, range * c],
            speed,
            heading,
            points_per_frame: 35.0,
            allow_offscreen_spawn: true,
        });
    }
    ScenarioSpec {
        duration: 5.0,
        fps: 20.0,
        ego_profile: vec![EgoSegment { duration: 5.0, speed: 20.0, yaw_rate: 0.0 }],
        objects,
        static_strips: Vec::new(),
        noise: NoiseSpec::zero(),
        field_of_view: FieldOfView { azimuth_deg: 60.0, max_range: 220.0 },
        seed,
    }
}
