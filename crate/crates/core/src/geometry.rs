//! Planar geometry for the radar frame: azimuth and radial frames, SE(2)
//! poses with z passthrough, and ego-motion integration.
//!
//! Axis convention: +y forward, +x right, +z up. Azimuth is measured from the
//! +y axis, positive toward +x, and lies in (-pi, pi]. All angles are radians,
//! all distances meters.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};
use thiserror::Error;

/// Planar positions below this norm have no defined azimuth.
pub const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point ({x}, {y}) lies on the sensor axis; azimuth undefined")]
    DegeneratePoint { x: f64, y: f64 },
    #[error("timestamps must be strictly increasing: t[{index}] = {t} follows {prev}")]
    NonMonotonicTimestamps { index: usize, t: f64, prev: f64 },
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

// ─── Vectors ───

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3::new(0.0, 0.0, 0.0)
    }

    /// Norm of the planar (x, y) part.
    pub fn norm_xy(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Dot product of the planar parts.
    pub fn dot_xy(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

// ─── Azimuth and radial frames ───

/// Azimuth of a point in (-pi, pi], measured from +y toward +x.
///
/// A point dead ahead has azimuth 0; a point directly right has +pi/2.
pub fn azimuth_of(p: &Vec3) -> Result<f64, GeometryError> {
    if p.norm_xy() < DEGENERATE_EPS {
        return Err(GeometryError::DegeneratePoint { x: p.x, y: p.y });
    }
    Ok(normalize_angle(p.x.atan2(p.y)))
}

/// Unit radial and tangential directions at a point, plus its azimuth.
///
/// `r_hat` points from the sensor toward the point (planar, z = 0);
/// `t_hat` is `r_hat` rotated +90 degrees counterclockwise about +z, so
/// {r_hat, t_hat} is a right-handed planar basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialFrame {
    pub theta: f64,
    pub r_hat: Vec3,
    pub t_hat: Vec3,
}

pub fn radial_frame_at(p: &Vec3) -> Result<RadialFrame, GeometryError> {
    let theta = azimuth_of(p)?;
    let (s, c) = theta.sin_cos();
    Ok(RadialFrame {
        theta,
        r_hat: Vec3::new(s, c, 0.0),
        t_hat: Vec3::new(-c, s, 0.0),
    })
}

// ─── SE(2) poses ───

/// Rigid planar transform: rotation by `yaw` about +z followed by translation
/// `(tx, ty)`. The z coordinate passes through unchanged. `yaw` is kept in
/// (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub tx: f64,
    pub ty: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(tx: f64, ty: f64, yaw: f64) -> Self {
        Pose2 { tx, ty, yaw: normalize_angle(yaw) }
    }

    pub fn identity() -> Self {
        Pose2 { tx: 0.0, ty: 0.0, yaw: 0.0 }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(
            c * p.x - s * p.y + self.tx,
            s * p.x + c * p.y + self.ty,
            p.z,
        )
    }

    /// Rotate a direction vector without translating it.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }

    /// `self` after `inner`: the returned pose applies `inner` first.
    pub fn compose(&self, inner: &Pose2) -> Pose2 {
        let t = self.apply(&Vec3::new(inner.tx, inner.ty, 0.0));
        Pose2::new(t.x, t.y, self.yaw + inner.yaw)
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.yaw.sin_cos();
        Pose2::new(
            -(c * self.tx + s * self.ty),
            -(-s * self.tx + c * self.ty),
            -self.yaw,
        )
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.tx, self.ty, 0.0)
    }
}

/// Express a frame-k point in current-frame coordinates.
pub fn transform_to_current(p: &Vec3, pose_k_to_0: &Pose2) -> Vec3 {
    pose_k_to_0.apply(p)
}

// ─── Ego-motion integration ───

/// One timestamped body-frame motion state: planar velocity (vx right,
/// vy forward, m/s) and yaw rate (rad/s, positive counterclockwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSample {
    pub t: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

/// Displacement over one interval of constant body velocity and yaw rate:
/// the pose of the body at the end of the interval, expressed in the body
/// frame at its start. Midpoint rule for the heading under the translation.
pub fn pose_increment(vx: f64, vy: f64, yaw_rate: f64, dt: f64) -> Pose2 {
    let dyaw = yaw_rate * dt;
    let (s, c) = (0.5 * dyaw).sin_cos();
    Pose2::new((c * vx - s * vy) * dt, (s * vx + c * vy) * dt, dyaw)
}

/// Integrate motion samples into the ego displacement over the whole slice:
/// the pose of the ego at the last sample's time, expressed in the ego frame
/// at the first sample's time. Each interval uses the velocity and yaw rate
/// of the sample at its start. The inverse of the returned pose maps points
/// measured in the first frame into the last frame's coordinates.
///
/// Timestamps must be strictly increasing. A slice with fewer than two
/// samples integrates no motion and yields the identity.
pub fn accumulate_pose(samples: &[MotionSample]) -> Result<Pose2, GeometryError> {
    let mut acc = Pose2::identity();
    for i in 1..samples.len() {
        let dt = samples[i].t - samples[i - 1].t;
        if dt <= 0.0 {
            return Err(GeometryError::NonMonotonicTimestamps {
                index: i,
                t: samples[i].t,
                prev: samples[i - 1].t,
            });
        }
        let s = &samples[i - 1];
        acc = acc.compose(&pose_increment(s.vx, s.vy, s.yaw_rate, dt));
    }
    Ok(acc)
}
