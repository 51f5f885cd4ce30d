//! Doppler decomposition: split a measured Doppler into the part induced by
//! the ego vehicle's own speed and the part due to object motion, and
//! estimate the ego velocity from the static returns when no odometry is
//! available.
//!
//! Sign convention: a point's dynamic Doppler `v_dyn` is positive when the
//! object's own motion increases range. The ego-speed component `h` is
//! positive when the ego moves toward the point, and measurements are
//! synthesized and decomposed under the single model `d = v_dyn + h`, so the
//! ego part cancels exactly.

use crate::geometry::{azimuth_of, GeometryError, Vec3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on plausible ego speed, m/s.
pub const EGO_SPEED_MAX: f64 = 70.0;

/// Default bound on physical Doppler magnitude, m/s.
pub const DOPPLER_MAX: f64 = 90.0;

#[derive(Debug, Error, PartialEq)]
pub enum DopplerError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("ego-velocity estimation needs at least {need} points, got {got}")]
    InsufficientPoints { got: usize, need: usize },
    #[error("no consensus: best inlier ratio {best_ratio:.3} below {min_ratio:.3}")]
    NoConsensus { best_ratio: f64, min_ratio: f64 },
}

/// One radar detection: position in the measuring frame, raw Doppler (m/s),
/// and reflection intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub position: Vec3,
    pub doppler: f64,
    pub intensity: f64,
}

/// Planar ego velocity in the body frame: `cx` right, `cy` forward, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoVelocity {
    pub cx: f64,
    pub cy: f64,
}

impl EgoVelocity {
    pub fn new(cx: f64, cy: f64) -> Self {
        EgoVelocity { cx, cy }
    }

    pub fn speed(&self) -> f64 {
        self.cx.hypot(self.cy)
    }
}

/// Per-frame ego motion state: body velocity plus yaw rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub velocity: EgoVelocity,
    pub yaw_rate: f64,
}

/// Ego-speed Doppler at azimuth `theta`: the projection of the ego velocity
/// onto the point's direction.
pub fn ego_speed_doppler(theta: f64, ego: &EgoVelocity) -> f64 {
    ego.cx * theta.sin() + ego.cy * theta.cos()
}

/// A radar point with its azimuth and Doppler split into ego-induced and
/// dynamic parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposedPoint {
    pub point: RadarPoint,
    pub theta: f64,
    pub h: f64,
    pub v_dyn: f64,
}

/// Split a point's measured Doppler into `h` (ego-induced) and `v_dyn`.
pub fn decompose(point: &RadarPoint, ego: &EgoVelocity) -> Result<DecomposedPoint, DopplerError> {
    let theta = azimuth_of(&point.position)?;
    let h = ego_speed_doppler(theta, ego);
    Ok(DecomposedPoint { point: *point, theta, h, v_dyn: point.doppler - h })
}

// ─── Ego-velocity estimation from static returns ───

/// RANSAC settings for [`estimate_ego_velocity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorParams {
    pub min_points: usize,
    pub iterations: usize,
    /// Residual bound |d - h(theta)| for a point to count as an inlier, m/s.
    pub inlier_threshold: f64,
    /// Below this inlier ratio the fit is rejected.
    pub min_inlier_ratio: f64,
    /// Candidate models faster than this are discarded as implausible.
    pub ego_speed_max: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            min_points: 8,
            iterations: 100,
            inlier_threshold: 0.4,
            min_inlier_ratio: 0.3,
            ego_speed_max: EGO_SPEED_MAX,
        }
    }
}

/// Result of an ego-velocity fit: the velocity, the per-point inlier mask it
/// induces, and whether it came from the caller's prior instead of consensus.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoEstimate {
    pub velocity: EgoVelocity,
    pub inliers: Vec<bool>,
    pub inlier_ratio: f64,
    pub from_prior: bool,
}

fn inlier_mask(points: &[(f64, f64)], c: &EgoVelocity, thr: f64) -> (Vec<bool>, usize) {
    let mut mask = vec![false; points.len()];
    let mut count = 0;
    for (i, &(theta, d)) in points.iter().enumerate() {
        if (d - ego_speed_doppler(theta, c)).abs() <= thr {
            mask[i] = true;
            count += 1;
        }
    }
    (mask, count)
}

/// Least-squares fit of (cx, cy) to d_i = cx sin(theta_i) + cy cos(theta_i)
/// over the selected points. None if the normal matrix is singular (all
/// bearings effectively identical).
fn least_squares(points: &[(f64, f64)], mask: &[bool]) -> Option<EgoVelocity> {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&(theta, d), &keep) in points.iter().zip(mask) {
        if !keep {
            continue;
        }
        let (s, c) = theta.sin_cos();
        a11 += s * s;
        a12 += s * c;
        a22 += c * c;
        b1 += s * d;
        b2 += c * d;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-12 {
        return None;
    }
    Some(EgoVelocity::new((b1 * a22 - b2 * a12) / det, (b2 * a11 - b1 * a12) / det))
}

/// Estimate the ego velocity from one frame's raw points. Static returns
/// satisfy d = h(theta); dynamic points are outliers the RANSAC loop rejects.
///
/// Two-point minimal models are drawn `iterations` times; the best consensus
/// set is refit by least squares. If the best inlier ratio stays below
/// `min_inlier_ratio`, the caller's `prior` is returned (flagged) when
/// provided, else `NoConsensus`. Deterministic for a given RNG state.
pub fn estimate_ego_velocity<R: Rng>(
    points: &[RadarPoint],
    prior: Option<EgoVelocity>,
    params: &EstimatorParams,
    rng: &mut R,
) -> Result<EgoEstimate, DopplerError> {
    if points.len() < params.min_points {
        return Err(DopplerError::InsufficientPoints {
            got: points.len(),
            need: params.min_points,
        });
    }
    let obs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| Ok((azimuth_of(&p.position)?, p.doppler)))
        .collect::<Result<_, GeometryError>>()?;
    let n = obs.len();

    let mut best: Option<(usize, EgoVelocity)> = None;
    for _ in 0..params.iterations {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let (t1, d1) = obs[i];
        let (t2, d2) = obs[j];
        // [sin t1, cos t1; sin t2, cos t2] [cx; cy] = [d1; d2]
        let det = (t1 - t2).sin();
        if det.abs() < 1e-6 {
            continue;
        }
        let cand = EgoVelocity::new(
            (d1 * t2.cos() - d2 * t1.cos()) / det,
            (d2 * t1.sin() - d1 * t2.sin()) / det,
        );
        if !cand.cx.is_finite() || !cand.cy.is_finite() || cand.speed() > params.ego_speed_max {
            continue;
        }
        let (_, count) = inlier_mask(&obs, &cand, params.inlier_threshold);
        if best.map_or(true, |(c, _)| count > c) {
            best = Some((count, cand));
        }
    }

    let consensus = best.filter(|&(count, _)| count as f64 / n as f64 >= params.min_inlier_ratio);
    match consensus {
        Some((_, cand)) => {
            let (mask, _) = inlier_mask(&obs, &cand, params.inlier_threshold);
            let refined = least_squares(&obs, &mask).unwrap_or(cand);
            let velocity = if refined.speed() <= params.ego_speed_max { refined } else { cand };
            let (mask, count) = inlier_mask(&obs, &velocity, params.inlier_threshold);
            Ok(EgoEstimate {
                velocity,
                inlier_ratio: count as f64 / n as f64,
                inliers: mask,
                from_prior: false,
            })
        }
        None => match prior {
            Some(p) => {
                let (mask, count) = inlier_mask(&obs, &p, params.inlier_threshold);
                Ok(EgoEstimate {
                    velocity: p,
                    inlier_ratio: count as f64 / n as f64,
                    inliers: mask,
                    from_prior: true,
                })
            }
            None => Err(DopplerError::NoConsensus {
                best_ratio: best.map_or(0.0, |(c, _)| c as f64 / n as f64),
                min_ratio: params.min_inlier_ratio,
            }),
        },
    }
}
