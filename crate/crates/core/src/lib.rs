//! Doppler-driven temporal aggregation for radar point clouds.
//!
//! Radar frames are sparse; stacking past frames densifies them but smears
//! moving objects along the radial direction. This crate aggregates a sliding
//! window of frames into the current frame's coordinates, compensates each
//! point's radial displacement from its measured Doppler, and bounds the
//! residual tangential displacement by giving every point its own aggregation
//! duration derived from a distribution of object headings. A synthetic scene
//! generator with exact ground truth and an evaluation harness close the loop.
//!
//! Module map:
//! - [`geometry`]: planar poses, radial frames, ego-motion integration
//! - [`doppler`]: ego-speed Doppler removal and radar ego-velocity estimation
//! - [`heading`]: heading distributions and the g(theta) duration-limit table
//! - [`aggregate`]: sliding-window buffer and the aggregation modes
//! - [`sim`]: synthetic scenes with per-point oracle shifts
//! - [`eval`]: dispersion, elimination, and detection-proxy metrics
//! - [`io`]: file formats and run configuration

pub mod aggregate;
pub mod doppler;
pub mod eval;
pub mod geometry;
pub mod heading;
pub mod io;
pub mod sim;
