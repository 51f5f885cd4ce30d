//! Heading distributions and the g(theta) table.
//!
//! The per-point aggregation duration divides the displacement budget by
//! |v| * g(theta), where g is the expected absolute tangent of the angle
//! between a point's line of sight and the headings objects are likely to
//! move along. Headings are modeled either as a Laplace distribution
//! truncated to [-pi/2, pi/2] (motion along a line is direction-agnostic, so
//! headings fold modulo pi) or as an empirical histogram. The tangent is
//! clamped near its poles and the result floored, keeping durations finite.

use crate::geometry::normalize_angle;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{BufRead, Write};
use thiserror::Error;

/// Default Laplace location, degrees.
pub const DEFAULT_MU_DEGREES: f64 = 0.0;
/// Default Laplace scale, degrees.
pub const DEFAULT_B_DEGREES: f64 = 3.1;
/// Default table resolution, degrees.
pub const DEFAULT_RESOLUTION_DEGREES: f64 = 0.1;
/// |tan| is clamped at tan(88 deg) inside the expectation integral.
pub const TAN_CLAMP_DEGREES: f64 = 88.0;
/// Lower bound applied to g(theta).
pub const G_FLOOR: f64 = 1e-3;
/// Scale floor for fitted Laplace distributions, radians.
pub const B_MIN: f64 = 1e-4;

const SUPPORT: f64 = FRAC_PI_2;

#[derive(Debug, Error, PartialEq)]
pub enum HeadingError {
    #[error("table resolution {got} rad outside [{min}, {max}]")]
    InvalidResolution { got: f64, min: f64, max: f64 },
    #[error("empty heading histogram")]
    EmptyHistogram,
    #[error("invalid heading distribution: {0}")]
    InvalidDistribution(String),
    #[error("table parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadingKind {
    Laplace,
    Empirical,
}

/// Distribution of object headings folded into [-pi/2, pi/2]. Angles are
/// radians.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadingDistribution {
    kind: HeadingKind,
    mu: f64,
    b: f64,
    /// Point masses (angle, probability) for the empirical kind.
    bins: Vec<(f64, f64)>,
    /// Normalization of the truncated Laplace density.
    mass: f64,
}

/// Fold an angle modulo pi into [-pi/2, pi/2).
pub fn fold_heading(alpha: f64) -> f64 {
    (alpha + SUPPORT).rem_euclid(PI) - SUPPORT
}

impl HeadingDistribution {
    /// Laplace(mu, b) truncated and renormalized on [-pi/2, pi/2].
    pub fn laplace(mu: f64, b: f64) -> Result<Self, HeadingError> {
        if !(b.is_finite() && b > 0.0) {
            return Err(HeadingError::InvalidDistribution(format!("scale b = {b}")));
        }
        if !(mu.is_finite() && mu.abs() <= SUPPORT) {
            return Err(HeadingError::InvalidDistribution(format!(
                "location mu = {mu} outside [-pi/2, pi/2]"
            )));
        }
        let mass = 1.0 - 0.5 * ((-(SUPPORT - mu) / b).exp() + (-(SUPPORT + mu) / b).exp());
        Ok(HeadingDistribution { kind: HeadingKind::Laplace, mu, b, bins: Vec::new(), mass })
    }

    /// Discrete distribution of (angle, probability) masses on the support.
    pub fn empirical(bins: Vec<(f64, f64)>) -> Result<Self, HeadingError> {
        if bins.is_empty() {
            return Err(HeadingError::EmptyHistogram);
        }
        let mut sum = 0.0;
        for &(a, p) in &bins {
            if !(a.is_finite() && a.abs() <= SUPPORT + 1e-12) {
                return Err(HeadingError::InvalidDistribution(format!(
                    "bin angle {a} outside support"
                )));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(HeadingError::InvalidDistribution(format!("bin probability {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(HeadingError::InvalidDistribution(format!(
                "bin probabilities sum to {sum}"
            )));
        }
        Ok(HeadingDistribution {
            kind: HeadingKind::Empirical,
            mu: 0.0,
            b: 0.0,
            bins,
            mass: 1.0,
        })
    }

    pub fn kind(&self) -> HeadingKind {
        self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn bins(&self) -> &[(f64, f64)] {
        &self.bins
    }

    /// Density of the truncated Laplace at `alpha` (zero outside the
    /// support). Only meaningful for the Laplace kind.
    pub fn pdf(&self, alpha: f64) -> f64 {
        if alpha.abs() > SUPPORT {
            return 0.0;
        }
        (-(alpha - self.mu).abs() / self.b).exp() / (2.0 * self.b * self.mass)
    }
}

/// Quadrature and clamping settings for the g(theta) expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Clamp applied to |tan| inside the integrand.
    pub tan_clamp: f64,
    /// Lower bound applied to the result.
    pub g_floor: f64,
    /// Composite Simpson interval budget across the support.
    pub intervals: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            tan_clamp: TAN_CLAMP_DEGREES.to_radians().tan(),
            g_floor: G_FLOOR,
            intervals: 4096,
        }
    }
}

fn integrand(theta: f64, alpha: f64, dist: &HeadingDistribution, clamp: f64) -> f64 {
    (theta + alpha).tan().abs().min(clamp) * dist.pdf(alpha)
}

/// Simpson panels are split at the integrand's non-smooth points (the
/// density kink at mu, tangent zeros, and clamp transitions) so the
/// composite rule keeps its full order on each panel.
fn breakpoints(theta: f64, dist: &HeadingDistribution, clamp: f64) -> Vec<f64> {
    let clamp_angle = clamp.atan();
    let mut pts = vec![-SUPPORT, SUPPORT, dist.mu];
    for m in -2..=2 {
        let base = m as f64 * PI - theta;
        pts.push(base);
        pts.push(base + clamp_angle);
        pts.push(base - clamp_angle);
        pts.push(base + (PI - clamp_angle));
        pts.push(base - (PI - clamp_angle));
    }
    pts.retain(|a| a.abs() <= SUPPORT);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts
}

fn simpson_panel(theta: f64, lo: f64, hi: f64, n: usize, dist: &HeadingDistribution, clamp: f64) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut sum = integrand(theta, lo, dist, clamp) + integrand(theta, hi, dist, clamp);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(theta, lo + i as f64 * h, dist, clamp);
    }
    sum * h / 3.0
}

/// Expected clamped |tan(theta + alpha)| over the heading distribution,
/// floored at `quad.g_floor`. Defined for any theta; periodic with period pi.
pub fn g_theta(theta: f64, dist: &HeadingDistribution, quad: &QuadratureSpec) -> f64 {
    let value = match dist.kind {
        HeadingKind::Empirical => dist
            .bins
            .iter()
            .map(|&(a, p)| p * (theta + a).tan().abs().min(quad.tan_clamp))
            .sum(),
        HeadingKind::Laplace => {
            let pts = breakpoints(theta, dist, quad.tan_clamp);
            let total: f64 = pts.windows(2).map(|w| w[1] - w[0]).sum();
            let mut acc = 0.0;
            for w in pts.windows(2) {
                let len = w[1] - w[0];
                if len <= 0.0 {
                    continue;
                }
                let n = (((quad.intervals as f64 * len / total) / 2.0).round() as usize).max(1) * 2;
                acc += simpson_panel(theta, w[0], w[1], n, dist, quad.tan_clamp);
            }
            acc
        }
    };
    value.max(quad.g_floor)
}

// ─── Precomputed table ───

pub const RESOLUTION_MIN: f64 = 1e-4;
pub const RESOLUTION_MAX: f64 = 0.05;

/// Provenance recorded with a table; angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct TableMeta {
    pub kind: HeadingKind,
    pub mu: f64,
    pub b: f64,
    pub tan_clamp: f64,
    pub g_floor: f64,
    pub bins: usize,
}

/// g(theta) sampled on a uniform grid over [-pi, pi], looked up by linear
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GThetaTable {
    step: f64,
    values: Vec<f64>,
    pub meta: TableMeta,
}

/// Evaluate g on a grid of the requested resolution (radians per step,
/// within [1e-4, 0.05]). The grid spans [-pi, pi] inclusive; the actual step
/// divides 2 pi exactly and is recorded on the table.
pub fn build_table(
    dist: &HeadingDistribution,
    resolution: f64,
    quad: &QuadratureSpec,
) -> Result<GThetaTable, HeadingError> {
    if !(resolution.is_finite() && (RESOLUTION_MIN..=RESOLUTION_MAX).contains(&resolution)) {
        return Err(HeadingError::InvalidResolution {
            got: resolution,
            min: RESOLUTION_MIN,
            max: RESOLUTION_MAX,
        });
    }
    let intervals = (TAU / resolution).round().max(1.0) as usize;
    let step = TAU / intervals as f64;
    let values = (0..=intervals)
        .map(|i| g_theta(-PI + i as f64 * step, dist, quad))
        .collect();
    Ok(GThetaTable {
        step,
        values,
        meta: TableMeta {
            kind: dist.kind,
            mu: dist.mu,
            b: dist.b,
            tan_clamp: quad.tan_clamp,
            g_floor: quad.g_floor,
            bins: dist.bins.len(),
        },
    })
}

impl GThetaTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; theta is wrapped into (-pi, pi] first.
    pub fn lookup(&self, theta: f64) -> f64 {
        let th = normalize_angle(theta);
        let x = (th + PI) / self.step;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Write the table as portable text: one metadata header line, then
    /// `theta_deg,value` rows at 17 significant digits. Export, import, and
    /// re-export reproduce the file byte for byte.
    pub fn export<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let kind = match self.meta.kind {
            HeadingKind::Laplace => "laplace",
            HeadingKind::Empirical => "empirical",
        };
        writeln!(
            out,
            "# gtheta kind={} mu_deg={:.16e} b_deg={:.16e} tan_clamp={:.16e} g_floor={:.16e} step_deg={:.16e} bins={} rows={}",
            kind,
            self.meta.mu.to_degrees(),
            self.meta.b.to_degrees(),
            self.meta.tan_clamp,
            self.meta.g_floor,
            self.step.to_degrees(),
            self.meta.bins,
            self.values.len(),
        )?;
        writeln!(out, "theta_deg,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let theta_deg = (-PI + i as f64 * self.step).to_degrees();
            writeln!(out, "{theta_deg:.16e},{v:.16e}")?;
        }
        Ok(())
    }

    pub fn import<R: BufRead>(input: &mut R) -> Result<Self, HeadingError> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, reason: String| HeadingError::Parse { line: line + 1, reason };
        let (hline_idx, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty file".into()))
            .and_then(|(i, r)| r.map(|l| (i, l)).map_err(|e| parse_err(i, e.to_string())))?;
        let mut fields = std::collections::BTreeMap::new();
        for tok in header.trim_start_matches('#').split_whitespace().skip(1) {
            if let Some((k, v)) = tok.split_once('=') {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .ok_or_else(|| parse_err(hline_idx, format!("missing header field {k}")))
        };
        let getf = |k: &str| -> Result<f64, HeadingError> {
            get(k)?.parse::<f64>().map_err(|e| parse_err(hline_idx, format!("{k}: {e}")))
        };
        let kind = match get("kind")?.as_str() {
            "laplace" => HeadingKind::Laplace,
            "empirical" => HeadingKind::Empirical,
            other => return Err(parse_err(hline_idx, format!("unknown kind {other}"))),
        };
        let meta = TableMeta {
            kind,
            mu: getf("mu_deg")?.to_radians(),
            b: getf("b_deg")?.to_radians(),
            tan_clamp: getf("tan_clamp")?,
            g_floor: getf("g_floor")?,
            bins: get("bins")?
                .parse()
                .map_err(|e| parse_err(hline_idx, format!("bins: {e}")))?,
        };
        let step = getf("step_deg")?.to_radians();
        let rows: usize = get("rows")?
            .parse()
            .map_err(|e| parse_err(hline_idx, format!("rows: {e}")))?;

        let (cidx, columns) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing column line".into()))
            .and_then(|(i, r)| r.map(|l| (i, l)).map_err(|e| parse_err(i, e.to_string())))?;
        if columns.trim() != "theta_deg,value" {
            return Err(parse_err(cidx, format!("unexpected columns: {columns}")));
        }

        let mut values = Vec::with_capacity(rows);
        for (i, line) in lines {
            let line = line.map_err(|e| parse_err(i, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (_, v) = line
                .split_once(',')
                .ok_or_else(|| parse_err(i, "expected theta_deg,value".into()))?;
            let v: f64 = v.trim().parse().map_err(|e| parse_err(i, format!("value: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(i, format!("non-finite value {v}")));
            }
            values.push(v);
        }
        if values.len() != rows {
            return Err(parse_err(
                rows + 2,
                format!("expected {rows} rows, found {}", values.len()),
            ));
        }
        if values.len() < 2 {
            return Err(parse_err(0, "table needs at least two rows".into()));
        }
        Ok(GThetaTable { step, values, meta })
    }
}

// ─── Fitting ───

/// Normalized histogram of folded heading samples as an empirical
/// distribution with `n_bins` equal-width bins over the support. Bins with
/// zero mass are dropped.
pub fn fit_empirical(samples: &[f64], n_bins: usize) -> Result<HeadingDistribution, HeadingError> {
    if samples.is_empty() {
        return Err(HeadingError::EmptyHistogram);
    }
    if n_bins == 0 {
        return Err(HeadingError::InvalidDistribution("zero histogram bins".into()));
    }
    let width = PI / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &s in samples {
        let f = fold_heading(s);
        let idx = (((f + SUPPORT) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let total = samples.len() as f64;
    let bins: Vec<(f64, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (-SUPPORT + (i as f64 + 0.5) * width, c as f64 / total))
        .collect();
    HeadingDistribution::empirical(bins)
}

/// Maximum-likelihood Laplace fit to folded heading samples: median for the
/// location, mean absolute deviation for the scale (floored at [`B_MIN`]).
pub fn fit_laplace(samples: &[f64]) -> Result<HeadingDistribution, HeadingError> {
    if samples.is_empty() {
        return Err(HeadingError::EmptyHistogram);
    }
    let mut folded: Vec<f64> = samples.iter().map(|&s| fold_heading(s)).collect();
    folded.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = folded.len();
    let mu = if n % 2 == 1 {
        folded[n / 2]
    } else {
        0.5 * (folded[n / 2 - 1] + folded[n / 2])
    };
    let b = folded.iter().map(|a| (a - mu).abs()).sum::<f64>() / n as f64;
    HeadingDistribution::laplace(mu, b.max(B_MIN))
}
