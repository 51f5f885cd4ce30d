//! Metrics comparing aggregation modes against ground truth.
//!
//! Three families:
//!
//! - **Dispersion**: how far aggregated points sit from where the object
//!   really is. Radial residual is measured against the radial-only oracle
//!   (the best any Doppler-driven shift can do), so a correct shift scores
//!   zero regardless of tangential motion; the tangential offset and the
//!   total offset are measured against the fully compensated oracle.
//! - **Elimination**: which dynamic points the adaptive mode discards
//!   relative to an identical-window fixed-duration aggregation, binned by
//!   range, object |speed|, and relative heading.
//! - **Detection proxy**: a deliberately simple BEV grid-clustering detector
//!   run identically on every mode's output, scored by average precision
//!   against ground-truth boxes at a loose IoU threshold, so AP differences
//!   isolate input-cloud quality.
//!
//! Aggregated points are tied back to ground truth through the cloud's
//! provenance list: source frame offset plus in-frame index.

use crate::aggregate::AggregatedCloud;
use crate::geometry::Vec3;
use crate::sim::{oracle_shift, GroundTruth, SimError, TruthPoint};
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground-truth frame {frame}")]
    UnknownFrame { frame: usize },
    #[error("no ground truth for point {index} of frame {frame}")]
    MissingGroundTruth { frame: usize, index: usize },
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Appendix-style default bin edges.
pub const RANGE_BIN_EDGES: [f64; 5] = [0.0, 40.0, 80.0, 120.0, 160.0];
pub const VELOCITY_BIN_EDGES: [f64; 5] = [0.0, 12.0, 24.0, 36.0, 48.0];
pub const HEADING_BIN_EDGES_DEG: [f64; 5] = [0.0, 30.0, 60.0, 120.0, 180.0];

fn is_dynamic(tp: &TruthPoint) -> bool {
    tp.object.is_some() && tp.speed != 0.0
}

/// Resolve an aggregated point's provenance to its ground-truth record.
fn truth_of<'t>(
    truth: &'t GroundTruth,
    current: usize,
    source: &crate::aggregate::PointSource,
) -> Result<(usize, usize, &'t TruthPoint), EvalError> {
    let frame = current as i64 + source.frame_index as i64;
    if frame < 0 || frame as usize >= truth.frames.len() {
        return Err(EvalError::MissingGroundTruth {
            frame: frame.max(0) as usize,
            index: source.index as usize,
        });
    }
    let frame = frame as usize;
    let index = source.index as usize;
    let tp = truth.frames[frame]
        .points
        .get(index)
        .ok_or(EvalError::MissingGroundTruth { frame, index })?;
    Ok((frame, index, tp))
}

// ─── Dispersion ───

#[derive(Debug, Clone, Default)]
struct SpreadAcc {
    n: usize,
    sum_r: f64,
    sumsq_r: f64,
    sum_t: f64,
    sumsq_t: f64,
    sum_off: f64,
}

impl SpreadAcc {
    fn push(&mut self, radial: f64, tangential: f64, offset: f64) {
        self.n += 1;
        self.sum_r += radial;
        self.sumsq_r += radial * radial;
        self.sum_t += tangential;
        self.sumsq_t += tangential * tangential;
        self.sum_off += offset;
    }

    fn std(n: usize, sum: f64, sumsq: f64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let mean = sum / n as f64;
        (sumsq / n as f64 - mean * mean).max(0.0).sqrt()
    }

    fn radial_spread(&self) -> f64 {
        Self::std(self.n, self.sum_r, self.sumsq_r)
    }

    fn tangential_spread(&self) -> f64 {
        Self::std(self.n, self.sum_t, self.sumsq_t)
    }

    fn mean_offset(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum_off / self.n as f64
        }
    }
}

pub const OFFSET_HIST_BIN_WIDTH: f64 = 0.25;
pub const OFFSET_HIST_BINS: usize = 24;

/// Streaming collector so multi-window runs can pool their statistics
/// before producing one report.
#[derive(Debug, Clone, Default)]
pub struct DispersionAccumulator {
    all: SpreadAcc,
    per_object: BTreeMap<u32, SpreadAcc>,
    hist: Vec<usize>,
}

impl DispersionAccumulator {
    pub fn new() -> Self {
        DispersionAccumulator { all: SpreadAcc::default(), per_object: BTreeMap::new(), hist: vec![0; OFFSET_HIST_BINS] }
    }

    /// Fold in one aggregated window whose newest frame is `current`.
    /// Static points are skipped; every source must resolve to ground truth.
    pub fn add_window(
        &mut self,
        cloud: &AggregatedCloud,
        truth: &GroundTruth,
        current: usize,
    ) -> Result<(), EvalError> {
        if current >= truth.frames.len() {
            return Err(EvalError::UnknownFrame { frame: current });
        }
        for (p, s) in cloud.points.iter().zip(&cloud.sources) {
            let (frame, index, tp) = truth_of(truth, current, s)?;
            if !is_dynamic(tp) {
                continue;
            }
            let o = oracle_shift(truth, frame, index, current).map_err(|e| match e {
                SimError::UnknownFrame { frame } => EvalError::UnknownFrame { frame },
                _ => EvalError::MissingGroundTruth { frame, index },
            })?;
            let q = Vec3::new(p.x, p.y, p.z);
            let radial = q.norm_xy() - o.radial_only.norm_xy();
            let err = q - o.accurate;
            let tangential = o.t_hat.dot_xy(&err);
            let offset = err.norm_xy();
            self.all.push(radial, tangential, offset);
            self.per_object
                .entry(tp.object.expect("dynamic points carry an object id"))
                .or_default()
                .push(radial, tangential, offset);
            let bin = ((offset / OFFSET_HIST_BIN_WIDTH) as usize).min(OFFSET_HIST_BINS - 1);
            self.hist[bin] += 1;
        }
        Ok(())
    }

    pub fn report(&self) -> DispersionReport {
        DispersionReport {
            per_object: self
                .per_object
                .iter()
                .map(|(&object, acc)| ObjectDispersion {
                    object,
                    radial_spread: acc.radial_spread(),
                    tangential_spread: acc.tangential_spread(),
                    mean_offset: acc.mean_offset(),
                    count: acc.n,
                })
                .collect(),
            radial_spread: self.all.radial_spread(),
            tangential_spread: self.all.tangential_spread(),
            mean_offset: self.all.mean_offset(),
            dynamic_count: self.all.n,
            offset_hist_bin_width: OFFSET_HIST_BIN_WIDTH,
            offset_histogram: self.hist.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDispersion {
    pub object: u32,
    pub radial_spread: f64,
    pub tangential_spread: f64,
    pub mean_offset: f64,
    pub count: usize,
}

/// Scatter statistics of aggregated dynamic points around their oracle
/// positions. Spreads are population standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionReport {
    pub per_object: Vec<ObjectDispersion>,
    pub radial_spread: f64,
    pub tangential_spread: f64,
    pub mean_offset: f64,
    pub dynamic_count: usize,
    pub offset_hist_bin_width: f64,
    pub offset_histogram: Vec<usize>,
}

/// One-shot dispersion over a single aggregated window.
pub fn dispersion(
    cloud: &AggregatedCloud,
    truth: &GroundTruth,
    current: usize,
) -> Result<DispersionReport, EvalError> {
    let mut acc = DispersionAccumulator::new();
    acc.add_window(cloud, truth, current)?;
    Ok(acc.report())
}

// ─── Elimination ───

#[derive(Debug, Clone)]
pub struct BinningSpec {
    pub range: Vec<f64>,
    pub velocity: Vec<f64>,
    pub heading_deg: Vec<f64>,
}

impl Default for BinningSpec {
    fn default() -> Self {
        BinningSpec {
            range: RANGE_BIN_EDGES.to_vec(),
            velocity: VELOCITY_BIN_EDGES.to_vec(),
            heading_deg: HEADING_BIN_EDGES_DEG.to_vec(),
        }
    }
}

/// Index of the half-open bin [edge_i, edge_{i+1}) holding `value`; the last
/// bin absorbs everything past the final edge.
fn bin_index(edges: &[f64], value: f64) -> usize {
    let bins = edges.len() - 1;
    for i in 0..bins {
        if value < edges[i + 1] {
            return i;
        }
    }
    bins - 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub total: usize,
    pub eliminated: usize,
}

impl BinStat {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.eliminated as f64 / self.total as f64
        }
    }
}

/// Dynamic points the adaptive mode dropped, as a fraction of the dynamic
/// points an identical-window fixed-duration aggregation kept.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationReport {
    pub dynamic_total: usize,
    pub dynamic_kept: usize,
    pub by_range: Vec<BinStat>,
    pub by_velocity: Vec<BinStat>,
    pub by_heading: Vec<BinStat>,
}

impl EliminationReport {
    pub fn overall_fraction(&self) -> f64 {
        if self.dynamic_total == 0 {
            0.0
        } else {
            (self.dynamic_total - self.dynamic_kept) as f64 / self.dynamic_total as f64
        }
    }

    /// Pool another report (same binning) into this one.
    pub fn absorb(&mut self, other: &EliminationReport) {
        self.dynamic_total += other.dynamic_total;
        self.dynamic_kept += other.dynamic_kept;
        for (a, b) in self.by_range.iter_mut().zip(&other.by_range) {
            a.total += b.total;
            a.eliminated += b.eliminated;
        }
        for (a, b) in self.by_velocity.iter_mut().zip(&other.by_velocity) {
            a.total += b.total;
            a.eliminated += b.eliminated;
        }
        for (a, b) in self.by_heading.iter_mut().zip(&other.by_heading) {
            a.total += b.total;
            a.eliminated += b.eliminated;
        }
    }
}

fn empty_bins(edges: &[f64]) -> Vec<BinStat> {
    edges
        .windows(2)
        .map(|w| BinStat { lo: w[0], hi: w[1], total: 0, eliminated: 0 })
        .collect()
}

/// Compare an adaptive aggregation against its fixed-duration reference over
/// the same window. Every candidate point must also appear in the reference.
pub fn elimination_stats(
    candidate: &AggregatedCloud,
    reference: &AggregatedCloud,
    truth: &GroundTruth,
    current: usize,
    bins: &BinningSpec,
) -> Result<EliminationReport, EvalError> {
    if current >= truth.frames.len() {
        return Err(EvalError::UnknownFrame { frame: current });
    }
    let kept: HashSet<&crate::aggregate::PointSource> = candidate.sources.iter().collect();
    let reference_set: HashSet<&crate::aggregate::PointSource> =
        reference.sources.iter().collect();
    for s in &candidate.sources {
        if !reference_set.contains(&s) {
            return Err(EvalError::WindowMismatch(format!(
                "candidate point (frame {}, index {}) absent from the reference",
                s.frame_index, s.index
            )));
        }
    }

    let mut report = EliminationReport {
        dynamic_total: 0,
        dynamic_kept: 0,
        by_range: empty_bins(&bins.range),
        by_velocity: empty_bins(&bins.velocity),
        by_heading: empty_bins(&bins.heading_deg),
    };
    for s in &reference.sources {
        let (_, _, tp) = truth_of(truth, current, s)?;
        if !is_dynamic(tp) {
            continue;
        }
        let eliminated = !kept.contains(&s);
        report.dynamic_total += 1;
        if !eliminated {
            report.dynamic_kept += 1;
        }
        let slots = [
            (&mut report.by_range, bin_index(&bins.range, tp.range)),
            (&mut report.by_velocity, bin_index(&bins.velocity, tp.speed.abs())),
            (&mut report.by_heading, bin_index(&bins.heading_deg, tp.heading_rel_deg)),
        ];
        for (table, idx) in slots {
            table[idx].total += 1;
            if eliminated {
                table[idx].eliminated += 1;
            }
        }
    }
    Ok(report)
}

// ─── Detection proxy ───

/// Axis-aligned BEV box with a detection score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BevBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
    pub score: f64,
}

impl BevBox {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))
    }

    pub fn area(&self) -> f64 {
        (self.max_x - self.min_x).max(0.0) * (self.max_y - self.min_y).max(0.0)
    }
}

pub fn bev_iou(a: &BevBox, b: &BevBox) -> f64 {
    let ix = (a.max_x.min(b.max_x) - a.min_x.max(b.min_x)).max(0.0);
    let iy = (a.max_y.min(b.max_y) - a.min_y.max(b.min_y)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone)]
pub struct ClusterParams {
    pub cell_size: f64,
    /// Points with |Doppler feature| below this are ignored as static.
    pub dynamic_speed_threshold: f64,
    /// Minimum occupied cells for a component to become a box.
    pub min_cells: usize,
    /// Find components on a one-cell dilation of the occupancy grid (bridges
    /// gaps up to two empty cells), while boxes and counts come from the
    /// original cells. Off by default: bridging also fuses neighboring-lane
    /// smears into one oversized detection.
    pub closing: bool,
    /// Points within this many frames of a cluster's newest point define the
    /// box extent; older cluster members only raise the score.
    pub recent_frames: i32,
    /// Each box side is grown to at least this length. Radar returns come
    /// off the visible face of an object, so the raw footprint of even a
    /// clean cluster is far thinner than the body behind it: depth (y) is
    /// grown away from the sensor, width (x) symmetrically.
    pub min_box_extent: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            cell_size: 0.5,
            dynamic_speed_threshold: 0.5,
            min_cells: 3,
            closing: false,
            recent_frames: 0,
            min_box_extent: 3.0,
        }
    }
}

/// Grid-clustering proxy detector: BEV occupancy over dynamic points,
/// 8-neighborhood connected components, one axis-aligned box per component
/// scored by its point count. The box is fitted to the component's newest
/// points only — a trailing smear of stale returns raises confidence but
/// must not drag the localization away from where the object is now.
pub fn cluster_detect(cloud: &AggregatedCloud, params: &ClusterParams) -> Vec<BevBox> {
    let cell = params.cell_size;
    let mut occupied: HashMap<(i64, i64), u32> = HashMap::new();
    for p in &cloud.points {
        if p.v_dyn.abs() < params.dynamic_speed_threshold {
            continue;
        }
        let key = ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
        *occupied.entry(key).or_insert(0) += 1;
    }
    if occupied.is_empty() {
        return Vec::new();
    }

    // Component labels over the (optionally dilated) grid.
    let mut domain: HashSet<(i64, i64)> = occupied.keys().cloned().collect();
    if params.closing {
        for &(x, y) in occupied.keys() {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    domain.insert((x + dx, y + dy));
                }
            }
        }
    }
    let mut label: HashMap<(i64, i64), usize> = HashMap::new();
    let mut next = 0usize;
    let mut stack = Vec::new();
    let mut cells: Vec<(i64, i64)> = domain.iter().cloned().collect();
    cells.sort_unstable();
    for start in cells {
        if label.contains_key(&start) {
            continue;
        }
        let id = next;
        next += 1;
        stack.push(start);
        label.insert(start, id);
        while let Some((x, y)) = stack.pop() {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nb = (x + dx, y + dy);
                    if domain.contains(&nb) && !label.contains_key(&nb) {
                        label.insert(nb, id);
                        stack.push(nb);
                    }
                }
            }
        }
    }

    // Cell counts and per-component freshness from the original cells only.
    struct Comp {
        cells: usize,
        points: u32,
        newest: i32,
        fit: Option<(f64, f64, f64, f64)>,
    }
    let mut comps: BTreeMap<usize, Comp> = BTreeMap::new();
    for (&key, &count) in &occupied {
        let id = label[&key];
        let c = comps.entry(id).or_insert(Comp {
            cells: 0,
            points: 0,
            newest: i32::MIN,
            fit: None,
        });
        c.cells += 1;
        c.points += count;
    }
    for p in &cloud.points {
        if p.v_dyn.abs() < params.dynamic_speed_threshold {
            continue;
        }
        let key = ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
        let c = comps.get_mut(&label[&key]).expect("cell labeled above");
        c.newest = c.newest.max(p.frame_index);
    }
    for p in &cloud.points {
        if p.v_dyn.abs() < params.dynamic_speed_threshold {
            continue;
        }
        let key = ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
        let c = comps.get_mut(&label[&key]).expect("cell labeled above");
        if p.frame_index < c.newest - params.recent_frames {
            continue;
        }
        let f = c.fit.get_or_insert((p.x, p.y, p.x, p.y));
        f.0 = f.0.min(p.x);
        f.1 = f.1.min(p.y);
        f.2 = f.2.max(p.x);
        f.3 = f.3.max(p.y);
    }
    let mut boxes: Vec<BevBox> = comps
        .into_values()
        .filter(|c| c.cells >= params.min_cells)
        .map(|c| {
            let (x0, y0, x1, y1) = c.fit.expect("component has at least one point");
            let pad_x = ((params.min_box_extent - (x1 - x0)) / 2.0).max(0.0);
            let pad_y = (params.min_box_extent - (y1 - y0)).max(0.0);
            BevBox {
                min_x: x0 - pad_x,
                min_y: y0,
                max_x: x1 + pad_x,
                max_y: y1 + pad_y,
                score: c.points as f64,
            }
        })
        .collect();
    boxes.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    boxes
}

/// Axis-aligned hulls of the in-view moving-object boxes of frame `current`,
/// in that frame's ego coordinates.
pub fn gt_boxes(truth: &GroundTruth, current: usize) -> Result<Vec<BevBox>, EvalError> {
    let tf = truth.frames.get(current).ok_or(EvalError::UnknownFrame { frame: current })?;
    let inv = tf.ego_pose.inverse();
    Ok(tf
        .boxes
        .iter()
        .filter(|b| b.in_fov && b.speed != 0.0)
        .map(|b| {
            let mut min = (f64::INFINITY, f64::INFINITY);
            let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for c in b.corners() {
                let local = inv.apply(&Vec3::new(c[0], c[1], 0.0));
                min.0 = min.0.min(local.x);
                min.1 = min.1.min(local.y);
                max.0 = max.0.max(local.x);
                max.1 = max.1.max(local.y);
            }
            BevBox { min_x: min.0, min_y: min.1, max_x: max.0, max_y: max.1, score: 1.0 }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeBinAp {
    pub lo: f64,
    pub hi: f64,
    pub ap: f64,
    pub gt_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvalReport {
    /// Interpolated-precision integral of the PR curve.
    pub ap: f64,
    /// (recall, precision) after each detection, in score order.
    pub pr: Vec<(f64, f64)>,
    pub per_range: Vec<RangeBinAp>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub gt_count: usize,
}

fn ap_from_matches(matched: &[bool], gt_count: usize) -> (f64, Vec<(f64, f64)>) {
    if gt_count == 0 {
        return (if matched.is_empty() { 1.0 } else { 0.0 }, Vec::new());
    }
    let mut pr = Vec::with_capacity(matched.len());
    let mut tp = 0usize;
    for (i, &hit) in matched.iter().enumerate() {
        if hit {
            tp += 1;
        }
        pr.push((tp as f64 / gt_count as f64, tp as f64 / (i + 1) as f64));
    }
    // Precision envelope from the right, then the area under the resulting
    // step function.
    let mut env = pr.clone();
    let mut best: f64 = 0.0;
    for e in env.iter_mut().rev() {
        best = best.max(e.1);
        e.1 = best;
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for &(r, p) in &env {
        ap += (r - prev_r) * p;
        prev_r = r;
    }
    (ap, pr)
}

/// Match one frame and return (score, hit) per detection, best score first.
fn scored_matches(detections: &[BevBox], gt: &[BevBox], iou_threshold: f64) -> Vec<(f64, bool)> {
    let matched = greedy_match(detections, gt, iou_threshold);
    let mut scores: Vec<f64> = detections.iter().map(|d| d.score).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    scores.into_iter().zip(matched).collect()
}

fn greedy_match(detections: &[BevBox], gt: &[BevBox], iou_threshold: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .score
            .partial_cmp(&detections[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut taken = vec![false; gt.len()];
    let mut matched = vec![false; detections.len()];
    for (rank, &di) in order.iter().enumerate() {
        let mut best = -1.0;
        let mut best_g = None;
        for (gi, g) in gt.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let iou = bev_iou(&detections[di], g);
            if iou > best {
                best = iou;
                best_g = Some(gi);
            }
        }
        if let Some(gi) = best_g {
            if best >= iou_threshold {
                taken[gi] = true;
                matched[rank] = true;
            }
        }
    }
    matched
}

/// Score detections against ground-truth boxes: greedy one-to-one matching
/// in descending score order, PR curve, interpolated AP, plus AP split by
/// the range bin of each box center.
pub fn average_precision(
    detections: &[BevBox],
    gt: &[BevBox],
    iou_threshold: f64,
) -> Result<DetectionEvalReport, EvalError> {
    if !(0.0..1.0).contains(&iou_threshold) || iou_threshold <= 0.0 {
        return Err(EvalError::InvalidParameter(format!(
            "iou_threshold = {iou_threshold} outside (0, 1)"
        )));
    }
    let matched = greedy_match(detections, gt, iou_threshold);
    let (ap, pr) = ap_from_matches(&matched, gt.len());
    let tp = matched.iter().filter(|&&m| m).count();

    let range_of = |b: &BevBox| {
        let (cx, cy) = b.center();
        (cx * cx + cy * cy).sqrt()
    };
    let edges = RANGE_BIN_EDGES;
    let mut per_range = Vec::new();
    for w in edges.windows(2) {
        let in_bin = |b: &&BevBox| {
            let r = range_of(b);
            r >= w[0] && (r < w[1] || (w[1] == *edges.last().unwrap() && r >= w[1]))
        };
        let dets: Vec<BevBox> = detections.iter().filter(in_bin).cloned().collect();
        let gts: Vec<BevBox> = gt.iter().filter(in_bin).cloned().collect();
        let m = greedy_match(&dets, &gts, iou_threshold);
        let (bin_ap, _) = ap_from_matches(&m, gts.len());
        per_range.push(RangeBinAp { lo: w[0], hi: w[1], ap: bin_ap, gt_count: gts.len() });
    }

    Ok(DetectionEvalReport {
        ap,
        pr,
        per_range,
        true_positives: tp,
        false_positives: detections.len() - tp,
        gt_count: gt.len(),
    })
}

/// Pool detections over many frames: each frame's detections are matched
/// against that frame's own ground truth, then a single PR curve is built
/// over the union ranked by score. This is the multi-frame counterpart of
/// [`average_precision`] and reduces to it for a single pair.
pub fn pooled_average_precision(
    frames: &[(Vec<BevBox>, Vec<BevBox>)],
    iou_threshold: f64,
) -> Result<DetectionEvalReport, EvalError> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(EvalError::InvalidParameter(format!(
            "iou_threshold = {iou_threshold} outside (0, 1)"
        )));
    }
    let range_of = |b: &BevBox| {
        let (cx, cy) = b.center();
        (cx * cx + cy * cy).sqrt()
    };
    let edges = RANGE_BIN_EDGES;
    let nbins = edges.len() - 1;
    let mut pooled: Vec<(f64, bool)> = Vec::new();
    let mut gt_total = 0usize;
    let mut bin_pooled: Vec<Vec<(f64, bool)>> = vec![Vec::new(); nbins];
    let mut bin_gt = vec![0usize; nbins];
    for (dets, gts) in frames {
        pooled.extend(scored_matches(dets, gts, iou_threshold));
        gt_total += gts.len();
        for (bi, w) in edges.windows(2).enumerate() {
            let in_bin = |b: &&BevBox| {
                let r = range_of(b);
                r >= w[0] && (r < w[1] || (w[1] == *edges.last().unwrap() && r >= w[1]))
            };
            let d: Vec<BevBox> = dets.iter().filter(in_bin).cloned().collect();
            let g: Vec<BevBox> = gts.iter().filter(in_bin).cloned().collect();
            bin_pooled[bi].extend(scored_matches(&d, &g, iou_threshold));
            bin_gt[bi] += g.len();
        }
    }
    // Stable sort: equal scores keep frame order, so the curve is
    // deterministic.
    let sort_desc = |v: &mut Vec<(f64, bool)>| {
        v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal))
    };
    sort_desc(&mut pooled);
    let matched: Vec<bool> = pooled.iter().map(|&(_, m)| m).collect();
    let (ap, pr) = ap_from_matches(&matched, gt_total);
    let tp = matched.iter().filter(|&&m| m).count();
    let mut per_range = Vec::with_capacity(nbins);
    for (bi, w) in edges.windows(2).enumerate() {
        let mut v = std::mem::take(&mut bin_pooled[bi]);
        sort_desc(&mut v);
        let m: Vec<bool> = v.iter().map(|&(_, h)| h).collect();
        let (bin_ap, _) = ap_from_matches(&m, bin_gt[bi]);
        per_range.push(RangeBinAp { lo: w[0], hi: w[1], ap: bin_ap, gt_count: bin_gt[bi] });
    }
    Ok(DetectionEvalReport {
        ap,
        pr,
        per_range,
        true_positives: tp,
        false_positives: pooled.len() - tp,
        gt_count: gt_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{
        doppdrive_aggregate, fixed_duration_aggregate, standard_aggregate, AggregatedPoint,
        AggregationConfig, FrameRecord, PointSource,
    };
    use crate::doppler::{EgoState, EgoVelocity, RadarPoint};
    use crate::geometry::Pose2;
    use crate::heading::{
        build_table, HeadingDistribution, QuadratureSpec, DEFAULT_B_DEGREES,
        DEFAULT_RESOLUTION_DEGREES,
    };
    use crate::sim::{synthesize, EgoSegment, FieldOfView, NoiseSpec, ScenarioSpec, TruthFrame};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn test_config() -> AggregationConfig {
        let dist =
            HeadingDistribution::laplace(0.0, DEFAULT_B_DEGREES.to_radians()).unwrap();
        let table = build_table(
            &dist,
            DEFAULT_RESOLUTION_DEGREES.to_radians(),
            &QuadratureSpec::default(),
        )
        .unwrap();
        AggregationConfig::new(table)
    }

    /// Hand-built window: one object walking straight down +y toward a
    /// static ego, one point per frame, exact geometry and exact truth.
    fn radial_comb(
        n: usize,
        fps: f64,
        speed: f64,
        y_at_last: f64,
    ) -> (Vec<FrameRecord>, GroundTruth) {
        let t_last = (n - 1) as f64 / fps;
        let mut frames = Vec::new();
        let mut truth = GroundTruth::default();
        for j in 0..n {
            let t = j as f64 / fps;
            let y = y_at_last + speed * (t_last - t);
            let point = RadarPoint {
                position: crate::geometry::Vec3::new(0.0, y, 0.5),
                doppler: -speed,
                intensity: 7.0,
            };
            frames.push(FrameRecord {
                t,
                ego: EgoState { velocity: EgoVelocity::new(0.0, 0.0), yaw_rate: 0.0 },
                points: vec![point],
            });
            truth.frames.push(TruthFrame {
                t,
                ego_pose: Pose2::identity(),
                boxes: vec![],
                points: vec![TruthPoint {
                    object: Some(0),
                    v: -speed,
                    u: 0.0,
                    pos_world: crate::geometry::Vec3::new(0.0, y, 0.5),
                    vel_world: [0.0, -speed],
                    speed,
                    heading_rel_deg: 180.0,
                    range: y,
                }],
            });
        }
        (frames, truth)
    }

    #[test]
    fn standard_window_radial_spread_is_the_comb_std() {
        // 20 m/s closer over a 0.7 s, 15-frame window: residuals form the
        // comb {0, 1, ..., 14} m whose population std is sqrt(224/12).
        let (frames, truth) = radial_comb(15, 20.0, 20.0, 60.0);
        let mut cfg = test_config();
        cfg.baseline_window_seconds = 0.7;
        let out = standard_aggregate(&frames, &cfg).unwrap();
        assert_eq!(out.len(), 15);
        let rep = dispersion(&out, &truth, 14).unwrap();
        let expected = (224.0_f64 / 12.0).sqrt();
        assert_close(rep.radial_spread, expected, 1e-9);
        assert_close(rep.tangential_spread, 0.0, 1e-9);
        assert_eq!(rep.dynamic_count, 15);
    }

    #[test]
    fn doppdrive_radial_spread_vanishes() {
        let (frames, truth) = radial_comb(15, 20.0, 20.0, 60.0);
        let cfg = test_config();
        let out = doppdrive_aggregate(&frames, &cfg).unwrap();
        assert!(!out.is_empty());
        let rep = dispersion(&out, &truth, 14).unwrap();
        assert!(rep.radial_spread <= 1e-6, "{}", rep.radial_spread);
        assert!(rep.tangential_spread <= 1e-9);
        assert!(rep.mean_offset <= 1e-6);
        let obj = &rep.per_object[0];
        assert_eq!(obj.object, 0);
        assert_eq!(obj.count, rep.dynamic_count);
    }

    #[test]
    fn dispersion_static_scene_all_zero() {
        let spec = ScenarioSpec {
            duration: 0.5,
            fps: 10.0,
            ego_profile: vec![EgoSegment { duration: 0.5, speed: 15.0, yaw_rate: 0.0 }],
            objects: vec![],
            static_strips: vec![crate::sim::StaticStrip {
                start: [9.0, 5.0],
                end: [9.0, 90.0],
                density_per_meter: 0.5,
                z: 0.5,
            }],
            noise: NoiseSpec::zero(),
            field_of_view: FieldOfView { azimuth_deg: 60.0, max_range: 150.0 },
            seed: 4,
        };
        let (frames, truth) = synthesize(&spec).unwrap();
        let out = doppdrive_aggregate(&frames, &test_config()).unwrap();
        let rep = dispersion(&out, &truth, frames.len() - 1).unwrap();
        assert_eq!(rep.dynamic_count, 0);
        assert_eq!(rep.radial_spread, 0.0);
        assert_eq!(rep.tangential_spread, 0.0);
        assert_eq!(rep.mean_offset, 0.0);
        assert!(rep.per_object.is_empty());
    }

    #[test]
    fn dispersion_missing_truth_is_an_error() {
        let (frames, truth) = radial_comb(5, 10.0, 10.0, 40.0);
        let out = doppdrive_aggregate(&frames, &test_config()).unwrap();
        // Wrong current index: sources reach before frame 0.
        assert!(matches!(
            dispersion(&out, &truth, 1),
            Err(EvalError::MissingGroundTruth { .. })
        ));
        assert!(matches!(
            dispersion(&out, &truth, 99),
            Err(EvalError::UnknownFrame { frame: 99 })
        ));
    }

    #[test]
    fn elimination_zero_for_static_and_for_huge_tolerance() {
        let (frames, truth) = radial_comb(15, 20.0, 20.0, 60.0);
        let mut cfg = test_config();
        cfg.tolerance_d = 1e9;
        let cand = doppdrive_aggregate(&frames, &cfg).unwrap();
        let refr = fixed_duration_aggregate(&frames, &cfg).unwrap();
        let rep =
            elimination_stats(&cand, &refr, &truth, 14, &BinningSpec::default()).unwrap();
        assert_eq!(rep.overall_fraction(), 0.0);
        assert_eq!(rep.dynamic_total, 15);
        assert_eq!(rep.dynamic_kept, 15);
        for b in rep.by_velocity.iter().chain(&rep.by_range).chain(&rep.by_heading) {
            assert_eq!(b.eliminated, 0);
        }
    }

    #[test]
    fn elimination_counts_dropped_points_in_the_right_bins() {
        let (frames, truth) = radial_comb(15, 20.0, 20.0, 60.0);
        let mut cfg = test_config();
        cfg.tolerance_d = 0.02; // keeps only a short history
        let cand = doppdrive_aggregate(&frames, &cfg).unwrap();
        let refr = fixed_duration_aggregate(&frames, &cfg).unwrap();
        let rep =
            elimination_stats(&cand, &refr, &truth, 14, &BinningSpec::default()).unwrap();
        assert!(rep.overall_fraction() > 0.0);
        assert_eq!(rep.dynamic_total, 15);
        // |speed| = 20 lands in the [12, 24) bin; heading 180 in the last.
        assert_eq!(rep.by_velocity[1].total, 15);
        assert!(rep.by_velocity[1].eliminated > 0);
        assert_eq!(rep.by_heading[3].total, 15);
        // Fractions stay inside [0, 1].
        for b in rep.by_range.iter().chain(&rep.by_velocity).chain(&rep.by_heading) {
            let f = b.fraction();
            assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn elimination_monotone_in_tolerance() {
        let (frames, truth) = radial_comb(30, 20.0, 30.0, 80.0);
        let mut cfg = test_config();
        let refr = fixed_duration_aggregate(&frames, &cfg).unwrap();
        let mut last = f64::INFINITY;
        for d in [1.0, 2.0, 3.0, 4.0, 5.0] {
            cfg.tolerance_d = d;
            let cand = doppdrive_aggregate(&frames, &cfg).unwrap();
            let rep =
                elimination_stats(&cand, &refr, &truth, 29, &BinningSpec::default()).unwrap();
            assert!(rep.overall_fraction() <= last);
            last = rep.overall_fraction();
        }
    }

    #[test]
    fn elimination_window_mismatch() {
        let (frames, truth) = radial_comb(10, 20.0, 20.0, 60.0);
        let cfg = test_config();
        let cand = doppdrive_aggregate(&frames, &cfg).unwrap();
        let mut refr = fixed_duration_aggregate(&frames[5..], &cfg).unwrap();
        refr.sources.retain(|s| s.frame_index > -3);
        assert!(matches!(
            elimination_stats(&cand, &refr, &truth, 9, &BinningSpec::default()),
            Err(EvalError::WindowMismatch(_))
        ));
    }

    fn blob_cloud(blobs: &[(f64, f64, usize)], v: f64) -> AggregatedCloud {
        let mut cloud = AggregatedCloud::default();
        for &(cx, cy, n) in blobs {
            for i in 0..n {
                // Scatter deterministically over a 4 x 2 m footprint.
                let fx = (i % 8) as f64 / 8.0;
                let fy = (i / 8) as f64 / 4.0;
                cloud.points.push(AggregatedPoint {
                    x: cx - 2.0 + 4.0 * fx + 0.05,
                    y: cy - 1.0 + 2.0 * fy + 0.05,
                    z: 0.5,
                    v_dyn: v,
                    intensity: 10.0,
                    frame_index: 0,
                });
                cloud.sources.push(PointSource { frame_index: 0, index: cloud.points.len() as u32 });
            }
        }
        cloud
    }

    #[test]
    fn cluster_blob_examples() {
        let params = ClusterParams::default();
        assert!(cluster_detect(&AggregatedCloud::default(), &params).is_empty());

        let one = blob_cloud(&[(10.0, 50.0, 30)], 5.0);
        let boxes = cluster_detect(&one, &params);
        assert_eq!(boxes.len(), 1);
        let b = &boxes[0];
        // x span 3.5 m stays as fitted; y span 1.5 m grows away from the
        // sensor to the minimum depth.
        assert_close(b.min_x, 8.05, 1e-12);
        assert_close(b.max_x, 11.55, 1e-12);
        assert_close(b.min_y, 49.05, 1e-12);
        assert_close(b.max_y, 49.05 + params.min_box_extent, 1e-12);
        assert_eq!(b.score, 30.0);

        let two = blob_cloud(&[(10.0, 50.0, 30), (10.0, 60.0, 25)], 5.0);
        assert_eq!(cluster_detect(&two, &params).len(), 2);

        // Static points never cluster.
        let quiet = blob_cloud(&[(10.0, 50.0, 30)], 0.2);
        assert!(cluster_detect(&quiet, &params).is_empty());
    }

    #[test]
    fn closing_bridges_one_cell_gaps() {
        let mut cloud = AggregatedCloud::default();
        // Two 3-cell strips separated by one empty cell on the x axis.
        for &x in &[0.25, 0.75, 1.25, 2.75, 3.25, 3.75] {
            for i in 0..3 {
                cloud.points.push(AggregatedPoint {
                    x,
                    y: 20.25 + 0.01 * i as f64,
                    z: 0.0,
                    v_dyn: 3.0,
                    intensity: 1.0,
                    frame_index: 0,
                });
                cloud.sources.push(PointSource { frame_index: 0, index: 0 });
            }
        }
        let with =
            cluster_detect(&cloud, &ClusterParams { closing: true, ..ClusterParams::default() });
        assert_eq!(with.len(), 1, "{with:?}");
        let without = cluster_detect(&cloud, &ClusterParams::default());
        assert_eq!(without.len(), 2, "{without:?}");
    }

    #[test]
    fn boxes_anchor_to_newest_points() {
        // A connected smear whose oldest returns trail 10 m behind: the box
        // hugs the fresh end, the score still counts every member.
        let mut cloud = AggregatedCloud::default();
        for i in 0..=20 {
            cloud.points.push(AggregatedPoint {
                x: 5.0,
                y: 10.0 + 0.5 * i as f64,
                z: 0.0,
                v_dyn: 8.0,
                intensity: 1.0,
                frame_index: i - 20,
            });
            cloud.sources.push(PointSource { frame_index: i - 20, index: 0 });
        }
        let boxes = cluster_detect(&cloud, &ClusterParams::default());
        assert_eq!(boxes.len(), 1);
        let b = &boxes[0];
        assert_eq!(b.score, 21.0);
        // Only the newest return anchors the box; depth grows away from the
        // sensor, width symmetrically.
        assert_close(b.min_y, 20.0, 1e-12);
        assert_close(b.max_y, 23.0, 1e-12);
        assert_close(b.min_x, 3.5, 1e-12);
        assert_close(b.max_x, 6.5, 1e-12);
    }

    fn unit_box(x: f64, y: f64, score: f64) -> BevBox {
        BevBox { min_x: x, min_y: y, max_x: x + 4.0, max_y: y + 2.0, score }
    }

    #[test]
    fn average_precision_hand_cases() {
        let gt = vec![unit_box(0.0, 10.0, 1.0)];

        let perfect = vec![unit_box(0.0, 10.0, 0.9)];
        let rep = average_precision(&perfect, &gt, 0.1).unwrap();
        assert_close(rep.ap, 1.0, 1e-12);
        assert_eq!((rep.true_positives, rep.false_positives), (1, 0));

        let none: Vec<BevBox> = vec![];
        assert_close(average_precision(&none, &gt, 0.1).unwrap().ap, 0.0, 1e-12);

        // TP scored above FP: recall reaches 1 at precision 1.
        let tp_first = vec![unit_box(0.1, 10.0, 0.9), unit_box(50.0, 50.0, 0.2)];
        assert_close(average_precision(&tp_first, &gt, 0.1).unwrap().ap, 1.0, 1e-12);

        // FP scored above TP: the whole curve sits at precision 1/2.
        let fp_first = vec![unit_box(0.1, 10.0, 0.2), unit_box(50.0, 50.0, 0.9)];
        assert_close(average_precision(&fp_first, &gt, 0.1).unwrap().ap, 0.5, 1e-12);
    }

    #[test]
    fn duplicate_detections_stay_one_to_one() {
        let gt = vec![unit_box(0.0, 10.0, 1.0)];
        let dets = vec![unit_box(0.0, 10.0, 0.9), unit_box(0.2, 10.0, 0.8)];
        let rep = average_precision(&dets, &gt, 0.1).unwrap();
        assert_eq!((rep.true_positives, rep.false_positives), (1, 1));
        assert_close(rep.ap, 1.0, 1e-12);
    }

    #[test]
    fn per_range_bins_split_the_score() {
        let gt = vec![unit_box(0.0, 28.0, 1.0), unit_box(0.0, 100.0, 1.0)];
        let dets = vec![unit_box(0.0, 28.0, 0.9)];
        let rep = average_precision(&dets, &gt, 0.1).unwrap();
        assert_close(rep.per_range[0].ap, 1.0, 1e-12);
        assert_eq!(rep.per_range[0].gt_count, 1);
        assert_close(rep.per_range[2].ap, 0.0, 1e-12);
        assert_eq!(rep.per_range[2].gt_count, 1);
        assert_close(rep.ap, 0.5, 1e-12);
    }

    #[test]
    fn iou_threshold_validated() {
        assert!(average_precision(&[], &[], 0.0).is_err());
        assert!(average_precision(&[], &[], 1.0).is_err());
        assert!(average_precision(&[], &[], 0.1).is_ok());
    }

    #[test]
    fn pooled_ap_ranks_across_frames() {
        // Frame 1: one hit at score 0.9. Frame 2: one miss at score 0.95.
        // Pooled ranking puts the miss first, so precision never recovers to
        // 1: the curve is (0, 0), (0.5, 0.5) and the area is 0.25. A naive
        // mean of per-frame APs would say 0.5 instead.
        let f1 = (vec![unit_box(0.0, 10.0, 0.9)], vec![unit_box(0.0, 10.0, 1.0)]);
        let f2 = (vec![unit_box(60.0, 10.0, 0.95)], vec![unit_box(-60.0, 10.0, 1.0)]);
        let rep = pooled_average_precision(&[f1.clone(), f2], 0.1).unwrap();
        assert_close(rep.ap, 0.25, 1e-12);
        assert_eq!((rep.true_positives, rep.false_positives, rep.gt_count), (1, 1, 2));

        // A single pair reduces to the plain report.
        let plain = average_precision(&f1.0, &f1.1, 0.1).unwrap();
        let pooled = pooled_average_precision(std::slice::from_ref(&f1), 0.1).unwrap();
        assert_eq!(plain, pooled);
    }

    #[test]
    fn gt_boxes_are_axis_aligned_hulls_in_ego_frame() {
        let spec = ScenarioSpec {
            duration: 0.2,
            fps: 10.0,
            ego_profile: vec![EgoSegment { duration: 0.2, speed: 10.0, yaw_rate: 0.0 }],
            objects: vec![crate::sim::ObjectSpec {
                class: crate::sim::ObjectClass::Car,
                extent: Some([4.0, 2.0, 1.5]),
                position: [5.0, 50.0],
                speed: 10.0,
                heading: 0.5,
                points_per_frame: 5.0,
                allow_offscreen_spawn: false,
            }],
            static_strips: vec![],
            noise: NoiseSpec::zero(),
            field_of_view: FieldOfView { azimuth_deg: 60.0, max_range: 150.0 },
            seed: 2,
        };
        let (frames, truth) = synthesize(&spec).unwrap();
        let boxes = gt_boxes(&truth, frames.len() - 1).unwrap();
        assert_eq!(boxes.len(), 1);
        let b = &boxes[0];
        // The rotated 4 x 2 box hull must contain the raw extent and stay
        // within its diagonal.
        assert!(b.max_x - b.min_x >= 2.0 && b.max_x - b.min_x <= 4.5);
        assert!(b.max_y - b.min_y >= 2.0 && b.max_y - b.min_y <= 4.5);
        // Centered at the object's moved position relative to the moved ego:
        // object velocity 10 * (-sin 0.5, cos 0.5), ego straight at +10 m/s.
        let t_last = truth.frames.last().unwrap().t;
        let (cx, cy) = b.center();
        assert_close(cx, 5.0 - 10.0 * 0.5_f64.sin() * t_last, 0.02);
        assert_close(cy, 50.0 + 10.0 * 0.5_f64.cos() * t_last - 10.0 * t_last, 0.02);
    }
}
