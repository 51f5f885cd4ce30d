//! `doppdrive` — synthesize radar scenes, aggregate them with
//! Doppler-compensated sliding windows, score the results against ground
//! truth, and render reports as SVG.
//!
//! Exit codes are a stable contract:
//!   0 success, 2 input/format error, 3 ego-velocity estimation failure,
//!   4 frame alignment error.
//!
//! The environment variable `DOPPDRIVE_SEED` overrides the seed found in a
//! scenario or run config, so CI can pin reproductions without editing
//! files.

mod svg;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use doppdrive_core::aggregate::{
    doppdrive_aggregate, fixed_duration_aggregate, single_frame, standard_aggregate, FrameBuffer,
    FrameRecord,
};
use doppdrive_core::doppler::{estimate_ego_velocity, EgoVelocity, EstimatorParams};
use doppdrive_core::eval::{
    cluster_detect, elimination_stats, gt_boxes, pooled_average_precision, BinningSpec,
    ClusterParams, DispersionReport, DispersionAccumulator, DetectionEvalReport,
    EliminationReport, EvalError,
};
use doppdrive_core::heading::{build_table, HeadingDistribution, QuadratureSpec};
use doppdrive_core::io::{
    atomic_write, load_run_config, load_scenario, read_aggregated, read_frames, read_table,
    read_truth, write_aggregated, write_frames, write_table, write_truth, AggregatedFrame,
    AggregationMode, EgoVelocitySource, IoError, ReportTable,
};
use doppdrive_core::sim::{synthesize, GroundTruth, SimError};

// ─── Failure classification ───

/// An error already formatted for the terminal, tagged with the process
/// exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn estimation(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }

    fn alignment(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<doppdrive_core::aggregate::AggregateError> for Failure {
    fn from(e: doppdrive_core::aggregate::AggregateError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<doppdrive_core::heading::HeadingError> for Failure {
    fn from(e: doppdrive_core::heading::HeadingError) -> Self {
        Failure::input(e.to_string())
    }
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::InvalidParameter(_) => Failure::input(e.to_string()),
        _ => Failure::alignment(e.to_string()),
    }
}

// ─── Command line ───

#[derive(Parser)]
#[command(
    name = "doppdrive",
    version,
    about = "Doppler-driven temporal aggregation of radar point clouds",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a scenario into a frame file and a ground-truth file.
    Simulate(SimulateArgs),
    /// Slide an aggregation window over a frame file.
    Aggregate(AggregateArgs),
    /// Score aggregated clouds against ground truth.
    Eval(EvalArgs),
    /// Render a BEV scatter or metric bar charts as SVG.
    Plot(PlotArgs),
    /// Export the heading-geometry lookup table g(theta).
    Lut(LutArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario description (TOML; angles in degrees).
    #[arg(long)]
    scenario: PathBuf,
    /// Output frame file (one frame per line).
    #[arg(long)]
    out: PathBuf,
    /// Output ground-truth file.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct AggregateArgs {
    /// Input frame file.
    #[arg(long)]
    frames: PathBuf,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's mode: none, standard, doppdrive, or
    /// fixed_duration.
    #[arg(long)]
    mode: Option<String>,
    /// Output aggregated-cloud file (one window per input frame).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Aggregated-cloud file; repeatable. The first is the candidate, and
    /// elimination is counted against each later file in turn.
    #[arg(long = "agg", required = true)]
    agg: Vec<PathBuf>,
    /// Ground-truth file from the same scenario.
    #[arg(long)]
    truth: PathBuf,
    /// Report table (CSV); a plain-text summary lands next to it as .txt.
    #[arg(long)]
    out: PathBuf,
    /// BEV IoU threshold for detection matching.
    #[arg(long, default_value_t = 0.1)]
    iou: f64,
}

#[derive(Args)]
struct PlotArgs {
    /// Report table from `eval` — renders bar charts per metric.
    #[arg(long, conflicts_with_all = ["frames", "agg", "frame_index"])]
    report: Option<PathBuf>,
    /// Frame file for the raw-scan underlay of a BEV scatter.
    #[arg(long, requires = "agg", requires = "frame_index")]
    frames: Option<PathBuf>,
    /// Aggregated-cloud file to scatter.
    #[arg(long, requires = "frames")]
    agg: Option<PathBuf>,
    /// Which aggregated record to draw.
    #[arg(long)]
    frame_index: Option<usize>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LutArgs {
    /// Laplace location, degrees.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Laplace scale, degrees.
    #[arg(long, default_value_t = 3.1)]
    b: f64,
    /// Grid step, degrees.
    #[arg(long, default_value_t = 0.1)]
    resolution: f64,
    /// Output table path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Aggregate(a) => run_aggregate(a),
        Command::Eval(a) => run_eval(a),
        Command::Plot(a) => run_plot(a),
        Command::Lut(a) => run_lut(a),
    };
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            std::process::ExitCode::from(f.code)
        }
    }
}

fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var("DOPPDRIVE_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Failure::input(format!("DOPPDRIVE_SEED = {v:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Failure::input(format!("DOPPDRIVE_SEED: {e}"))),
    }
}

// ─── simulate ───

fn run_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let mut spec = load_scenario(&a.scenario)?;
    if let Some(seed) = seed_override()? {
        spec.seed = seed;
    }
    let (frames, truth) = synthesize(&spec)?;
    write_frames(&a.out, &frames)?;
    write_truth(&a.truth, &truth)?;
    let points: usize = frames.iter().map(|f| f.points.len()).sum();
    println!(
        "wrote {} frames / {} points to {}; truth to {}",
        frames.len(),
        points,
        a.out.display(),
        a.truth.display()
    );
    Ok(())
}

// ─── aggregate ───

/// Replace each frame's metadata velocity with an estimate fitted to its own
/// returns. The previous frame's result seeds the next fit, so a frame
/// without consensus can still ride the prior; the first frame has no such
/// net. Yaw rate stays from metadata — a single sensor's Doppler field does
/// not observe rotation about its own origin.
fn estimate_track(frames: &mut [FrameRecord], seed: u64) -> Result<(), Failure> {
    let params = EstimatorParams::default();
    let mut prior: Option<EgoVelocity> = None;
    for (j, frame) in frames.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64 + 1);
        let est = estimate_ego_velocity(&frame.points, prior, &params, &mut rng)
            .map_err(|e| Failure::estimation(format!("frame {j} (t = {}): {e}", frame.t)))?;
        frame.ego.velocity = est.velocity;
        prior = Some(est.velocity);
    }
    Ok(())
}

fn run_aggregate(a: &AggregateArgs) -> Result<(), Failure> {
    let mut cfg = load_run_config(&a.config)?;
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    let mode = match &a.mode {
        Some(text) => text.parse::<AggregationMode>().map_err(Failure::input)?,
        None => cfg.mode,
    };
    let mut frames = read_frames(&a.frames)?;
    if cfg.ego_velocity_source == EgoVelocitySource::Estimate {
        estimate_track(&mut frames, cfg.seed)?;
    }
    let agg_cfg = cfg.to_aggregation_config();
    let mut buffer = FrameBuffer::new(agg_cfg.window_seconds);
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        let t = frame.t;
        buffer.push_frame(frame)?;
        let window = buffer.frames();
        let cloud = match mode {
            AggregationMode::None => single_frame(window, &agg_cfg),
            AggregationMode::Standard => standard_aggregate(window, &agg_cfg),
            AggregationMode::Doppdrive => doppdrive_aggregate(window, &agg_cfg),
            AggregationMode::FixedDuration => fixed_duration_aggregate(window, &agg_cfg),
        }?;
        out.push(AggregatedFrame { t, cloud });
    }
    write_aggregated(&a.out, &out)?;
    println!("aggregated {} windows (mode {}) to {}", out.len(), mode.as_str(), a.out.display());
    Ok(())
}

// ─── eval ───

struct LoadedAgg {
    label: String,
    frames: Vec<AggregatedFrame>,
    /// Truth frame index for each record.
    truth_idx: Vec<usize>,
}

fn load_agg_aligned(path: &PathBuf, truth: &GroundTruth) -> Result<LoadedAgg, Failure> {
    let frames = read_aggregated(path)?;
    let mut truth_idx = Vec::with_capacity(frames.len());
    for (i, af) in frames.iter().enumerate() {
        if af.cloud.sources.len() != af.cloud.points.len() {
            return Err(Failure::alignment(format!(
                "{} record {i}: missing per-point provenance",
                path.display()
            )));
        }
        let k = truth
            .frames
            .iter()
            .position(|tf| (tf.t - af.t).abs() <= 1e-9)
            .ok_or_else(|| {
                Failure::alignment(format!(
                    "{} record {i} (t = {}) matches no truth frame",
                    path.display(),
                    af.t
                ))
            })?;
        truth_idx.push(k);
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(LoadedAgg { label, frames, truth_idx })
}

/// Elimination pooled over every window, or None when the candidate keeps
/// points the reference lacks (the pair is then not candidate-vs-reference).
fn pooled_elimination(
    cand: &LoadedAgg,
    reference: &LoadedAgg,
    truth: &GroundTruth,
) -> Result<Option<EliminationReport>, Failure> {
    let bins = BinningSpec::default();
    let mut pooled: Option<EliminationReport> = None;
    for ((ca, ra), &k) in cand.frames.iter().zip(&reference.frames).zip(&cand.truth_idx) {
        match elimination_stats(&ca.cloud, &ra.cloud, truth, k, &bins) {
            Ok(rep) => match &mut pooled {
                None => pooled = Some(rep),
                Some(p) => p.absorb(&rep),
            },
            Err(EvalError::WindowMismatch(_)) => return Ok(None),
            Err(e) => return Err(eval_failure(e)),
        }
    }
    Ok(pooled)
}

fn bin_label(lo: f64, hi: f64) -> String {
    format!("{}-{}", lo, hi)
}

fn push_dispersion_rows(table: &mut ReportTable, label: &str, rep: &DispersionReport) {
    let m = |name: &str| format!("{label}.{name}");
    table.push(m("mean_offset"), "", rep.mean_offset);
    table.push(m("radial_spread"), "", rep.radial_spread);
    table.push(m("tangential_spread"), "", rep.tangential_spread);
    table.push(m("dynamic_count"), "", rep.dynamic_count as f64);
    for (bi, count) in rep.offset_histogram.iter().enumerate() {
        let lo = bi as f64 * rep.offset_hist_bin_width;
        table.push(m("offset_histogram"), format!("{lo:.2}"), *count as f64);
    }
}

fn push_detection_rows(table: &mut ReportTable, label: &str, det: &DetectionEvalReport) {
    let m = |name: &str| format!("{label}.{name}");
    table.push(m("ap"), "all", det.ap);
    for rb in &det.per_range {
        table.push(m("ap"), bin_label(rb.lo, rb.hi), rb.ap);
    }
}

fn push_elimination_rows(table: &mut ReportTable, label: &str, rep: &EliminationReport) {
    let m = |name: &str| format!("{label}.{name}");
    table.push(m("elimination"), "overall", rep.overall_fraction());
    for (prefix, bins) in [
        ("elimination_by_range", &rep.by_range),
        ("elimination_by_velocity", &rep.by_velocity),
        ("elimination_by_heading", &rep.by_heading),
    ] {
        for b in bins {
            table.push(m(prefix), bin_label(b.lo, b.hi), b.fraction());
        }
    }
}

fn run_eval(a: &EvalArgs) -> Result<(), Failure> {
    let truth = read_truth(&a.truth)?;
    let moving =
        truth.frames.iter().flat_map(|f| &f.boxes).any(|b| b.in_fov && b.speed != 0.0);
    let labelled = truth.frames.iter().flat_map(|f| &f.points).any(|p| p.object.is_some());
    if moving && !labelled {
        return Err(Failure::alignment(
            "truth has moving boxes but no object-labelled points; \
             dispersion and elimination are undefined",
        ));
    }

    let mut loaded = Vec::with_capacity(a.agg.len());
    for path in &a.agg {
        loaded.push(load_agg_aligned(path, &truth)?);
    }
    // Keep labels unique when stems collide.
    for i in 0..loaded.len() {
        let n = loaded[..i].iter().filter(|l| l.label == loaded[i].label).count();
        if n > 0 {
            loaded[i].label = format!("{}#{}", loaded[i].label, n + 1);
        }
    }

    let mut table = ReportTable::default();
    let mut doc = String::new();
    let _ = writeln!(doc, "evaluation against {}", a.truth.display());
    let cluster = ClusterParams::default();

    for l in &loaded {
        let mut disp = DispersionAccumulator::new();
        let mut pairs = Vec::with_capacity(l.frames.len());
        for (af, &k) in l.frames.iter().zip(&l.truth_idx) {
            disp.add_window(&af.cloud, &truth, k).map_err(eval_failure)?;
            let dets = cluster_detect(&af.cloud, &cluster);
            let gts = gt_boxes(&truth, k).map_err(eval_failure)?;
            pairs.push((dets, gts));
        }
        let rep = disp.report();
        let det = pooled_average_precision(&pairs, a.iou).map_err(eval_failure)?;

        push_dispersion_rows(&mut table, &l.label, &rep);
        push_detection_rows(&mut table, &l.label, &det);

        let _ = writeln!(doc, "\n[{}] {} windows", l.label, l.frames.len());
        let _ = writeln!(
            doc,
            "  dynamic points {}: mean offset {:.4} m, radial spread {:.4} m, \
             tangential spread {:.4} m",
            rep.dynamic_count, rep.mean_offset, rep.radial_spread, rep.tangential_spread
        );
        let _ = writeln!(
            doc,
            "  detection: AP(IoU {:.2}) = {:.4} over {} ground-truth boxes \
             ({} TP / {} FP)",
            a.iou, det.ap, det.gt_count, det.true_positives, det.false_positives
        );
        for rb in &det.per_range {
            let _ = writeln!(
                doc,
                "    range {:>7}: AP {:.4} ({} boxes)",
                bin_label(rb.lo, rb.hi),
                rb.ap,
                rb.gt_count
            );
        }
    }

    if loaded.len() >= 2 {
        let (cand, refs) = loaded.split_first().expect("len checked");
        for rf in refs {
            if rf.truth_idx != cand.truth_idx {
                return Err(Failure::alignment(format!(
                    "{} and {} cover different frames",
                    cand.label, rf.label
                )));
            }
            match pooled_elimination(cand, rf, &truth)? {
                Some(rep) => {
                    let label = format!("{}_vs_{}", cand.label, rf.label);
                    push_elimination_rows(&mut table, &label, &rep);
                    let _ = writeln!(
                        doc,
                        "\n[{label}] eliminated {:.4} of {} dynamic points",
                        rep.overall_fraction(),
                        rep.dynamic_total
                    );
                    for (name, bins) in [
                        ("range", &rep.by_range),
                        ("velocity", &rep.by_velocity),
                        ("heading", &rep.by_heading),
                    ] {
                        let cells: Vec<String> = bins
                            .iter()
                            .map(|b| format!("{} {:.3}", bin_label(b.lo, b.hi), b.fraction()))
                            .collect();
                        let _ = writeln!(doc, "  by {name}: {}", cells.join("  "));
                    }
                }
                None => {
                    let _ = writeln!(
                        doc,
                        "\nelimination vs {}: skipped (candidate keeps points \
                         outside the reference)",
                        rf.label
                    );
                }
            }
        }
    }

    write_table(&a.out, &table)?;
    let doc_path = a.out.with_extension("txt");
    atomic_write(&doc_path, doc.as_bytes())?;
    println!("report table {}; summary {}", a.out.display(), doc_path.display());
    Ok(())
}

// ─── plot ───

fn run_plot(a: &PlotArgs) -> Result<(), Failure> {
    let svg_text = match (&a.report, &a.frames, &a.agg, a.frame_index) {
        (Some(report), None, None, None) => plot_report(report)?,
        (None, Some(frames), Some(agg), Some(idx)) => plot_bev(frames, agg, idx)?,
        _ => {
            return Err(Failure::input(
                "pass either --report, or --frames with --agg and --frame-index",
            ))
        }
    };
    atomic_write(&a.out, svg_text.as_bytes())?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn plot_report(path: &PathBuf) -> Result<String, Failure> {
    let table = read_table(path)?;
    // One panel per metric, in first-appearance order.
    let mut groups: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    for (metric, bin, value) in &table.rows {
        let slot = match groups.iter_mut().find(|(name, _)| name == metric) {
            Some((_, bars)) => bars,
            None => {
                groups.push((metric.clone(), Vec::new()));
                &mut groups.last_mut().expect("just pushed").1
            }
        };
        let label = if bin.is_empty() { metric.clone() } else { bin.clone() };
        slot.push((label, *value));
    }
    let title = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(svg::bar_charts(&title, &groups))
}

fn plot_bev(frames_path: &PathBuf, agg_path: &PathBuf, idx: usize) -> Result<String, Failure> {
    let frames = read_frames(frames_path)?;
    let agg = read_aggregated(agg_path)?;
    let record = agg.get(idx).ok_or_else(|| {
        Failure::input(format!(
            "--frame-index {idx} out of range ({} records in {})",
            agg.len(),
            agg_path.display()
        ))
    })?;
    let raw = frames
        .iter()
        .find(|f| (f.t - record.t).abs() <= 1e-9)
        .ok_or_else(|| {
            Failure::input(format!(
                "no frame with t = {} in {}",
                record.t,
                frames_path.display()
            ))
        })?;

    let params = ClusterParams::default();
    let mut points = Vec::with_capacity(raw.points.len() + record.cloud.points.len());
    for p in &raw.points {
        points.push(svg::BevPoint { x: p.position.x, y: p.position.y, kind: svg::PointKind::Raw });
    }
    for p in &record.cloud.points {
        let kind = if p.v_dyn.abs() >= params.dynamic_speed_threshold {
            svg::PointKind::Dynamic
        } else {
            svg::PointKind::Static
        };
        points.push(svg::BevPoint { x: p.x, y: p.y, kind });
    }
    let boxes: Vec<svg::Box2> = cluster_detect(&record.cloud, &params)
        .into_iter()
        .map(|b| svg::Box2 { min_x: b.min_x, min_y: b.min_y, max_x: b.max_x, max_y: b.max_y })
        .collect();
    let title = format!("window {idx} at t = {:.2} s ({} points)", record.t, record.cloud.len());
    Ok(svg::bev_scatter(&title, &points, &boxes))
}

// ─── lut ───

fn run_lut(a: &LutArgs) -> Result<(), Failure> {
    let dist = HeadingDistribution::laplace(a.mu.to_radians(), a.b.to_radians())?;
    let table = build_table(&dist, a.resolution.to_radians(), &QuadratureSpec::default())?;
    let mut bytes = Vec::new();
    table
        .export(&mut bytes)
        .map_err(|e| Failure::input(format!("serializing table: {e}")))?;
    atomic_write(&a.out, &bytes)?;
    println!("wrote {} rows to {}", table.len(), a.out.display());
    Ok(())
}
