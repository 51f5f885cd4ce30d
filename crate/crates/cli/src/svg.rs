//! Hand-rolled SVG emission for bird's-eye-view scatters and metric bar
//! charts. The output is a few hundred primitive elements at most, so there
//! is no drawing dependency: strings in, strings out, deterministic.

use std::fmt::Write;

const WIDTH: f64 = 760.0;
const BEV_HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 44.0;

const COLOR_DYNAMIC: &str = "#1f6fd0";
const COLOR_STATIC: &str = "#e0851f";
const COLOR_RAW: &str = "#bbbbbb";
const COLOR_BOX: &str = "#d6409f";
const COLOR_AXIS: &str = "#444444";
const COLOR_GRID: &str = "#dddddd";
const COLOR_TEXT: &str = "#333333";
const COLOR_BAR: &str = "#4a7db5";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    /// Unprocessed scan underlay.
    Raw,
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy)]
pub struct BevPoint {
    pub x: f64,
    pub y: f64,
    pub kind: PointKind,
}

#[derive(Debug, Clone, Copy)]
pub struct Box2 {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Largest of 1, 2, 5 times a power of ten that yields at most `target`
/// ticks over `span`.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = (span / target).max(1e-12);
    let mag = 10f64.powf(raw.log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if m * mag >= raw {
            return m * mag;
        }
    }
    10.0 * mag
}

fn fmt_tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e6 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

struct Frame {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
    scale: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.min_x) * self.scale
    }

    /// World y points forward; screen y points down.
    fn sy(&self, y: f64) -> f64 {
        MARGIN_T + (self.max_y - y) * self.scale
    }
}

fn world_frame(points: &[BevPoint], boxes: &[Box2]) -> Frame {
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for p in points {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    for b in boxes {
        min_x = min_x.min(b.min_x);
        max_x = max_x.max(b.max_x);
        min_y = min_y.min(b.min_y);
        max_y = max_y.max(b.max_y);
    }
    if !(min_x.is_finite() && max_x.is_finite()) {
        // Empty scene: a plausible forward-facing viewport.
        min_x = -50.0;
        max_x = 50.0;
        min_y = 0.0;
        max_y = 100.0;
    }
    let pad_x = ((max_x - min_x) * 0.05).max(2.0);
    let pad_y = ((max_y - min_y) * 0.05).max(2.0);
    min_x -= pad_x;
    max_x += pad_x;
    min_y -= pad_y;
    max_y += pad_y;
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = BEV_HEIGHT - MARGIN_T - MARGIN_B;
    // Equal aspect so ranges are not distorted.
    let scale = (plot_w / (max_x - min_x)).min(plot_h / (max_y - min_y));
    Frame { min_x, max_x, min_y, max_y, scale }
}

fn push_axes(svg: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let x0 = f.sx(f.min_x);
    let x1 = f.sx(f.max_x);
    let y0 = f.sy(f.min_y);
    let y1 = f.sy(f.max_y);
    let step = nice_step((f.max_x - f.min_x).max(f.max_y - f.min_y), 8.0);

    let mut tx = (f.min_x / step).ceil() * step;
    while tx <= f.max_x + 1e-9 {
        let sx = f.sx(tx);
        let _ = writeln!(
            svg,
            "<line x1=\"{sx:.1}\" y1=\"{y1:.1}\" x2=\"{sx:.1}\" y2=\"{y0:.1}\" stroke=\"{COLOR_GRID}\" stroke-width=\"0.5\"/>\
             <text x=\"{sx:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" fill=\"{COLOR_TEXT}\">{}</text>",
            y0 + 16.0,
            fmt_tick(tx)
        );
        tx += step;
    }
    let mut ty = (f.min_y / step).ceil() * step;
    while ty <= f.max_y + 1e-9 {
        let sy = f.sy(ty);
        let _ = writeln!(
            svg,
            "<line x1=\"{x0:.1}\" y1=\"{sy:.1}\" x2=\"{x1:.1}\" y2=\"{sy:.1}\" stroke=\"{COLOR_GRID}\" stroke-width=\"0.5\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" fill=\"{COLOR_TEXT}\">{}</text>",
            x0 - 6.0,
            sy + 4.0,
            fmt_tick(ty)
        );
        ty += step;
    }
    let _ = writeln!(
        svg,
        "<line class=\"axis\" x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\" stroke=\"{COLOR_AXIS}\" stroke-width=\"1.2\"/>\
         <line class=\"axis\" x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\" stroke=\"{COLOR_AXIS}\" stroke-width=\"1.2\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" fill=\"{COLOR_TEXT}\">{}</text>",
        (x0 + x1) / 2.0,
        y0 + 34.0,
        esc(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 {:.1} {:.1})\" fill=\"{COLOR_TEXT}\">{}</text>",
        x0 - 40.0,
        (y0 + y1) / 2.0,
        x0 - 40.0,
        (y0 + y1) / 2.0,
        esc(y_label)
    );
}

/// Bird's-eye-view scatter: raw scan underlay in gray, aggregated static
/// points orange, dynamic points blue, detection boxes outlined on top.
pub fn bev_scatter(title: &str, points: &[BevPoint], boxes: &[Box2]) -> String {
    let f = world_frame(points, boxes);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{BEV_HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {BEV_HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{BEV_HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\" fill=\"{COLOR_TEXT}\">{}</text>",
        WIDTH / 2.0,
        esc(title)
    );
    push_axes(&mut svg, &f, "x [m] (right)", "y [m] (forward)");

    // Raw first so the aggregate draws over it.
    for pass in [PointKind::Raw, PointKind::Static, PointKind::Dynamic] {
        for p in points.iter().filter(|p| p.kind == pass) {
            let (class, fill, r) = match pass {
                PointKind::Raw => ("pt-raw", COLOR_RAW, 1.0),
                PointKind::Static => ("pt-static", COLOR_STATIC, 1.6),
                PointKind::Dynamic => ("pt-dyn", COLOR_DYNAMIC, 1.6),
            };
            let _ = writeln!(
                svg,
                "<circle class=\"{class}\" cx=\"{:.1}\" cy=\"{:.1}\" r=\"{r}\" fill=\"{fill}\"/>",
                f.sx(p.x),
                f.sy(p.y)
            );
        }
    }
    for b in boxes {
        let _ = writeln!(
            svg,
            "<rect class=\"det-box\" x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
             fill=\"none\" stroke=\"{COLOR_BOX}\" stroke-width=\"1.5\"/>",
            f.sx(b.min_x),
            f.sy(b.max_y),
            (b.max_x - b.min_x) * f.scale,
            (b.max_y - b.min_y) * f.scale
        );
    }
    svg.push_str("</svg>\n");
    svg
}

const GROUP_H: f64 = 190.0;
const GROUP_GAP: f64 = 26.0;

/// One bar panel per metric group, stacked vertically in a single SVG.
pub fn bar_charts(title: &str, groups: &[(String, Vec<(String, f64)>)]) -> String {
    let height = MARGIN_T + groups.len() as f64 * (GROUP_H + GROUP_GAP) + 10.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {WIDTH} {height:.0}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{height:.0}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\" fill=\"{COLOR_TEXT}\">{}</text>",
        WIDTH / 2.0,
        esc(title)
    );

    for (gi, (name, bars)) in groups.iter().enumerate() {
        let top = MARGIN_T + gi as f64 * (GROUP_H + GROUP_GAP);
        let plot_top = top + 24.0;
        let plot_bottom = top + GROUP_H - 22.0;
        let plot_h = plot_bottom - plot_top;
        let x0 = MARGIN_L;
        let x1 = WIDTH - MARGIN_R;

        let _ = writeln!(
            svg,
            "<text x=\"{x0}\" y=\"{:.1}\" font-size=\"12\" fill=\"{COLOR_TEXT}\">{}</text>",
            top + 14.0,
            esc(name)
        );

        let lo = bars.iter().map(|b| b.1).fold(0.0f64, f64::min);
        let hi = bars.iter().map(|b| b.1).fold(0.0f64, f64::max);
        let span = (hi - lo).max(1e-12);
        let vy = |v: f64| plot_bottom - (v - lo) / span * plot_h;
        let base = vy(0.0);

        let _ = writeln!(
            svg,
            "<line class=\"axis\" x1=\"{x0}\" y1=\"{base:.1}\" x2=\"{x1}\" y2=\"{base:.1}\" \
             stroke=\"{COLOR_AXIS}\" stroke-width=\"1\"/>"
        );

        let n = bars.len().max(1) as f64;
        let slot = (x1 - x0) / n;
        let bar_w = (slot * 0.6).min(90.0);
        for (bi, (label, value)) in bars.iter().enumerate() {
            let cx = x0 + (bi as f64 + 0.5) * slot;
            let vy_v = vy(*value);
            let (y, h) = if *value >= 0.0 { (vy_v, base - vy_v) } else { (base, vy_v - base) };
            let _ = writeln!(
                svg,
                "<rect class=\"bar\" x=\"{:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{:.1}\" fill=\"{COLOR_BAR}\"/>",
                cx - bar_w / 2.0,
                h.max(0.0)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{cx:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\" fill=\"{COLOR_TEXT}\">{:.3}</text>",
                (if *value >= 0.0 { vy_v - 4.0 } else { vy_v + 12.0 }),
                value
            );
            let _ = writeln!(
                svg,
                "<text x=\"{cx:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\" fill=\"{COLOR_TEXT}\">{}</text>",
                plot_bottom + 14.0,
                esc(label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
