//! Scatter plots of the flow field: columns on X, flow coordinate on Y,
//! one colour per pathline over phase-shaded background bands.
//!
//! Output is plain SVG 1.1 built from `rect`, `circle`, `line` and `text`
//! only, with fixed number formatting so identical inputs give identical
//! bytes.

use std::fmt::Write as _;

use crate::flow::{Phase, PhaseSegment};
use crate::model::{y_to_pitch, FlowY, NoteEvent, Score, TimeIndex};
use crate::pathline::{Pathline, PathlineId};

/// Layer colours, keyed by pathline id modulo 8. The first four follow the
/// red / blue / green / purple of the usual layer illustrations.
pub const PALETTE: [&str; 8] = [
    "#d62728", // red
    "#1f77b4", // blue
    "#2ca02c", // green
    "#9467bd", // purple
    "#ff7f0e", // orange
    "#17becf", // teal
    "#8c564b", // brown
    "#e377c2", // pink
];

/// Fixed bounds of the printed pitch legend: C1 to B6.
pub const TABLE6_RANGE: (FlowY, FlowY) = (-24, 47);

pub fn layer_color(id: PathlineId) -> &'static str {
    PALETTE[id % PALETTE.len()]
}

pub fn phase_fill(label: Phase) -> &'static str {
    match label {
        Phase::Laminar => "#e3eefa",
        Phase::Transitional => "#fcf0d2",
        Phase::Turbulent => "#f9dcdc",
        Phase::Sparse => "#f0f0f0",
    }
}

fn phase_class(label: Phase) -> &'static str {
    match label {
        Phase::Laminar => "phase-laminar",
        Phase::Transitional => "phase-transitional",
        Phase::Turbulent => "phase-turbulent",
        Phase::Sparse => "phase-sparse",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YRange {
    /// Data extent padded by two semitones each way.
    Auto,
    /// The C1..B6 legend range, widened if data falls outside it.
    Table6,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub width: u32,
    pub height: u32,
    pub point_radius: f64,
    pub y_range: YRange,
    /// Columns between X-axis labels; widened in multiples to keep labels
    /// legible on long excerpts.
    pub x_tick_spacing: usize,
    pub y_tick_spacing: i32,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            width: 960,
            height: 540,
            point_radius: 3.5,
            y_range: YRange::Auto,
            x_tick_spacing: 8,
            y_tick_spacing: 12,
        }
    }
}

const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;
const MAX_X_LABELS: usize = 24;

/// Plotted Y bounds for the given events.
pub fn y_bounds(events: &[NoteEvent], mode: YRange) -> (FlowY, FlowY) {
    let lo = events.iter().map(NoteEvent::y).min();
    let hi = events.iter().map(NoteEvent::y).max();
    match (mode, lo, hi) {
        (YRange::Auto, Some(lo), Some(hi)) => (lo - 2, hi + 2),
        (YRange::Auto, _, _) => (-2, 14),
        (YRange::Table6, lo, hi) => (
            lo.map_or(TABLE6_RANGE.0, |l| l.min(TABLE6_RANGE.0)),
            hi.map_or(TABLE6_RANGE.1, |h| h.max(TABLE6_RANGE.1)),
        ),
    }
}

fn x_bounds(score: &Score) -> (TimeIndex, TimeIndex) {
    match (score.events().first(), score.events().last()) {
        (Some(a), Some(b)) => (a.onset, b.onset),
        _ => (0, score.tick_count().saturating_sub(1)),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn label_at(phases: &[PhaseSegment], t: TimeIndex) -> Option<Phase> {
    phases.iter().find(|s| s.contains(t)).map(|s| s.label)
}

struct Frame {
    x0: TimeIndex,
    columns: f64,
    y_lo: FlowY,
    y_hi: FlowY,
    left: f64,
    top: f64,
    plot_w: f64,
    plot_h: f64,
}

impl Frame {
    /// Centre of column `t`.
    fn sx(&self, t: f64) -> f64 {
        self.left + (t - self.x0 as f64 + 0.5) / self.columns * self.plot_w
    }

    fn sy(&self, y: f64) -> f64 {
        self.top + (f64::from(self.y_hi) - y) / f64::from(self.y_hi - self.y_lo) * self.plot_h
    }
}

pub fn emit_scatter_svg(
    score: &Score,
    pathlines: &[Pathline],
    phases: &[PhaseSegment],
    spec: &PlotSpec,
) -> String {
    let (x0, x1) = x_bounds(score);
    let (y_lo, y_hi) = y_bounds(score.events(), spec.y_range);
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let f = Frame {
        x0,
        columns: (x1 - x0 + 1) as f64,
        y_lo,
        y_hi,
        left: MARGIN_LEFT,
        top: MARGIN_TOP,
        plot_w: w - MARGIN_LEFT - MARGIN_RIGHT,
        plot_h: h - MARGIN_TOP - MARGIN_BOTTOM,
    };
    let bottom = f.top + f.plot_h;
    let right = f.left + f.plot_w;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##,
        spec.width, spec.height
    );
    let title = score.metadata().title().unwrap_or("flow field");
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22.00" font-family="sans-serif" font-size="14">{}</text>"#,
        f.left,
        escape(title)
    );

    for seg in phases {
        let lo = seg.start.max(x0);
        let hi = seg.end.min(x1 + 1);
        if lo >= hi {
            continue;
        }
        let xa = f.sx(lo as f64 - 0.5);
        let xb = f.sx(hi as f64 - 0.5);
        let _ = writeln!(
            out,
            r#"<rect class="phase {}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            phase_class(seg.label),
            xa,
            f.top,
            xb - xa,
            f.plot_h,
            phase_fill(seg.label)
        );
    }

    // Horizontal gridlines on octave boundaries; the zero line is darker.
    let step = spec.y_tick_spacing.max(1);
    let mut y = y_lo.div_euclid(step) * step;
    if y < y_lo {
        y += step;
    }
    while y <= y_hi {
        let py = f.sy(f64::from(y));
        let (class, stroke) = if y == 0 {
            ("zero", "#555555")
        } else {
            ("grid", "#cccccc")
        };
        let _ = writeln!(
            out,
            r#"<line class="{class}" x1="{:.2}" y1="{py:.2}" x2="{right:.2}" y2="{py:.2}" stroke="{stroke}" stroke-width="1"/>"#,
            f.left
        );
        let name = y_to_pitch(y).map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{y} {name}</text>"#,
            f.left - 6.0,
            py + 3.0
        );
        y += step;
    }

    let columns = x1 - x0 + 1;
    let mut x_step = spec.x_tick_spacing.max(1);
    while columns / x_step > MAX_X_LABELS {
        x_step += spec.x_tick_spacing.max(1);
    }
    let mut t = x0.div_ceil(x_step) * x_step;
    while t <= x1 {
        let px = f.sx(t as f64);
        let _ = writeln!(
            out,
            r##"<line class="tick" x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333333" stroke-width="1"/>"##,
            bottom + 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{t}</text>"#,
            bottom + 16.0
        );
        t += x_step;
    }

    let _ = writeln!(
        out,
        r##"<line class="axis" x1="{:.2}" y1="{bottom:.2}" x2="{right:.2}" y2="{bottom:.2}" stroke="#000000" stroke-width="1"/>"##,
        f.left
    );
    let _ = writeln!(
        out,
        r##"<line class="axis" x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{bottom:.2}" stroke="#000000" stroke-width="1"/>"##,
        f.left, f.top
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">timeline t</text>"#,
        f.left + f.plot_w / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14.00" y="{:.2}" font-family="sans-serif" font-size="12">y</text>"#,
        f.top + f.plot_h / 2.0
    );

    for p in pathlines {
        for e in &p.events {
            let class = label_at(phases, e.onset)
                .map(phase_class)
                .unwrap_or("phase-none");
            let _ = writeln!(
                out,
                r#"<circle class="pt layer-{} {class}" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}"/>"#,
                p.id,
                f.sx(e.onset as f64),
                f.sy(f64::from(e.y())),
                spec.point_radius,
                layer_color(p.id)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// The plotted points as `t,y,pitch,pathline_id,pressure,phase_label`.
pub fn emit_scatter_csv(
    _score: &Score,
    pathlines: &[Pathline],
    phases: &[PhaseSegment],
) -> Vec<u8> {
    let mut rows: Vec<(NoteEvent, PathlineId)> = pathlines
        .iter()
        .flat_map(|p| p.events.iter().map(move |e| (*e, p.id)))
        .collect();
    rows.sort_by(|a, b| a.0.canonical_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "y", "pitch", "pathline_id", "pressure", "phase_label"])
        .expect("writing to memory");
    for (e, id) in rows {
        w.write_record([
            e.onset.to_string(),
            e.y().to_string(),
            e.pitch.to_string(),
            id.to_string(),
            e.pressure.to_string(),
            label_at(phases, e.onset)
                .map(Phase::as_str)
                .unwrap_or("")
                .to_string(),
        ])
        .expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}
