//! Static SVG rendering of a log trace and its analysis.
//!
//! The output is a pure function of the inputs: no timestamps, no random
//! identifiers, fixed float formatting. Identical analyses therefore
//! produce byte-identical documents, which keeps golden-file tests and
//! artifact diffs meaningful.

use std::fmt::Write as _;

use votdr_core::analysis::{EventKind, LogTrace};

use crate::report::ReportDoc;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;
/// Above this many points the polyline is decimated per pixel column,
/// keeping each column's extremes so peaks and dropouts stay visible.
const MAX_RAW_POINTS: usize = 2_000;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, z_m: f64) -> f64 {
        let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        MARGIN_LEFT + (z_m - self.x_min) / (self.x_max - self.x_min) * w
    }

    fn y(&self, v_db: f64) -> f64 {
        let h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        MARGIN_TOP + (self.y_max - v_db) / (self.y_max - self.y_min) * h
    }
}

pub fn render_svg(log: &LogTrace, report: &ReportDoc) -> String {
    let points: Vec<(f64, f64)> = (0..log.n_bins())
        .filter(|&k| log.is_valid(k))
        .map(|k| (log.distance_m(k), log.values_db[k]))
        .collect();

    let frame = frame_for(&points, report);
    let mut svg = String::with_capacity(16 * 1024);
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    );
    let _ = write!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );

    draw_axes(&mut svg, &frame);

    if !points.is_empty() {
        draw_trace(&mut svg, &frame, &points);
        draw_fit(&mut svg, &frame, report);
        draw_noise_floor(&mut svg, &frame, report);
        draw_events(&mut svg, &frame, report);
    }

    svg.push_str("</svg>\n");
    svg
}

fn frame_for(points: &[(f64, f64)], report: &ReportDoc) -> Frame {
    if points.is_empty() {
        return Frame {
            x_min: 0.0,
            x_max: 1_000.0,
            y_min: -50.0,
            y_max: 5.0,
        };
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for &(x, y) in points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    // Keep the analysis lines in view when they are sane.
    if report.rms_noise_db.is_finite() {
        y_min = y_min.min(report.rms_noise_db);
    }
    if report.intercept_db.is_finite() {
        y_max = y_max.max(report.intercept_db);
    }
    let x_pad = 0.02 * (x_max - x_min).max(1.0);
    let y_pad = 0.05 * (y_max - y_min).max(1.0);
    Frame {
        x_min: x_min - x_pad,
        x_max: x_max + x_pad,
        y_min: y_min - y_pad,
        y_max: y_max + y_pad,
    }
}

fn draw_axes(svg: &mut String, f: &Frame) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = MARGIN_TOP;
    let y1 = HEIGHT - MARGIN_BOTTOM;
    let _ = write!(
        svg,
        "<rect x=\"{x0}\" y=\"{y0}\" width=\"{:.3}\" height=\"{:.3}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        x1 - x0,
        y1 - y0
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let zx = f.x_min + t * (f.x_max - f.x_min);
        let px = f.x(zx);
        let _ = write!(
            svg,
            "<line x1=\"{px:.3}\" y1=\"{y1:.3}\" x2=\"{px:.3}\" y2=\"{:.3}\" stroke=\"black\"/>\n",
            y1 + 5.0
        );
        let _ = write!(
            svg,
            "<text x=\"{px:.3}\" y=\"{:.3}\" text-anchor=\"middle\">{:.2}</text>\n",
            y1 + 20.0,
            zx / 1_000.0
        );

        let vy = f.y_min + t * (f.y_max - f.y_min);
        let py = f.y(vy);
        let _ = write!(
            svg,
            "<line x1=\"{:.3}\" y1=\"{py:.3}\" x2=\"{x0:.3}\" y2=\"{py:.3}\" stroke=\"black\"/>\n",
            x0 - 5.0
        );
        let _ = write!(
            svg,
            "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"end\">{vy:.2}</text>\n",
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"middle\">distance / km</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = write!(
        svg,
        "<text x=\"14\" y=\"{:.3}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 14 {:.3})\">5 log10(N/N0) / dB</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
}

fn draw_trace(svg: &mut String, f: &Frame, points: &[(f64, f64)]) {
    let reduced = decimate(points);
    let mut path = String::with_capacity(reduced.len() * 16);
    for (i, &(z, v)) in reduced.iter().enumerate() {
        let sep = if i == 0 { "" } else { " " };
        let _ = write!(path, "{sep}{:.3},{:.3}", f.x(z), f.y(v));
    }
    let _ = write!(
        svg,
        "<polyline points=\"{path}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1\"/>\n"
    );
}

/// Per-pixel-column min/max reduction; order inside a column follows the
/// original sample order so the polyline never doubles back in x.
fn decimate(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_RAW_POINTS {
        return points.to_vec();
    }
    let columns = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) as usize;
    let per_column = points.len().div_ceil(columns);
    let mut out = Vec::with_capacity(2 * columns);
    for chunk in points.chunks(per_column) {
        let mut lo = 0;
        let mut hi = 0;
        for (i, &(_, v)) in chunk.iter().enumerate() {
            if v < chunk[lo].1 {
                lo = i;
            }
            if v > chunk[hi].1 {
                hi = i;
            }
        }
        let (first, second) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push(chunk[first]);
        if second != first {
            out.push(chunk[second]);
        }
    }
    out
}

fn draw_fit(svg: &mut String, f: &Frame, report: &ReportDoc) {
    if !(report.slope_db_per_km.is_finite() && report.intercept_db.is_finite()) {
        return;
    }
    let value = |z_m: f64| report.intercept_db + report.slope_db_per_km * z_m / 1_000.0;
    let _ = write!(
        svg,
        "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" \
         stroke=\"crimson\" stroke-width=\"1\" stroke-dasharray=\"6 3\"/>\n",
        f.x(f.x_min),
        f.y(value(f.x_min).clamp(f.y_min, f.y_max)),
        f.x(f.x_max),
        f.y(value(f.x_max).clamp(f.y_min, f.y_max)),
    );
}

fn draw_noise_floor(svg: &mut String, f: &Frame, report: &ReportDoc) {
    if !report.rms_noise_db.is_finite() {
        return;
    }
    let py = f.y(report.rms_noise_db);
    let _ = write!(
        svg,
        "<line x1=\"{:.3}\" y1=\"{py:.3}\" x2=\"{:.3}\" y2=\"{py:.3}\" \
         stroke=\"gray\" stroke-width=\"1\" stroke-dasharray=\"2 3\"/>\n",
        f.x(f.x_min),
        f.x(f.x_max),
    );
    let _ = write!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\" fill=\"gray\">rms {:.2} dB</text>\n",
        f.x(f.x_min) + 6.0,
        py - 5.0,
        report.rms_noise_db
    );
}

fn draw_events(svg: &mut String, f: &Frame, report: &ReportDoc) {
    for (i, ev) in report.events.iter().enumerate() {
        let px = f.x(ev.position_m.clamp(f.x_min, f.x_max));
        let (tag, color) = match ev.kind {
            EventKind::Reflective => ("R", "darkorange"),
            EventKind::Lossy => ("L", "purple"),
        };
        let _ = write!(
            svg,
            "<line class=\"event\" x1=\"{px:.3}\" y1=\"{MARGIN_TOP}\" x2=\"{px:.3}\" \
             y2=\"{:.3}\" stroke=\"{color}\" stroke-dasharray=\"4 4\"/>\n",
            HEIGHT - MARGIN_BOTTOM
        );
        // Stagger label rows so markers near each other stay readable.
        let _ = write!(
            svg,
            "<text x=\"{:.3}\" y=\"{:.3}\" fill=\"{color}\">{tag} {:.2} m ({:.2} dB)</text>\n",
            px + 4.0,
            MARGIN_TOP + 14.0 + (i % 4) as f64 * 14.0,
            ev.position_m,
            ev.magnitude_db
        );
    }
}
