//! Standalone SVG figures: scalogram heatmap, `S(b)` with detection markers,
//! and generic multi-line time plots. Each file carries a comment naming
//! the data it was drawn from.

use std::fmt::Write as _;

use crate::cwt::{Scalogram, TideBandFeature};
use crate::detector::{DetectionEvent, EventKind};

const W: f64 = 900.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace("--", "- -")
}

fn header(title: &str, source: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, "<!-- source: {} -->", escape(source));
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut x0, mut x1) = bounds(xs);
        let (mut y0, mut y1) = bounds(ys);
        if x1 <= x0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 <= y0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        Self { x0, x1, y0: y0 - pad, y1: y1 + pad }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }

    fn frame(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - LEFT - RIGHT,
            H - TOP - BOTTOM
        );
        for k in 0..=4 {
            let fx = self.x0 + (self.x1 - self.x0) * k as f64 / 4.0;
            let fy = self.y0 + (self.y1 - self.y0) * k as f64 / 4.0;
            let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, self.px(fx), H - BOTTOM + 16.0, tick(fx));
            let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 4.0, self.py(fy) + 4.0, tick(fy));
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 10.0, escape(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            escape(ylabel)
        );
    }
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e5) {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn polyline(out: &mut String, ax: &Axes, xs: &[f64], ys: &[f64], color: &str) {
    // Break the line at masked samples.
    let mut seg = String::new();
    let flush = |seg: &mut String, out: &mut String| {
        if !seg.is_empty() {
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, seg.trim_end());
            seg.clear();
        }
    };
    for (&x, &y) in xs.iter().zip(ys) {
        if x.is_finite() && y.is_finite() {
            let _ = write!(seg, "{:.2},{:.2} ", ax.px(x), ax.py(y));
        } else {
            flush(&mut seg, out);
        }
    }
    flush(&mut seg, out);
}

/// Magnitude heatmap, time on x and period (log scale, short at top) on y,
/// with the cone of influence shaded.
pub fn scalogram_svg(s: &Scalogram, source: &str) -> String {
    let mut out = header("CWT scalogram |W(a,b)|", source);
    let n = s.len();
    let rows = s.scales.len();
    if n == 0 || rows == 0 {
        out.push_str("</svg>\n");
        return out;
    }
    let hours = |c: usize| (s.time(c) - s.start) / 3600.0;
    let ax = Axes { x0: 0.0, x1: hours(n - 1).max(1e-9), y0: 0.0, y1: rows as f64 };
    let max = s.coeffs.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // Downsample columns to at most 600 cells.
    let step = n.div_ceil(600).max(1);
    let cw = (W - LEFT - RIGHT) / n.div_ceil(step) as f64;
    let ch = (H - TOP - BOTTOM) / rows as f64;
    for r in 0..rows {
        for (k, c) in (0..n).step_by(step).enumerate() {
            let v = (s.coeffs[r][c].norm() / max).sqrt();
            let (red, green, blue) = colormap(v);
            let alpha = if s.is_interior(r, c) { 1.0 } else { 0.45 };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({red},{green},{blue})" fill-opacity="{alpha}"/>"#,
                LEFT + k as f64 * cw,
                TOP + r as f64 * ch,
                cw + 0.3,
                ch + 0.3
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for k in 0..=4 {
        let fx = ax.x1 * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, ax.px(fx), H - BOTTOM + 16.0, tick(fx));
    }
    for r in (0..rows).step_by(rows.div_ceil(6).max(1)) {
        let period_min = 1.0 / s.pseudo_freqs[r] / 60.0;
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.0}</text>"#, LEFT - 4.0, TOP + (r as f64 + 0.5) * ch + 4.0, period_min);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">time (h)</text>"#, (LEFT + W - RIGHT) / 2.0, H - 10.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">period (min)</text>"#,
        (TOP + H - BOTTOM) / 2.0
    );
    out.push_str("</svg>\n");
    out
}

fn colormap(v: f64) -> (u8, u8, u8) {
    // Dark blue -> teal -> yellow.
    let v = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, t: f64| (a + (b - a) * t).round() as u8;
    if v < 0.5 {
        let t = v / 0.5;
        (lerp(20.0, 30.0, t), lerp(20.0, 150.0, t), lerp(90.0, 140.0, t))
    } else {
        let t = (v - 0.5) / 0.5;
        (lerp(30.0, 250.0, t), lerp(150.0, 230.0, t), lerp(140.0, 40.0, t))
    }
}

/// `S(b)` over time with high/low-water events as red circles and max-flow
/// events as black squares.
pub fn feature_svg(f: &TideBandFeature, events: &[DetectionEvent], source: &str) -> String {
    let mut out = header(&format!("Summed tide-band magnitude S(b) [{}]", f.provenance), source);
    let xs: Vec<f64> = (0..f.len()).map(|i| (f.time(i) - f.start) / 3600.0).collect();
    let ax = Axes::new(xs.iter().copied(), f.values.iter().copied());
    ax.frame(&mut out, "time (h)", "S(b)");
    polyline(&mut out, &ax, &xs, &f.values, "#1f4e9c");
    for e in events {
        let (x, y) = (ax.px((e.time - f.start) / 3600.0), ax.py(e.value));
        match e.kind {
            EventKind::HighLowWater => {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="none" stroke="red" stroke-width="2"/>"#);
            }
            EventKind::MaxFlow => {
                let _ = writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="black"/>"#, x - 5.0, y - 5.0);
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Named series sharing one time axis (seconds, shown in hours from `t0`).
pub fn lines_svg(title: &str, ylabel: &str, times: &[f64], series: &[(&str, &[f64])], source: &str) -> String {
    const COLORS: [&str; 6] = ["#1f4e9c", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];
    let mut out = header(title, source);
    let t0 = times.first().copied().unwrap_or(0.0);
    let xs: Vec<f64> = times.iter().map(|t| (t - t0) / 3600.0).collect();
    let ax = Axes::new(xs.iter().copied(), series.iter().flat_map(|(_, v)| v.iter().copied()));
    ax.frame(&mut out, "time (h)", ylabel);
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        polyline(&mut out, &ax, &xs, ys, color);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 16.0 + 14.0 * k as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}
