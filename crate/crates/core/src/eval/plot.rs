//! Minimal SVG output: heatmaps of frames and peak maps, RMSE line plots.

use std::fmt::Write as _;

const STOPS: [(f32, [u8; 3]); 5] = [
    (0.0, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn colour(t: f32) -> String {
    let t = t.clamp(0.0, 1.0);
    let i = STOPS.iter().position(|s| s.0 >= t).unwrap_or(STOPS.len() - 1).max(1);
    let (a, b) = (STOPS[i - 1], STOPS[i]);
    let w = (t - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|k| (a.1[k] as f32 + w * (b.1[k] as f32 - a.1[k] as f32)).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Row-major `h x w` grid as coloured cells; NaN cells are drawn grey.
pub fn heatmap_svg(grid: &[f32], h: usize, w: usize, title: &str) -> String {
    let cell = (480 / w.max(h).max(1)).max(2);
    let (lo, hi) = grid.iter().filter(|v| v.is_finite()).fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (width, height) = (w * cell + 120, h * cell + 40);
    let mut s = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">"#);
    let _ = write!(s, r#"<text x="4" y="16" font-size="13" font-family="sans-serif">{}</text>"#, escape(title));
    for r in 0..h {
        for c in 0..w {
            let v = grid[r * w + c];
            let fill = if v.is_finite() { colour((v - lo) / span) } else { "#dddddd".into() };
            let _ = write!(s, r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{fill}"/>"#, c * cell, 24 + r * cell);
        }
    }
    let bar_x = w * cell + 16;
    for k in 0..=20 {
        let t = 1.0 - k as f32 / 20.0;
        let _ = write!(s, r#"<rect x="{bar_x}" y="{}" width="14" height="{}" fill="{}"/>"#, 24 + k * h * cell / 21, h * cell / 21 + 1, colour(t));
    }
    if lo.is_finite() {
        let _ = write!(s, r#"<text x="{}" y="32" font-size="11" font-family="sans-serif">{hi:.4e}</text>"#, bar_x + 18);
        let _ = write!(s, r#"<text x="{}" y="{}" font-size="11" font-family="sans-serif">{lo:.4e}</text>"#, bar_x + 18, 24 + h * cell);
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

pub fn line_plot_svg(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let (w, h, left, top) = (640.0, 360.0, 70.0, 30.0);
    let (pw, ph) = (w - left - 150.0, h - top - 50.0);
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0).max(2);
    let ymax = series.iter().flat_map(|s| &s.values).copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let ymax = if ymax > 0.0 { ymax * 1.05 } else { 1.0 };
    let mut s = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif">"#);
    let _ = write!(s, r#"<text x="{left}" y="18" font-size="13">{}</text>"#, escape(title));
    let _ = write!(s, r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    let _ = write!(s, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, left + pw / 2.0 - 20.0, top + ph + 34.0, escape(x_label));
    let _ = write!(s, r#"<text x="8" y="{}" font-size="11">{}</text>"#, top + ph / 2.0, escape(y_label));
    let _ = write!(s, r#"<text x="{}" y="{}" font-size="10">{ymax:.3e}</text>"#, 4.0, top + 8.0);
    let _ = write!(s, r#"<text x="{}" y="{}" font-size="10">{}</text>"#, left + pw - 10.0, top + ph + 14.0, n - 1);
    for (k, ser) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, v)| format!("{:.2},{:.2}", left + pw * i as f64 / (n - 1) as f64, top + ph * (1.0 - v / ymax)))
            .collect();
        let _ = write!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = top + 14.0 + 16.0 * k as f64;
        let _ = write!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#, left + pw + 10.0, left + pw + 30.0);
        let _ = write!(s, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, left + pw + 34.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}
