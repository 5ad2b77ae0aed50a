//! Minimal SVG rendering for the plot subcommand: accuracy-vs-lambda
//! curves, ITS bar charts, and alignment heatmaps. Hand-written XML keeps
//! the output deterministic and dependency-free.

use std::fmt::Write;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{x}" y="28" font-family="monospace" font-size="16" text-anchor="middle">{title}</text>
"##,
        x = WIDTH / 2.0,
        title = escape(title),
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    y0: f64, // bottom-left in svg coordinates
    w: f64,
    h: f64,
    x_min: f64,
    x_max: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64) -> Self {
        Self {
            x0: MARGIN_LEFT,
            y0: HEIGHT - MARGIN_BOTTOM,
            w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            h: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
            x_min,
            x_max,
        }
    }

    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(1e-12);
        self.x0 + (v - self.x_min) / span * self.w
    }

    /// y maps accuracy in [0, 1].
    fn y(&self, v: f64) -> f64 {
        self.y0 - v.clamp(0.0, 1.0) * self.h
    }
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, x_ticks: &[f64]) {
    let _ = write!(
        out,
        r##"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>
<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{yt}" stroke="black"/>
"##,
        x0 = frame.x0,
        y0 = frame.y0,
        x1 = frame.x0 + frame.w,
        yt = frame.y0 - frame.h,
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = frame.y(v);
        let _ = write!(
            out,
            r##"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#dddddd"/>
<text x="{tx}" y="{ty}" font-family="monospace" font-size="11" text-anchor="end">{v:.1}</text>
"##,
            x0 = frame.x0,
            x1 = frame.x0 + frame.w,
            tx = frame.x0 - 8.0,
            ty = y + 4.0,
        );
    }
    for &t in x_ticks {
        let x = frame.x(t);
        let _ = write!(
            out,
            r##"<line x1="{x}" y1="{y0}" x2="{x}" y2="{y1}" stroke="black"/>
<text x="{x}" y="{ty}" font-family="monospace" font-size="10" text-anchor="middle">{t}</text>
"##,
            y0 = frame.y0,
            y1 = frame.y0 + 5.0,
            ty = frame.y0 + 18.0,
        );
    }
    let _ = write!(
        out,
        r##"<text x="{x}" y="{y}" font-family="monospace" font-size="12" text-anchor="middle">{label}</text>
<text x="18" y="{my}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 18 {my})">accuracy</text>
"##,
        x = frame.x0 + frame.w / 2.0,
        y = HEIGHT - 18.0,
        label = escape(x_label),
        my = frame.y0 - frame.h / 2.0,
    );
}

/// Accuracy-vs-lambda curve with an optional dashed baseline.
pub fn sweep_chart(title: &str, points: &[(f64, f64)], baseline: Option<f64>) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let x_min = points.first().map_or(0.0, |p| p.0);
    let x_max = points.last().map_or(1.0, |p| p.0);
    let frame = Frame::new(x_min, x_max);
    let ticks: Vec<f64> = vec![x_min, 0.1, 0.3, 0.5, 0.7, 0.9, x_max]
        .into_iter()
        .filter(|t| (x_min..=x_max).contains(t))
        .collect();
    axes(&mut out, &frame, "lambda", &ticks);

    if let Some(b) = baseline {
        let y = frame.y(b);
        let _ = write!(
            out,
            r##"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#888888" stroke-dasharray="6 4"/>
<text x="{x1}" y="{ty}" font-family="monospace" font-size="11" text-anchor="end" fill="#555555">baseline {b:.3}</text>
"##,
            x0 = frame.x0,
            x1 = frame.x0 + frame.w,
            ty = y - 6.0,
        );
    }

    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
        .collect();
    let _ = write!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>
"##,
        path.join(" ")
    );
    for &(x, y) in points {
        let _ = write!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>
"##,
            frame.x(x),
            frame.y(y)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Labeled accuracy bars (per-lambda plus baseline and aggregated entries).
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let frame = Frame::new(0.0, 1.0);
    axes(&mut out, &frame, "", &[]);

    let n = bars.len().max(1) as f64;
    let slot = frame.w / n;
    let bar_w = (slot * 0.7).min(48.0);
    for (i, (label, value)) in bars.iter().enumerate() {
        let cx = frame.x0 + slot * (i as f64 + 0.5);
        let y = frame.y(*value);
        let color = match label.as_str() {
            "baseline" => "#888888",
            "ITS" => "#d62728",
            _ => "#1f77b4",
        };
        let _ = write!(
            out,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{color}"/>
<text x="{cx:.2}" y="{ly}" font-family="monospace" font-size="9" text-anchor="middle" transform="rotate(-45 {cx:.2} {ly})">{label}</text>
"##,
            x = cx - bar_w / 2.0,
            h = frame.y0 - y,
            ly = frame.y0 + 14.0,
            label = escape(label),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Diverging color for values in [-1, 1]: blue, through white, to red.
fn heat_color(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v < 0.0 {
        let t = v + 1.0; // 0 at -1, 1 at 0
        (59.0 + (255.0 - 59.0) * t, 76.0 + (255.0 - 76.0) * t, 192.0 + (255.0 - 192.0) * t)
    } else {
        let t = v; // 0 at 0, 1 at +1
        (255.0 + (180.0 - 255.0) * t, 255.0 + (4.0 - 255.0) * t, 255.0 + (38.0 - 255.0) * t)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// Layer-by-layer alignment heatmap with per-cell values.
pub fn heatmap_chart(title: &str, entries: &[Vec<f64>]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let rows = entries.len();
    let cols = entries.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        out.push_str("</svg>\n");
        return out;
    }
    let frame = Frame::new(0.0, 1.0);
    let cell_w = frame.w / cols as f64;
    let cell_h = frame.h / rows as f64;
    let cell = cell_w.min(cell_h);
    let grid_w = cell * cols as f64;
    let grid_h = cell * rows as f64;
    let x0 = frame.x0 + (frame.w - grid_w) / 2.0;
    let y0 = MARGIN_TOP + (frame.h - grid_h) / 2.0;

    for (i, row) in entries.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let x = x0 + cell * j as f64;
            let y = y0 + cell * i as f64;
            let _ = write!(
                out,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{color}" stroke="#ffffff" stroke-width="0.5"/>
"##,
                color = heat_color(v),
            );
            if cell >= 26.0 {
                let _ = write!(
                    out,
                    r##"<text x="{tx:.2}" y="{ty:.2}" font-family="monospace" font-size="9" text-anchor="middle">{v:.2}</text>
"##,
                    tx = x + cell / 2.0,
                    ty = y + cell / 2.0 + 3.0,
                );
            }
        }
    }
    for i in 0..rows {
        let _ = write!(
            out,
            r##"<text x="{x:.2}" y="{y:.2}" font-family="monospace" font-size="10" text-anchor="end">{i}</text>
"##,
            x = x0 - 6.0,
            y = y0 + cell * (i as f64 + 0.5) + 3.0,
        );
    }
    for j in 0..cols {
        let _ = write!(
            out,
            r##"<text x="{x:.2}" y="{y:.2}" font-family="monospace" font-size="10" text-anchor="middle">{j}</text>
"##,
            x = x0 + cell * (j as f64 + 0.5),
            y = y0 + grid_h + 14.0,
        );
    }
    out.push_str("</svg>\n");
    out
}
