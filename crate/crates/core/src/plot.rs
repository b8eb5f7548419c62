//! Minimal SVG charts: index curves over `k` and the 2-D feature embedding.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub name: &'a str,
    /// `(x, y)` points; `None` values break the line.
    pub points: Vec<(f64, Option<f64>)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        Frame { x: span(&mut xs.clone()), y: span(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(svg: &mut String, title: &str, f: &Frame) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<polyline points="{l},{t} {l},{b} {r},{b}" fill="none" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<text x="{l}" y="{}" text-anchor="middle">{:.3}</text>"#, b + 16.0, f.x.0);
    let _ = writeln!(svg, r#"<text x="{r}" y="{}" text-anchor="middle">{:.3}</text>"#, b + 16.0, f.x.1);
    let _ = writeln!(svg, r#"<text x="{}" y="{b}" text-anchor="end">{:.3}</text>"#, l - 4.0, f.y.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, l - 4.0, t + 4.0, f.y.1);
}

/// Line chart of several series with an optional dotted vertical marker.
pub fn line_chart(title: &str, series: &[Series<'_>], marker: Option<f64>) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().filter_map(|p| p.1));
    let f = Frame::fit(xs.chain(marker), ys);
    let mut svg = String::new();
    open(&mut svg, title, &f);

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for run in s.points.split(|p| p.1.is_none()).filter(|r| !r.is_empty()) {
            let pts: Vec<String> = run
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y.unwrap_or_default())))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 90.0,
            MARGIN + 14.0 * (i as f64 + 1.0),
            escape(s.name)
        );
    }
    if let Some(k) = marker {
        let x = f.px(k);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{}" stroke="gray" stroke-dasharray="2,3"/>"#,
            HEIGHT - MARGIN
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of embedded features; medoids are drawn larger and labelled.
pub fn embedding_scatter(title: &str, coords: &[(f64, f64)], assignment: &[usize], medoids: &[usize], names: &[String]) -> String {
    let f = Frame::fit(coords.iter().map(|c| c.0), coords.iter().map(|c| c.1));
    let mut svg = String::new();
    open(&mut svg, title, &f);
    for (i, &(x, y)) in coords.iter().enumerate() {
        let color = PALETTE[assignment.get(i).copied().unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.6"/>"#, f.px(x), f.py(y));
    }
    for &m in medoids {
        let (x, y) = coords[m];
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="black" stroke-width="2"/>"#,
            f.px(x),
            f.py(y)
        );
        if let Some(name) = names.get(m) {
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, f.px(x) + 8.0, f.py(y) - 8.0, escape(name));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
