// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal static SVG charts: line charts with error bars and bar charts.
//! Output depends only on the data, so plots are reproducible byte for byte.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One line of a line chart.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    /// `(x, y, half_width)`.
    pub points: Vec<(f64, f64, Option<f64>)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn num(x: f64) -> String {
    format!("{x:.2}")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut x0, mut x1) = bounds(xs);
        let (mut y0, mut y1) = bounds(ys);
        y0 = y0.min(0.0);
        y1 = y1.max(0.0);
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = (y1 - y0) * 0.05;
        Self { x0, x1, y0: y0 - pad, y1: y1 + pad }
    }

    fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn open(out: &mut String, title: &str, x_label: &str, y_label: &str, f: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        num(W / 2.0),
        esc(title)
    );
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        out,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    let zero = f.y(0.0);
    let _ = writeln!(
        out,
        r##"<line x1="{l}" y1="{}" x2="{r}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        num(zero),
        num(zero)
    );
    for i in 0..=4 {
        let v = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let y = f.y(v);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(l - 6.0),
            num(y + 4.0),
            super::tables::sig6((v * 1000.0).round() / 1000.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num((l + r) / 2.0),
        num(H - 18.0),
        esc(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        num((t + b) / 2.0),
        num((t + b) / 2.0),
        esc(y_label)
    );
}

/// Line chart with optional symmetric error bars.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let frame = Frame::new(
        all().map(|p| p.0),
        all().flat_map(|p| {
            let e = p.2.unwrap_or(0.0);
            [p.1 - e, p.1 + e]
        }),
    );
    let mut out = String::new();
    open(&mut out, title, x_label, y_label, &frame);
    let mut xs: Vec<f64> = all().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(frame.x(x)),
            num(H - BOTTOM + 16.0),
            super::tables::sig6(x)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = s
            .points
            .iter()
            .enumerate()
            .map(|(j, p)| {
                format!("{}{} {}", if j == 0 { "M" } else { "L" }, num(frame.x(p.0)), num(frame.y(p.1)))
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            d.join(" ")
        );
        for p in &s.points {
            let (cx, cy) = (frame.x(p.0), frame.y(p.1));
            if let Some(e) = p.2 {
                let _ = writeln!(
                    out,
                    r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="{color}"/>"#,
                    num(cx),
                    num(frame.y(p.1 - e)),
                    num(frame.y(p.1 + e))
                );
            }
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                num(cx),
                num(cy)
            );
        }
        let ly = TOP + 4.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            num(W - RIGHT - 150.0),
            num(ly),
            num(W - RIGHT - 135.0),
            num(ly + 9.0),
            esc(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart; `bars` is `(label, value, half_width)`.
pub fn bar_chart(title: &str, x_label: &str, y_label: &str, bars: &[(String, f64, Option<f64>)]) -> String {
    let n = bars.len().max(1) as f64;
    let frame = Frame::new(
        [0.0, n].into_iter(),
        bars.iter().flat_map(|b| {
            let e = b.2.unwrap_or(0.0);
            [b.1 - e, b.1 + e]
        }),
    );
    let mut out = String::new();
    open(&mut out, title, x_label, y_label, &frame);
    let slot = (W - LEFT - RIGHT) / n;
    let rotate = bars.len() > 12;
    for (i, (label, v, e)) in bars.iter().enumerate() {
        let x = LEFT + slot * i as f64;
        let (y_top, y_bot) = (frame.y(v.max(0.0)), frame.y(v.min(0.0)));
        let _ = writeln!(
            out,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#1f77b4"/>"##,
            num(x + slot * 0.1),
            num(y_top),
            num(slot * 0.8),
            num(y_bot - y_top)
        );
        if let Some(e) = e {
            let cx = x + slot / 2.0;
            let _ = writeln!(
                out,
                r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#,
                num(cx),
                num(frame.y(v - e)),
                num(frame.y(v + e))
            );
        }
        let lx = x + slot / 2.0;
        let ly = H - BOTTOM + 14.0;
        if rotate {
            let _ = writeln!(
                out,
                r#"<text x="{0}" y="{1}" text-anchor="end" font-size="9" transform="rotate(-60 {0} {1})">{2}</text>"#,
                num(lx),
                num(ly),
                esc(label)
            );
        } else {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                num(lx),
                num(ly),
                esc(label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
