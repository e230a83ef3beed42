//! Minimal SVG plots drawn from report series. Rendering only reads the
//! report; it never touches the data files.

use std::fmt::Write as _;

use rydex::experiments::ExperimentReport;
use rydex::observables::ObservableSeries;

use crate::output::stem;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Curve {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub points: bool,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * hi.abs().max(1e-300) {
        let pad = if hi == 0.0 { 1.0 } else { 0.5 * hi.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>
"#,
            (LEFT + W - RIGHT) / 2.0,
            esc(title)
        );
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(out, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
        for t in ticks(self.x.0, self.x.1) {
            let p = self.px(t);
            let _ = writeln!(out, r#"<line x1="{p:.2}" y1="{y1}" x2="{p:.2}" y2="{}" stroke="black"/><text x="{p:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 5.0, y1 + 18.0, label(t));
        }
        for t in ticks(self.y.0, self.y.1) {
            let p = self.py(t);
            let _ = writeln!(out, r#"<line x1="{}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 5.0, x0 - 8.0, p + 4.0, label(t));
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, esc(xlabel));
        let _ = writeln!(out, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0, esc(ylabel));
    }
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, curves: &[Curve]) -> String {
    let frame = Frame {
        x: range(curves.iter().flat_map(|c| c.xs.iter().copied())),
        y: range(curves.iter().flat_map(|c| c.ys.iter().copied())),
    };
    let mut out = String::new();
    frame.axes(&mut out, title, xlabel, ylabel);
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = c.xs.iter().zip(&c.ys).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(&x, &y)| (frame.px(x), frame.py(y))).collect();
        if c.points {
            for (x, y) in &pts {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
            }
        } else if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 10.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#, lx + 18.0, lx + 24.0, ly + 4.0, esc(&c.label));
    }
    out.push_str("</svg>\n");
    out
}

fn color(v: f64) -> String {
    // Dark blue through teal to yellow.
    const STOPS: [(f64, [f64; 3]); 4] = [(0.0, [68.0, 1.0, 84.0]), (0.33, [49.0, 104.0, 142.0]), (0.66, [53.0, 183.0, 121.0]), (1.0, [253.0, 231.0, 37.0])];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let k = STOPS.iter().position(|s| s.0 >= v).unwrap_or(3).max(1);
    let (a, b) = (STOPS[k - 1], STOPS[k]);
    let f = (v - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|i| (a.1[i] + f * (b.1[i] - a.1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// `rows[y][x]` drawn with `x` across and `y` up; the extents give the
/// coordinates of the first and last cell centres.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, xs: (f64, f64), ys: (f64, f64), rows: &[Vec<f64>]) -> String {
    let ny = rows.len().max(1);
    let nx = rows.first().map_or(1, Vec::len).max(1);
    let half = |(a, b): (f64, f64), n: usize| {
        let d = if n > 1 { (b - a) / (n - 1) as f64 / 2.0 } else { 0.5 };
        (a - d, b + d)
    };
    let frame = Frame { x: half(xs, nx), y: half(ys, ny) };
    let (lo, hi) = range(rows.iter().flatten().copied());
    let mut out = String::new();
    frame.axes(&mut out, title, xlabel, ylabel);
    let cw = (W - LEFT - RIGHT) / nx as f64;
    let ch = (H - TOP - BOTTOM) / ny as f64;
    for (j, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            let x = LEFT + i as f64 * cw;
            let y = H - BOTTOM - (j + 1) as f64 * ch;
            let _ = writeln!(out, r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#, cw + 0.3, ch + 0.3, color((v - lo) / (hi - lo)));
        }
    }
    let bx = W - RIGHT + 20.0;
    for k in 0..50 {
        let f = k as f64 / 49.0;
        let y = H - BOTTOM - f * (H - TOP - BOTTOM);
        let _ = writeln!(out, r#"<rect x="{bx}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#, y - (H - TOP - BOTTOM) / 49.0, (H - TOP - BOTTOM) / 49.0 + 0.3, color(f));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text><text x="{}" y="{}">{}</text>"#, bx + 20.0, H - BOTTOM, label(lo), bx + 20.0, TOP + 10.0, label(hi));
    out.push_str("</svg>\n");
    out
}

pub fn bars(title: &str, xlabel: &str, xs: &[f64], heights: &[f64], curves: &[Curve]) -> String {
    let width = xs.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
    let width = if width.is_finite() { 0.8 * width } else { 0.8 };
    let (xlo, xhi) = range(xs.iter().copied());
    let (_, yhi) = range(heights.iter().chain(curves.iter().flat_map(|c| c.ys.iter())).copied());
    let frame = Frame { x: (xlo - width, xhi + width), y: (0.0, yhi.max(1e-300) * 1.05) };
    let mut out = String::new();
    frame.axes(&mut out, title, xlabel, "probability");
    for (&x, &h) in xs.iter().zip(heights) {
        if !h.is_finite() {
            continue;
        }
        let (l, r) = (frame.px(x - width / 2.0), frame.px(x + width / 2.0));
        let (top, base) = (frame.py(h.max(0.0)), frame.py(0.0));
        let _ = writeln!(out, r##"<rect x="{l:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#bbbbbb"/>"##, r - l, base - top);
    }
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[(k + 1) % PALETTE.len()];
        let pts: Vec<String> = c.xs.iter().zip(&c.ys).filter(|(_, y)| y.is_finite()).map(|(&x, &y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 10.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#, lx + 18.0, lx + 24.0, ly + 4.0, esc(&c.label));
    }
    out.push_str("</svg>\n");
    out
}

fn is_line_series(s: &ObservableSeries) -> bool {
    matches!(s.shape.as_slice(), [k] if *k <= 4) && s.times.len() > 1
}

fn render_series(s: &ObservableSeries) -> Option<String> {
    let last = s.values.last()?;
    let t_last = *s.times.last()?;
    match s.shape.as_slice() {
        [_] if is_line_series(s) => {
            let curves: Vec<Curve> = (0..s.shape[0])
                .map(|c| Curve { label: format!("column {c}"), xs: s.times.clone(), ys: s.column(c), points: false })
                .collect();
            Some(line_plot(&s.name, "t (us)", &s.note, &curves))
        }
        [n] if s.times.len() > 1 => Some(heatmap(&s.name, "index", "t (us)", (0.0, (*n - 1) as f64), (s.times[0], t_last), &s.values)),
        [n] => {
            let xs: Vec<f64> = (0..*n).map(|i| i as f64).collect();
            Some(bars(&format!("{} at t = {}", s.name, label(t_last)), "index", &xs, last, &[]))
        }
        [m, 4] if s.name.ends_with("_com_fit") => {
            let col = |k: usize| (0..*m).map(|r| last[4 * r + k]).collect::<Vec<f64>>();
            let xs = col(0);
            let curves = vec![
                Curve { label: "Bessel fit".into(), xs: xs.clone(), ys: col(2), points: false },
                Curve { label: "Gaussian fit".into(), xs: xs.clone(), ys: col(3), points: false },
            ];
            Some(bars(&format!("{} at t = {} us", s.name, label(t_last)), "centre of mass (sites)", &xs, &col(1), &curves))
        }
        [r, c] if r == c => {
            let rows: Vec<Vec<f64>> = (0..*r).map(|i| last[i * c..(i + 1) * c].to_vec()).collect();
            Some(heatmap(&format!("{} at t = {} us", s.name, label(t_last)), "j", "i", (0.0, (*c - 1) as f64), (0.0, (*r - 1) as f64), &rows))
        }
        _ => None,
    }
}

/// File names and SVG bodies for a report: a summary of the first column
/// of every low-dimensional series, then one plot per renderable series.
pub fn render(report: &ExperimentReport) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let summary: Vec<Curve> = report
        .series
        .iter()
        .filter(|s| is_line_series(s))
        .map(|s| Curve { label: s.name.clone(), xs: s.times.clone(), ys: s.column(0), points: s.times.len() < 12 })
        .collect();
    if !summary.is_empty() {
        out.push((format!("{}.svg", report.id), line_plot(&report.id, "t (us)", "first column", &summary)));
    }
    for s in &report.series {
        if let Some(svg) = render_series(s) {
            out.push((format!("{}.svg", stem(&s.name)), svg));
        }
    }
    out
}
