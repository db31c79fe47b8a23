//! Minimal SVG rendering: multi-series line charts and heat maps.

use std::fmt::Write;

/// Floor applied by [`normalized_db`].
pub const DB_FLOOR: f64 = -60.0;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// `10 log10(v / max)` clamped below at [`DB_FLOOR`]. Nonpositive inputs map to the floor.
pub fn normalized_db(values: &[f64]) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| {
            if max > 0.0 && *v > 0.0 {
                (10.0 * (v / max).log10()).max(DB_FLOOR)
            } else {
                DB_FLOOR
            }
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str, y_tick_label: impl Fn(f64) -> String) {
    let (x0, x1) = (frame.px(frame.x.0), frame.px(frame.x.1));
    let (y0, y1) = (frame.py(frame.y.0), frame.py(frame.y.1));
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in ticks(frame.x.0, frame.x.1) {
        let x = frame.px(t);
        let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, y0 + 18.0, fmt_tick(t));
    }
    for t in ticks(frame.y.0, frame.y.1) {
        let y = frame.py(t);
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            y_tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Plot `log10(y)`; nonpositive values are dropped.
    pub log_y: bool,
    /// Vertical reference lines, e.g. true target positions.
    pub markers: Vec<f64>,
}

impl LineChart {
    pub fn render(&self) -> String {
        let tf = |y: f64| if self.log_y { y.log10() } else { y };
        let usable = |y: f64| y.is_finite() && (!self.log_y || y > 0.0);
        let pts: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter(|(x, y)| x.is_finite() && usable(*y))
                    .map(|(x, y)| (*x, tf(*y)))
                    .collect()
            })
            .collect();
        let all = pts.iter().flatten();
        let (mut xl, mut xh, mut yl, mut yh) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (x, y) in all {
            xl = xl.min(*x);
            xh = xh.max(*x);
            yl = yl.min(*y);
            yh = yh.max(*y);
        }
        if xl > xh {
            (xl, xh, yl, yh) = (0.0, 1.0, 0.0, 1.0);
        }
        if xh <= xl {
            xh = xl + 1.0;
        }
        if yh <= yl {
            yh = yl + 1.0;
        }
        let pad = (yh - yl) * 0.05;
        let frame = Frame {
            x: (xl, xh),
            y: (yl - pad, yh + pad),
        };

        let mut out = String::new();
        header(&mut out, &self.title);
        let log_y = self.log_y;
        axes(&mut out, &frame, &self.x_label, &self.y_label, |t| {
            if log_y {
                fmt_tick(10f64.powf(t))
            } else {
                fmt_tick(t)
            }
        });
        for m in &self.markers {
            if *m >= frame.x.0 && *m <= frame.x.1 {
                let x = frame.px(*m);
                let _ = writeln!(
                    out,
                    r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 3"/>"#,
                    frame.py(frame.y.0),
                    frame.py(frame.y.1)
                );
            }
        }
        for (k, (series, p)) in self.series.iter().zip(&pts).enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let path: Vec<String> = p.iter().map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y))).collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
            let ly = MARGIN_TOP + 10.0 + 20.0 * k as f64;
            let lx = WIDTH - MARGIN_RIGHT + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
                lx + 20.0
            );
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&series.name));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub nx: usize,
    pub ny: usize,
    /// Cell-centre coordinates of the first and last column / row.
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Row-major with x varying fastest, `nx * ny` entries, in dB.
    pub values_db: Vec<f64>,
    pub markers: Vec<(f64, f64)>,
}

/// Dark blue (low) to yellow (high).
fn colormap(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let stops = [(0.0, [20.0, 20.0, 90.0]), (0.5, [200.0, 60.0, 80.0]), (1.0, [250.0, 235.0, 60.0])];
    let (a, b) = if t <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let u = (t - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|i| (a.1[i] + u * (b.1[i] - a.1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

impl HeatMap {
    pub fn render(&self) -> String {
        let dx = if self.nx > 1 { (self.x_range.1 - self.x_range.0) / (self.nx - 1) as f64 } else { 1.0 };
        let dy = if self.ny > 1 { (self.y_range.1 - self.y_range.0) / (self.ny - 1) as f64 } else { 1.0 };
        let frame = Frame {
            x: (self.x_range.0 - dx / 2.0, self.x_range.1 + dx / 2.0),
            y: (self.y_range.0 - dy / 2.0, self.y_range.1 + dy / 2.0),
        };
        let lo = self.values_db.iter().cloned().fold(f64::MAX, f64::min);
        let hi = self.values_db.iter().cloned().fold(f64::MIN, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };

        let mut out = String::new();
        header(&mut out, &self.title);
        let cw = frame.px(frame.x.0 + dx) - frame.px(frame.x.0);
        let ch = frame.py(frame.y.0) - frame.py(frame.y.0 + dy);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let v = self.values_db[iy * self.nx + ix];
                let x = frame.px(self.x_range.0 + dx * ix as f64 - dx / 2.0);
                let y = frame.py(self.y_range.0 + dy * iy as f64 + dy / 2.0);
                let _ = writeln!(
                    out,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    cw + 0.3,
                    ch + 0.3,
                    colormap((v - lo) / span)
                );
            }
        }
        axes(&mut out, &frame, &self.x_label, &self.y_label, fmt_tick);
        for (mx, my) in &self.markers {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="5" fill="none" stroke="white" stroke-width="1.5"/>"#,
                frame.px(*mx),
                frame.py(*my)
            );
        }
        // Colour bar.
        let bx = WIDTH - MARGIN_RIGHT + 20.0;
        let (top, bottom) = (frame.py(frame.y.1), frame.py(frame.y.0));
        let steps = 40;
        for s in 0..steps {
            let t = s as f64 / steps as f64;
            let y = bottom - (bottom - top) * (t + 1.0 / steps as f64);
            let _ = writeln!(
                out,
                r#"<rect x="{bx:.1}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#,
                (bottom - top) / steps as f64 + 0.3,
                colormap(t)
            );
        }
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{} dB</text>"#, bx + 22.0, top + 10.0, fmt_tick(hi));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{bottom:.1}">{} dB</text>"#, bx + 22.0, fmt_tick(lo));
        out.push_str("</svg>\n");
        out
    }
}
