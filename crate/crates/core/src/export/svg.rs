//! Minimal SVG line/area plots written as plain text.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone)]
enum Layer {
    Polygon {
        points: Vec<[f64; 2]>,
        fill: String,
        stroke: String,
    },
    Line {
        points: Vec<[f64; 2]>,
        stroke: String,
        width: f64,
        dashed: bool,
    },
}

#[derive(Debug, Clone)]
pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    layers: Vec<Layer>,
    legend: Vec<(String, String)>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            layers: vec![],
            legend: vec![],
        }
    }

    pub fn polygon(&mut self, points: Vec<[f64; 2]>, fill: &str, stroke: &str) {
        self.layers.push(Layer::Polygon {
            points,
            fill: fill.into(),
            stroke: stroke.into(),
        });
    }

    pub fn line(&mut self, points: Vec<[f64; 2]>, stroke: &str, width: f64, dashed: bool) {
        self.layers.push(Layer::Line {
            points,
            stroke: stroke.into(),
            width,
            dashed,
        });
    }

    pub fn legend(&mut self, label: &str, color: &str) {
        self.legend.push((label.into(), color.into()));
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut x = [f64::INFINITY, f64::NEG_INFINITY];
        let mut y = x;
        for layer in &self.layers {
            let pts = match layer {
                Layer::Polygon { points, .. } | Layer::Line { points, .. } => points,
            };
            for p in pts.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
                x = [x[0].min(p[0]), x[1].max(p[0])];
                y = [y[0].min(p[1]), y[1].max(p[1])];
            }
        }
        (pad(x), pad(y))
    }

    pub fn render(&self) -> String {
        let (xr, yr) = self.bounds();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - xr[0]) / (xr[1] - xr[0]) * pw;
        let sy = |y: f64| TOP + (yr[1] - y) / (yr[1] - yr[0]) * ph;
        let path = |pts: &[[f64; 2]]| {
            pts.iter()
                .filter(|p| p[0].is_finite() && p[1].is_finite())
                .map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1])))
                .collect::<Vec<_>>()
                .join(" ")
        };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
        );
        for t in ticks(xr) {
            let x = sx(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#ddd"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
                TOP,
                TOP + ph,
                TOP + ph + 18.0,
                label(t)
            );
        }
        for t in ticks(yr) {
            let y = sy(t);
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0,
                label(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        let _ = writeln!(
            s,
            r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath><g clip-path="url(#plot)">"#
        );
        for layer in &self.layers {
            match layer {
                Layer::Polygon {
                    points,
                    fill,
                    stroke,
                } => {
                    let _ = writeln!(
                        s,
                        r#"<polygon points="{}" fill="{fill}" fill-opacity="0.35" stroke="{stroke}" stroke-width="0.8"/>"#,
                        path(points)
                    );
                }
                Layer::Line {
                    points,
                    stroke,
                    width,
                    dashed,
                } => {
                    let dash = if *dashed {
                        r#" stroke-dasharray="6 4""#
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
                        path(points)
                    );
                }
            }
        }
        s.push_str("</g>\n");
        for (i, (name, color)) in self.legend.iter().enumerate() {
            let y = TOP + 16.0 + 18.0 * i as f64;
            let x = LEFT + pw - 200.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{}" width="14" height="10" fill="{color}"/><text x="{}" y="{y}">{}</text>"#,
                y - 9.0,
                x + 20.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn pad(r: [f64; 2]) -> [f64; 2] {
    if !r[0].is_finite() {
        return [0.0, 1.0];
    }
    let span = r[1] - r[0];
    let m = if span > 0.0 {
        0.05 * span
    } else {
        r[0].abs().max(1.0) * 0.05
    };
    [r[0] - m, r[1] + m]
}

/// About five round-numbered ticks inside `r`.
fn ticks(r: [f64; 2]) -> Vec<f64> {
    let raw = (r[1] - r[0]) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (r[0] / step).ceil() * step;
    let mut out = vec![];
    while t <= r[1] && out.len() < 20 {
        out.push(t);
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks([0.3, 9.7]);
        assert_eq!(t, vec![2.0, 4.0, 6.0, 8.0]);
        assert!(ticks([-1.0, 1.0]).contains(&0.0));
    }

    #[test]
    fn renders_layers() {
        let mut p = Plot::new("a < b", "x", "y");
        p.polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], "#36c", "#036");
        p.line(
            vec![[0.0, 1.0], [1.0, f64::NAN], [1.0, 0.0]],
            "red",
            1.5,
            true,
        );
        p.legend("set", "#36c");
        let s = p.render();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<polygon").count(), 1);
        assert!(!s.contains("NaN"));
    }
}
