//! Orthographic SVG figures of a report.

use std::fmt::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::report::Report;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("report has nothing to draw")]
    NoContent,
    #[error("unknown view axis `{0}`; expected x, y or z")]
    View(String),
}

/// Axis the viewer looks along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    X,
    Y,
    Z,
}

impl FromStr for View {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, RenderError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(View::X),
            "y" => Ok(View::Y),
            "z" => Ok(View::Z),
            other => Err(RenderError::View(other.to_string())),
        }
    }
}

impl View {
    /// Screen coordinates (right, up) and depth towards the viewer.
    fn project(self, p: &[f64; 3]) -> (f64, f64, f64) {
        match self {
            View::X => (p[1], p[2], p[0]),
            View::Y => (p[0], p[2], -p[1]),
            View::Z => (p[0], p[1], p[2]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Defaults to `y` for closed surfaces and `z` for patches.
    pub view: Option<View>,
    pub size: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { view: None, size: 640.0 }
    }
}

struct Frame {
    view: View,
    min: (f64, f64),
    scale: f64,
    margin: f64,
    height: f64,
    /// Depth below which a closed surface is behind the figure plane.
    fade_below: Option<f64>,
}

impl Frame {
    fn xy(&self, p: &[f64; 3]) -> (f64, f64) {
        let (x, y, _) = self.view.project(p);
        (
            self.margin + (x - self.min.0) * self.scale,
            self.height - self.margin - (y - self.min.1) * self.scale,
        )
    }

    fn behind(&self, p: &[f64; 3]) -> bool {
        self.fade_below.is_some_and(|d| self.view.project(p).2 < d)
    }
}

/// Splits a polyline into front and back runs and writes one element each.
fn polyline(out: &mut String, frame: &Frame, pts: &[[f64; 3]], class: &str) {
    let mut start = 0;
    while start + 1 < pts.len() {
        let back = frame.behind(&pts[start]);
        let mut end = start + 1;
        while end < pts.len() && frame.behind(&pts[end]) == back {
            end += 1;
        }
        let last = end.min(pts.len() - 1);
        let coords: Vec<String> = pts[start..=last]
            .iter()
            .map(|p| {
                let (x, y) = frame.xy(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let side = if back { " back" } else { "" };
        let _ = writeln!(out, r#"<polyline class="{class}{side}" points="{}"/>"#, coords.join(" "));
        start = last;
    }
}

const STYLE: &str = "polyline { fill: none; stroke-linejoin: round; stroke-linecap: round; }
.f1 { stroke: #1f5fa8; stroke-width: 0.9; }
.f2 { stroke: #c0392b; stroke-width: 0.9; stroke-dasharray: 5 2; }
.cycle { stroke-width: 1.6; }
.separatrix { stroke: #111; stroke-width: 2.8; stroke-dasharray: none; }
.back { opacity: 0.22; }
.umbilic { fill: #fff; stroke: #111; stroke-width: 1.5; }
text { font-family: sans-serif; font-size: 11px; fill: #111; }";

/// Leaves of the two foliations in distinct styles, cycles slightly
/// heavier, separatrices heavy, umbilics ringed and labelled by verdict.
pub fn render_svg(report: &Report, options: &RenderOptions) -> Result<String, RenderError> {
    let lines: Vec<(&[[f64; 3]], String)> = report
        .leaves
        .iter()
        .map(|l| (l.points.as_slice(), format!("f{}", l.foliation)))
        .chain(report.cycles.iter().map(|c| (c.points.as_slice(), format!("f{} cycle", c.foliation))))
        .chain(
            report
                .separatrices
                .iter()
                .map(|s| (s.points.as_slice(), format!("f{} separatrix", s.foliation))),
        )
        .filter(|(p, _)| p.len() >= 2)
        .collect();
    if lines.is_empty() && report.umbilics.is_empty() {
        return Err(RenderError::NoContent);
    }
    let view = options
        .view
        .unwrap_or(if report.closed_surface { View::Y } else { View::Z });
    let all = lines
        .iter()
        .flat_map(|(p, _)| p.iter())
        .chain(report.umbilics.iter().map(|u| &u.point));
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    let (mut dlo, mut dhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        let (x, y, d) = view.project(p);
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
        dlo = dlo.min(d);
        dhi = dhi.max(d);
    }
    let size = options.size;
    let margin = 0.05 * size;
    let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-12);
    let scale = (size - 2.0 * margin) / span;
    let width = 2.0 * margin + (hi.0 - lo.0) * scale;
    let height = 2.0 * margin + (hi.1 - lo.1) * scale + 18.0;
    let frame = Frame {
        view,
        min: lo,
        scale,
        margin,
        height: height - 18.0,
        fade_below: report.closed_surface.then_some(0.5 * (dlo + dhi)),
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.2} {height:.2}">"#
    );
    let _ = writeln!(out, "<style>\n{STYLE}\n</style>");
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    for (pts, class) in lines.iter().filter(|(_, c)| !c.contains("separatrix")) {
        polyline(&mut out, &frame, pts, class);
    }
    for (pts, class) in lines.iter().filter(|(_, c)| c.contains("separatrix")) {
        polyline(&mut out, &frame, pts, class);
    }
    for u in &report.umbilics {
        let (x, y) = frame.xy(&u.point);
        let side = if frame.behind(&u.point) { " back" } else { "" };
        let _ = writeln!(out, r#"<circle class="umbilic{side}" cx="{x:.2}" cy="{y:.2}" r="4.5"/>"#);
        let label = u.verdict.split('(').next().unwrap_or("");
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, x + 7.0, y - 7.0);
    }
    let axis = match view {
        View::X => "x",
        View::Y => "y",
        View::Z => "z",
    };
    let _ = writeln!(
        out,
        r#"<text x="{margin:.2}" y="{:.2}">{} (view {axis})</text>"#,
        height - 6.0,
        escape(&report.surface)
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
