//! SVG view of a costmap with object footprints and planned paths.
//!
//! Output depends only on the inputs: numbers are printed with fixed
//! precision and elements are emitted in input order.

use std::fmt::Write;

use thiserror::Error;

use super::RunReport;
use crate::cost_field::Costmap;
use crate::geometry::Vec2;
use crate::human_augmentation::Condition;
use crate::planner::Path;
use crate::scene_graph::SceneGraph;

const PX_PER_M: f64 = 100.0;
const MARGIN: f64 = 20.0;
const LEGEND_ROW: f64 = 18.0;

const STROKES: [&str; 4] = ["#1b1b1b", "#2a6fdb", "#1b9e3e", "#8e44ad"];
const DASHES: [&str; 4] = ["10 4", "4 3", "1 3", "12 4 2 4"];

/// One path layer with its legend text.
#[derive(Debug, Clone, Copy)]
pub struct PathLayer<'a> {
    pub label: &'a str,
    pub path: &'a Path,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("report has no conditions")]
    Empty,
    #[error("report has no condition \"{0}\"")]
    MissingCondition(String),
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// White at cost 1, dark red at the map's maximum cost.
fn heat(cost: f64, max: f64) -> (u8, u8, u8) {
    let t = if max > 1.0 {
        ((cost - 1.0) / (max - 1.0)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    (lerp(255.0, 165.0), lerp(255.0, 20.0), lerp(255.0, 30.0))
}

struct Frame {
    min: Vec2,
    max: Vec2,
}

impl Frame {
    fn of(map: &Costmap) -> Self {
        let half = map.resolution / 2.0;
        let last = map.cell_center((map.width - 1, map.height - 1));
        Frame {
            min: Vec2::new(map.origin.x() - half, map.origin.y() - half),
            max: Vec2::new(last.x() + half, last.y() + half),
        }
    }

    fn width_px(&self) -> f64 {
        (self.max.x() - self.min.x()) * PX_PER_M
    }

    fn height_px(&self) -> f64 {
        (self.max.y() - self.min.y()) * PX_PER_M
    }

    /// World point to SVG pixels; y grows downward in SVG.
    fn px(&self, p: &Vec2) -> (f64, f64) {
        (
            MARGIN + (p.x() - self.min.x()) * PX_PER_M,
            MARGIN + (self.max.y() - p.y()) * PX_PER_M,
        )
    }
}

pub fn render_svg(costmap: &Costmap, paths: &[PathLayer<'_>], scene: &SceneGraph) -> String {
    let frame = Frame::of(costmap);
    let legend_h = if paths.is_empty() {
        0.0
    } else {
        MARGIN / 2.0 + LEGEND_ROW * paths.len() as f64
    };
    let width = frame.width_px() + 2.0 * MARGIN;
    let height = frame.height_px() + 2.0 * MARGIN + legend_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.2} {height:.2}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{width:.2}" height="{height:.2}" fill="#ffffff"/>"##);

    // Cells, merged into horizontal runs of equal colour.
    let max = costmap.max_cost();
    let cell_px = costmap.resolution * PX_PER_M;
    let _ = writeln!(s, r#"<g id="costmap" shape-rendering="crispEdges">"#);
    for j in 0..costmap.height {
        let mut i = 0;
        while i < costmap.width {
            let colour = heat(costmap.get((i, j)), max);
            let mut run = 1;
            while i + run < costmap.width && heat(costmap.get((i + run, j)), max) == colour {
                run += 1;
            }
            let c = costmap.cell_center((i, j));
            let (x, y) = frame.px(&c);
            let (r, g, b) = colour;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
                x - cell_px / 2.0,
                y - cell_px / 2.0,
                cell_px * run as f64,
                cell_px,
            );
            i += run;
        }
    }
    s.push_str("</g>\n");

    let _ = writeln!(s, r#"<g id="objects">"#);
    for node in scene.nodes.iter().filter(|n| !n.is_human()) {
        let fp = node.aabb().footprint();
        let (x0, y0) = frame.px(&Vec2::new(fp.min.x(), fp.max.y()));
        let (x1, y1) = frame.px(&Vec2::new(fp.max.x(), fp.min.y()));
        let (cx, cy) = frame.px(&fp.center());
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#404040" stroke-width="1.5"/>"##,
            x1 - x0,
            y1 - y0,
        );
        let _ = writeln!(
            s,
            r##"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" fill="#202020">{}</text>"##,
            cy + 4.0,
            escape(&node.tag)
        );
    }
    for human in scene.humans() {
        let fp = human.aabb().footprint();
        let (cx, cy) = frame.px(&fp.center());
        let r = (fp.width().max(fp.height()) * PX_PER_M / 2.0).max(6.0);
        let _ = writeln!(
            s,
            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="#f2b134" fill-opacity="0.85" stroke="#7a5200" stroke-width="1.5"/>"##
        );
        let _ = writeln!(
            s,
            r##"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" fill="#202020">{}</text>"##,
            cy + 4.0,
            escape(&human.tag)
        );
    }
    s.push_str("</g>\n");

    let _ = writeln!(s, r#"<g id="paths" fill="none" stroke-width="2.5" stroke-linejoin="round">"#);
    for (k, layer) in paths.iter().enumerate() {
        let points = layer
            .path
            .polyline
            .iter()
            .map(|p| {
                let (x, y) = frame.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            s,
            r#"<polyline points="{points}" stroke="{}" stroke-dasharray="{}"><title>{}</title></polyline>"#,
            STROKES[k % STROKES.len()],
            DASHES[k % DASHES.len()],
            escape(layer.label)
        );
    }
    s.push_str("</g>\n");

    if !paths.is_empty() {
        let top = MARGIN + frame.height_px() + MARGIN / 2.0;
        let _ = writeln!(s, r#"<g id="legend">"#);
        for (k, layer) in paths.iter().enumerate() {
            let y = top + LEGEND_ROW * (k as f64 + 0.5);
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2.5" stroke-dasharray="{}"/>"#,
                MARGIN,
                MARGIN + 36.0,
                STROKES[k % STROKES.len()],
                DASHES[k % DASHES.len()],
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                MARGIN + 44.0,
                y + 4.0,
                escape(layer.label)
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

/// Every condition's path over one condition's costmap (the last declared
/// condition unless `costmap_of` is given).
pub fn render_report(report: &RunReport, costmap_of: Option<Condition>) -> Result<String, RenderError> {
    let base = match costmap_of {
        Some(c) => report
            .condition(c)
            .ok_or_else(|| RenderError::MissingCondition(c.key().to_string()))?,
        None => report.conditions.last().ok_or(RenderError::Empty)?,
    };
    let layers: Vec<PathLayer<'_>> = report
        .conditions
        .iter()
        .map(|c| PathLayer {
            label: &c.label,
            path: &c.path,
        })
        .collect();
    Ok(render_svg(&base.costmap, &layers, &report.scene))
}
