//! Planar cost field built from per-object `(cost, clearance)` pairs, and its
//! rasterization into a [`Costmap`].
//!
//! An object contributes `cost` on its footprint, decaying to 1 at distance
//! `clearance` from the footprint border. Contributions combine by pointwise
//! maximum, so a cluster of mild objects never outweighs a single costly one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_assessment::{Assessment, CostClearance};
use crate::geometry::{Rect, Vec2};
use crate::scene_graph::{RelationKind, SceneGraph};

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("bounds must be finite with min < max on both axes")]
    DegenerateBounds,
    #[error("contribution \"{id}\" is out of range: cost {cost}, clearance {clearance}")]
    InvalidContribution { id: String, cost: f64, clearance: f64 },
    #[error("assessed id \"{0}\" is not in the scene")]
    UnknownObject(String),
    #[error("costmap text: {0}")]
    Format(String),
}

/// How a contribution decays between the footprint and `clearance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Falloff {
    /// `1 + (cost - 1) * (1 - d / clearance)`.
    #[default]
    Linear,
    /// Gaussian bump with sigma = clearance / 2, shifted and rescaled so it is
    /// exactly `cost` at d = 0 and exactly 1 at d = clearance.
    Gaussian,
}

/// Value at distance `d` from a footprint. With zero clearance the object only
/// counts on its own footprint.
pub fn falloff_value(falloff: Falloff, d: f64, cost: f64, clearance: f64) -> f64 {
    if d <= 0.0 {
        return cost;
    }
    if clearance <= 0.0 || d >= clearance {
        return 1.0;
    }
    let weight = match falloff {
        Falloff::Linear => 1.0 - d / clearance,
        Falloff::Gaussian => {
            let sigma = clearance / 2.0;
            let g = |x: f64| (-(x * x) / (2.0 * sigma * sigma)).exp();
            let floor = g(clearance);
            (g(d) - floor) / (1.0 - floor)
        }
    };
    (1.0 + (cost - 1.0) * weight).min(cost).max(1.0)
}

/// Linear-falloff value of one footprint at `point`.
pub fn point_cost(point: &Vec2, footprint: &Rect, cost: f64, clearance: f64) -> f64 {
    falloff_value(Falloff::Linear, footprint.distance(point), cost, clearance)
}

/// Rectangle of `width` running from `start` to `end` (segment plus its sides;
/// the caps are flat at the endpoints).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub start: Vec2,
    pub end: Vec2,
    pub width: f64,
}

impl Corridor {
    fn frame(&self) -> (Vec2, Vec2, f64) {
        let (dx, dy) = (self.end.x() - self.start.x(), self.end.y() - self.start.y());
        let len = dx.hypot(dy);
        let axis = if len > 0.0 {
            Vec2::new(dx / len, dy / len)
        } else {
            Vec2::new(1.0, 0.0)
        };
        let center = Vec2::new(
            (self.start.x() + self.end.x()) / 2.0,
            (self.start.y() + self.end.y()) / 2.0,
        );
        (center, axis, len)
    }

    pub fn distance(&self, point: &Vec2) -> f64 {
        let (c, axis, len) = self.frame();
        let (px, py) = (point.x() - c.x(), point.y() - c.y());
        let u = px * axis.x() + py * axis.y();
        let v = -px * axis.y() + py * axis.x();
        let du = (u.abs() - len / 2.0).max(0.0);
        let dv = (v.abs() - self.width / 2.0).max(0.0);
        du.hypot(dv)
    }

    /// Corner points, counter-clockwise.
    pub fn corners(&self) -> [Vec2; 4] {
        let (c, axis, len) = self.frame();
        let (hl, hw) = (len / 2.0, self.width / 2.0);
        let at = |su: f64, sv: f64| {
            Vec2::new(
                c.x() + su * hl * axis.x() - sv * hw * axis.y(),
                c.y() + su * hl * axis.y() + sv * hw * axis.x(),
            )
        };
        [at(-1.0, -1.0), at(1.0, -1.0), at(1.0, 1.0), at(-1.0, 1.0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Rect(Rect),
    Corridor(Corridor),
}

impl Shape {
    pub fn distance(&self, point: &Vec2) -> f64 {
        match self {
            Shape::Rect(r) => r.distance(point),
            Shape::Corridor(c) => c.distance(point),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub id: String,
    pub shape: Shape,
    pub cost: f64,
    pub clearance: f64,
}

impl Contribution {
    pub fn value_at(&self, point: &Vec2, falloff: Falloff) -> f64 {
        falloff_value(falloff, self.shape.distance(point), self.cost, self.clearance)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldSpec {
    pub contributions: Vec<Contribution>,
    #[serde(default)]
    pub falloff: Falloff,
}

impl FieldSpec {
    pub fn new(contributions: Vec<Contribution>, falloff: Falloff) -> Result<Self, FieldError> {
        if let Some(c) = contributions.iter().find(|c| {
            !(c.cost >= 1.0 && c.cost.is_finite() && c.clearance >= 0.0 && c.clearance.is_finite())
        }) {
            return Err(FieldError::InvalidContribution {
                id: c.id.clone(),
                cost: c.cost,
                clearance: c.clearance,
            });
        }
        Ok(Self {
            contributions,
            falloff,
        })
    }

    /// One footprint contribution per assessed object.
    pub fn from_assessment(
        graph: &SceneGraph,
        assessment: &Assessment,
        falloff: Falloff,
    ) -> Result<Self, FieldError> {
        let mut contributions = Vec::with_capacity(assessment.entries.len());
        for (id, cc) in &assessment.entries {
            let node = graph
                .node(id)
                .ok_or_else(|| FieldError::UnknownObject(id.clone()))?;
            contributions.push(Contribution {
                id: id.clone(),
                shape: Shape::Rect(node.aabb().footprint()),
                cost: cc.cost,
                clearance: cc.clearance,
            });
        }
        Self::new(contributions, falloff)
    }

    pub fn with_zones(mut self, zones: &[ActivityZone]) -> Self {
        self.contributions.extend(zones.iter().map(ActivityZone::contribution));
        self
    }
}

/// Pointwise maximum over all contributions; 1 for an empty field.
pub fn combined_cost(point: &Vec2, spec: &FieldSpec) -> f64 {
    spec.contributions
        .iter()
        .map(|c| c.value_at(point, spec.falloff))
        .fold(1.0, f64::max)
}

/// Corridor between a human and the target of one of its activities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityZone {
    pub human: String,
    pub verb: String,
    pub target: String,
    pub corridor: Corridor,
    pub cost: f64,
    pub clearance: f64,
}

impl ActivityZone {
    pub fn contribution(&self) -> Contribution {
        Contribution {
            id: format!("{}:{}:{}", self.human, self.verb, self.target),
            shape: Shape::Corridor(self.corridor),
            cost: self.cost,
            clearance: self.clearance,
        }
    }
}

/// Activity verb → zone `(cost, clearance)`. Empty disables zones.
pub type ZoneConfig = BTreeMap<String, CostClearance>;

/// One corridor per activity relation whose verb is configured. The corridor
/// joins the two footprint centers; its width is the larger footprint extent
/// measured across the corridor.
pub fn make_activity_zones(partial: &SceneGraph, config: &ZoneConfig) -> Vec<ActivityZone> {
    if config.is_empty() {
        return Vec::new();
    }
    let mut zones = Vec::new();
    for rel in &partial.relations {
        if rel.kind != RelationKind::Activity {
            continue;
        }
        let Some(cc) = config.get(&rel.name) else {
            continue;
        };
        let (Some(head), Some(tail)) = (partial.node(&rel.head), partial.node(&rel.tail)) else {
            continue;
        };
        let (a, b) = (head.aabb().footprint(), tail.aabb().footprint());
        let (start, end) = (a.center(), b.center());
        let (dx, dy) = (end.x() - start.x(), end.y() - start.y());
        let len = dx.hypot(dy);
        let (nx, ny) = if len > 0.0 { (-dy / len, dx / len) } else { (0.0, 1.0) };
        let across = |r: &Rect| (r.width() * nx).abs() + (r.height() * ny).abs();
        zones.push(ActivityZone {
            human: rel.head.clone(),
            verb: rel.name.clone(),
            target: rel.tail.clone(),
            corridor: Corridor {
                start,
                end,
                width: across(&a).max(across(&b)),
            },
            cost: cc.cost,
            clearance: cc.clearance,
        });
    }
    zones
}

/// Rectangle of the ground plane to rasterize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    fn is_valid(&self) -> bool {
        self.min.0.iter().chain(&self.max.0).all(|v| v.is_finite())
            && self.min.x() < self.max.x()
            && self.min.y() < self.max.y()
    }
}

/// Grid of costs sampled on a lattice. Cell `(i, j)` is the square of side
/// `resolution` centered at `origin + (i, j) * resolution`; `cells` is
/// row-major with `j` (the y index) selecting the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCostmap")]
pub struct Costmap {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCostmap {
    origin: Vec2,
    resolution: f64,
    width: usize,
    height: usize,
    cells: Vec<f64>,
}

impl TryFrom<RawCostmap> for Costmap {
    type Error = FieldError;

    fn try_from(r: RawCostmap) -> Result<Self, Self::Error> {
        Costmap::from_cells(r.origin, r.resolution, r.width, r.height, r.cells)
    }
}

pub type Cell = (usize, usize);

impl Costmap {
    pub fn from_cells(
        origin: Vec2,
        resolution: f64,
        width: usize,
        height: usize,
        cells: Vec<f64>,
    ) -> Result<Self, FieldError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(FieldError::InvalidResolution(resolution));
        }
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(FieldError::Format(format!(
                "{width}x{height} map needs {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        if let Some(v) = cells.iter().find(|v| !(**v >= 1.0 && v.is_finite())) {
            return Err(FieldError::Format(format!("cell value {v} is below 1 or not finite")));
        }
        Ok(Self {
            origin,
            resolution,
            width,
            height,
            cells,
        })
    }

    pub fn uniform(origin: Vec2, resolution: f64, width: usize, height: usize, value: f64) -> Result<Self, FieldError> {
        Self::from_cells(origin, resolution, width, height, vec![value; width * height])
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.1 * self.width + cell.0
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.0 < self.width && cell.1 < self.height
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.cells[self.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, value: f64) {
        let idx = self.index(cell);
        self.cells[idx] = value;
    }

    pub fn cell_center(&self, cell: Cell) -> Vec2 {
        Vec2::new(
            self.origin.x() + cell.0 as f64 * self.resolution,
            self.origin.y() + cell.1 as f64 * self.resolution,
        )
    }

    /// Cell whose square contains `point`.
    pub fn world_to_cell(&self, point: &Vec2) -> Option<Cell> {
        let fx = ((point.x() - self.origin.x()) / self.resolution).round();
        let fy = ((point.y() - self.origin.y()) / self.resolution).round();
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let cell = (fx as usize, fy as usize);
        self.in_bounds(cell).then_some(cell)
    }

    pub fn min_cost(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_cost(&self) -> f64 {
        self.cells.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Plain-text export: a header (origin, resolution, size) followed by one
    /// line per row, starting at `j = 0`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# socioplan costmap v1\n");
        let _ = writeln!(out, "origin {} {}", self.origin.x(), self.origin.y());
        let _ = writeln!(out, "resolution {}", self.resolution);
        let _ = writeln!(out, "size {} {}", self.width, self.height);
        for row in self.cells.chunks(self.width) {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FieldError> {
        let bad = |m: &str| FieldError::Format(m.to_string());
        let num = |s: &str| s.parse::<f64>().map_err(|e| FieldError::Format(format!("{s}: {e}")));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next() != Some("# socioplan costmap v1") {
            return Err(bad("missing header line"));
        }
        let mut field = |name: &str| -> Result<Vec<String>, FieldError> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing {name} line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(bad(&format!("expected {name} line")));
            }
            Ok(parts.map(String::from).collect())
        };
        let origin = field("origin")?;
        let resolution = field("resolution")?;
        let size = field("size")?;
        if origin.len() != 2 || resolution.len() != 1 || size.len() != 2 {
            return Err(bad("malformed header"));
        }
        let width: usize = size[0].parse().map_err(|_| bad("bad width"))?;
        let height: usize = size[1].parse().map_err(|_| bad("bad height"))?;
        let mut cells = Vec::with_capacity(width * height);
        for line in lines {
            let row = line
                .split_whitespace()
                .map(num)
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != width {
                return Err(bad("row length does not match width"));
            }
            cells.extend(row);
        }
        Costmap::from_cells(
            Vec2::new(num(&origin[0])?, num(&origin[1])?),
            num(&resolution[0])?,
            width,
            height,
            cells,
        )
    }
}

/// Samples `combined_cost` (field plus zones) at every lattice point of `bounds`.
/// Rows are computed in parallel; the result does not depend on scheduling.
pub fn rasterize(
    spec: &FieldSpec,
    zones: &[ActivityZone],
    bounds: Bounds,
    resolution: f64,
) -> Result<Costmap, FieldError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(FieldError::InvalidResolution(resolution));
    }
    if !bounds.is_valid() {
        return Err(FieldError::DegenerateBounds);
    }
    let full = spec.clone().with_zones(zones);
    let span = |lo: f64, hi: f64| ((hi - lo) / resolution + 1e-9).floor() as usize + 1;
    let width = span(bounds.min.x(), bounds.max.x());
    let height = span(bounds.min.y(), bounds.max.y());
    let origin = bounds.min;

    let mut cells = vec![1.0; width * height];
    cells
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(j, row)| {
            let y = origin.y() + j as f64 * resolution;
            for (i, cell) in row.iter_mut().enumerate() {
                let x = origin.x() + i as f64 * resolution;
                *cell = combined_cost(&Vec2::new(x, y), &full);
            }
        });
    Costmap::from_cells(origin, resolution, width, height, cells)
}
