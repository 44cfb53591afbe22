//! Minimum-cost path search on a [`Costmap`] and the assess → rasterize → plan
//! loop that ties relevance to the path actually planned.
//!
//! Grid moves are 8-connected. A step from cell `a` to neighbour `b` weighs
//! `len * resolution * (cost(a) + cost(b)) / 2` with `len` 1 or √2, so the path
//! cost approximates the line integral of the field along the path.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_assessment::{assess, AssessError, AssessRequest, Assessment, Assessor};
use crate::cost_field::{
    make_activity_zones, rasterize, ActivityZone, Bounds, Cell, Costmap, Falloff, FieldError,
    FieldSpec, ZoneConfig,
};
use crate::geometry::Vec2;
use crate::scene_graph::SceneGraph;
use crate::trajectory_context::{
    induce_partial_graph, relevant_objects, ContextError, QueryRadius, Trajectory,
    DEFAULT_RESAMPLE_SPACING_M,
};

pub const DEFAULT_MAX_ROUNDS: u32 = 3;

const NEIGHBOURS: [(isize, isize); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("{which} point ({}, {}) lies outside the costmap", .point.x(), .point.y())]
    OutOfBounds { which: &'static str, point: Vec2 },
    #[error("no path between start and goal")]
    NoPath,
    #[error("path is empty")]
    EmptyPath,
    #[error("cell ({}, {}) is outside the costmap", .0.0, .0.1)]
    CellOutOfBounds(Cell),
    #[error("cells ({}, {}) and ({}, {}) are not 8-adjacent", .0.0, .0.1, .1.0, .1.1)]
    NonAdjacent(Cell, Cell),
}

#[derive(Debug, Clone, Copy)]
pub struct PlanRequest<'a> {
    pub start: Vec2,
    pub goal: Vec2,
    pub costmap: &'a Costmap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<Cell>,
    pub polyline: Vec<Vec2>,
    pub total_cost: f64,
    pub length_m: f64,
}

/// Weight of one move between 8-adjacent cells.
fn step_weight(map: &Costmap, a: Cell, b: Cell) -> f64 {
    let len = if a.0 != b.0 && a.1 != b.1 { SQRT_2 } else { 1.0 };
    len * map.resolution * (map.get(a) + map.get(b)) / 2.0
}

fn adjacent(a: Cell, b: Cell) -> bool {
    let (dx, dy) = (a.0.abs_diff(b.0), a.1.abs_diff(b.1));
    dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
}

/// Sum of step weights along `path.cells`; 0 for a single cell.
pub fn path_cost(path: &Path, costmap: &Costmap) -> Result<f64, PlanError> {
    cells_cost(&path.cells, costmap)
}

fn cells_cost(cells: &[Cell], costmap: &Costmap) -> Result<f64, PlanError> {
    if cells.is_empty() {
        return Err(PlanError::EmptyPath);
    }
    if let Some(c) = cells.iter().find(|c| !costmap.in_bounds(**c)) {
        return Err(PlanError::CellOutOfBounds(*c));
    }
    let mut total = 0.0;
    for w in cells.windows(2) {
        if !adjacent(w[0], w[1]) {
            return Err(PlanError::NonAdjacent(w[0], w[1]));
        }
        total += step_weight(costmap, w[0], w[1]);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    h: f64,
    g: f64,
    index: usize,
}

// Min-heap order on (f, h, index).
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

/// A* search for the minimum-cost 8-connected path. The heuristic is the
/// straight-line distance times the smallest cell cost, which never
/// overestimates.
pub fn plan(request: &PlanRequest<'_>) -> Result<Path, PlanError> {
    let map = request.costmap;
    let start = map.world_to_cell(&request.start).ok_or(PlanError::OutOfBounds {
        which: "start",
        point: request.start,
    })?;
    let goal = map.world_to_cell(&request.goal).ok_or(PlanError::OutOfBounds {
        which: "goal",
        point: request.goal,
    })?;

    let n = map.width * map.height;
    let min_cost = map.min_cost();
    let cell_of = |idx: usize| (idx % map.width, idx / map.width);
    let heuristic = |c: Cell| {
        let dx = c.0 as f64 - goal.0 as f64;
        let dy = c.1 as f64 - goal.1 as f64;
        dx.hypot(dy) * map.resolution * min_cost
    };

    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let (s, t) = (map.index(start), map.index(goal));
    g[s] = 0.0;
    let h0 = heuristic(start);
    heap.push(Open {
        f: h0,
        h: h0,
        g: 0.0,
        index: s,
    });

    let mut reached = false;
    while let Some(Open { g: gu, index: u, .. }) = heap.pop() {
        if gu > g[u] {
            continue;
        }
        if u == t {
            reached = true;
            break;
        }
        let cu = cell_of(u);
        for (dx, dy) in NEIGHBOURS {
            let (Some(x), Some(y)) = (cu.0.checked_add_signed(dx), cu.1.checked_add_signed(dy))
            else {
                continue;
            };
            let cv = (x, y);
            if !map.in_bounds(cv) {
                continue;
            }
            let v = map.index(cv);
            let candidate = gu + step_weight(map, cu, cv);
            if candidate < g[v] {
                g[v] = candidate;
                parent[v] = u;
                let h = heuristic(cv);
                heap.push(Open {
                    f: candidate + h,
                    h,
                    g: candidate,
                    index: v,
                });
            }
        }
    }
    if !reached {
        return Err(PlanError::NoPath);
    }

    let mut cells = vec![goal];
    let mut cur = t;
    while cur != s {
        cur = parent[cur];
        cells.push(cell_of(cur));
    }
    cells.reverse();

    let total_cost = cells_cost(&cells, map)?;
    let length_m = cells
        .windows(2)
        .map(|w| step_weight_len(w[0], w[1]) * map.resolution)
        .sum();
    let polyline = cells.iter().map(|c| map.cell_center(*c)).collect();
    Ok(Path {
        cells,
        polyline,
        total_cost,
        length_m,
    })
}

fn step_weight_len(a: Cell, b: Cell) -> f64 {
    if a.0 != b.0 && a.1 != b.1 {
        SQRT_2
    } else {
        1.0
    }
}

// ---------------------------------------------------------------------------
// Assess-then-plan loop
// ---------------------------------------------------------------------------

/// Inputs of [`iterate_plan`] other than the graph and the assessor.
#[derive(Debug, Clone)]
pub struct IterationSetup {
    pub start: Vec2,
    pub goal: Vec2,
    /// Height at which waypoints are placed for the radius search.
    pub waypoint_z: f64,
    pub radius: QueryRadius,
    pub preferences: Vec<String>,
    pub bounds: Bounds,
    pub resolution: f64,
    pub falloff: Falloff,
    pub zones: ZoneConfig,
    pub max_rounds: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub path: Path,
    pub assessment: Assessment,
    /// Relevant set the final assessment was made for.
    pub relevant: Vec<String>,
    pub zones: Vec<ActivityZone>,
    pub costmap: Costmap,
    pub rounds: u32,
    /// The final path found no object outside `relevant`.
    pub converged: bool,
}

#[derive(Debug, Error)]
pub enum IterateError {
    #[error("max_rounds must be at least 1")]
    NoRounds,
    #[error("round {round}, relevance: {source}")]
    Context {
        round: u32,
        #[source]
        source: ContextError,
    },
    #[error("round {round}, assessment: {source}")]
    Assess {
        round: u32,
        #[source]
        source: AssessError,
    },
    #[error("round {round}, cost field: {source}")]
    Field {
        round: u32,
        #[source]
        source: FieldError,
    },
    #[error("round {round}, planning: {source}")]
    Plan {
        round: u32,
        #[source]
        source: PlanError,
    },
}

fn relevant_along(
    graph: &SceneGraph,
    trajectory: &Trajectory,
    radius: QueryRadius,
) -> Result<Vec<String>, ContextError> {
    let dense = trajectory.resampled(DEFAULT_RESAMPLE_SPACING_M)?;
    Ok(relevant_objects(graph, &dense, radius))
}

/// Alternates relevance search and planning. Round 1 uses the objects near
/// the straight segment start → goal. Each later round adds the objects near
/// the previous path; objects stay in the set once found, so a detour around
/// an object does not drop it again. Stops once a path finds nothing new, or
/// after `max_rounds`.
pub fn iterate_plan(
    graph: &SceneGraph,
    setup: &IterationSetup,
    assessor: &dyn Assessor,
) -> Result<IterationOutcome, IterateError> {
    if setup.max_rounds == 0 {
        return Err(IterateError::NoRounds);
    }
    let mut trajectory = Trajectory::straight(setup.start, setup.goal, setup.waypoint_z);
    let mut relevant = relevant_along(graph, &trajectory, setup.radius)
        .map_err(|source| IterateError::Context { round: 1, source })?;

    let mut round = 1;
    loop {
        let partial = induce_partial_graph(graph, &relevant)
            .map_err(|source| IterateError::Context { round, source })?;
        let request = AssessRequest {
            partial: &partial,
            trajectory: &trajectory,
            relevant: &relevant,
            preferences: &setup.preferences,
        };
        let assessment =
            assess(assessor, &request).map_err(|source| IterateError::Assess { round, source })?;
        let zones = make_activity_zones(&partial, &setup.zones);
        let spec = FieldSpec::from_assessment(&partial, &assessment, setup.falloff)
            .map_err(|source| IterateError::Field { round, source })?;
        let costmap = rasterize(&spec, &zones, setup.bounds, setup.resolution)
            .map_err(|source| IterateError::Field { round, source })?;
        let path = plan(&PlanRequest {
            start: setup.start,
            goal: setup.goal,
            costmap: &costmap,
        })
        .map_err(|source| IterateError::Plan { round, source })?;

        trajectory = Trajectory::from_planar(&path.polyline, setup.waypoint_z)
            .map_err(|source| IterateError::Context { round, source })?;
        let next = relevant_along(graph, &trajectory, setup.radius)
            .map_err(|source| IterateError::Context { round, source })?;
        let known = as_set(&relevant);
        let added: Vec<String> = next
            .into_iter()
            .filter(|id| !known.contains(id.as_str()))
            .collect();
        let converged = added.is_empty();

        if converged || round >= setup.max_rounds {
            return Ok(IterationOutcome {
                path,
                assessment,
                relevant,
                zones,
                costmap,
                rounds: round,
                converged,
            });
        }
        relevant.extend(added);
        round += 1;
    }
}

fn as_set(ids: &[String]) -> BTreeSet<&str> {
    ids.iter().map(String::as_str).collect()
}
