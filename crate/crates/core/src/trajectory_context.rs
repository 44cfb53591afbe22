//! Trajectories, trajectory-relevant partial scene graphs, and the per-object
//! description records handed to assessors.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Vec2, Vec3};
use crate::scene_graph::{distance_to_object, SceneGraph};

/// Spacing applied before relevance search so sparse waypoints do not skip objects.
pub const DEFAULT_RESAMPLE_SPACING_M: f64 = 0.25;

pub const DEFAULT_QUERY_RADIUS_M: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum ContextError {
    #[error("a trajectory needs at least one waypoint")]
    EmptyTrajectory,
    #[error("waypoint {0} has non-finite coordinates")]
    NonFiniteWaypoint(usize),
    #[error("query radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("resample spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("unknown object id \"{0}\"")]
    UnknownId(String),
}

/// Ordered waypoints `p1 … pn`, n ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec3>", into = "Vec<Vec3>")]
pub struct Trajectory {
    waypoints: Vec<Vec3>,
}

impl TryFrom<Vec<Vec3>> for Trajectory {
    type Error = ContextError;

    fn try_from(waypoints: Vec<Vec3>) -> Result<Self, Self::Error> {
        Trajectory::new(waypoints)
    }
}

impl From<Trajectory> for Vec<Vec3> {
    fn from(t: Trajectory) -> Self {
        t.waypoints
    }
}

impl Trajectory {
    pub fn new(waypoints: Vec<Vec3>) -> Result<Self, ContextError> {
        if waypoints.is_empty() {
            return Err(ContextError::EmptyTrajectory);
        }
        if let Some(i) = waypoints.iter().position(|w| !w.is_finite()) {
            return Err(ContextError::NonFiniteWaypoint(i));
        }
        Ok(Self { waypoints })
    }

    /// Ground-plane polyline lifted to height `z`.
    pub fn from_planar(points: &[Vec2], z: f64) -> Result<Self, ContextError> {
        Self::new(points.iter().map(|p| p.with_z(z)).collect())
    }

    /// Two-point segment `start → goal` at height `z`.
    pub fn straight(start: Vec2, goal: Vec2, z: f64) -> Self {
        Self {
            waypoints: vec![start.with_z(z), goal.with_z(z)],
        }
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Indices `i` where waypoint `i` repeats waypoint `i - 1`. Allowed, but worth flagging.
    pub fn consecutive_duplicates(&self) -> Vec<usize> {
        self.waypoints
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] == w[1])
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Inserts evenly spaced points so no segment is longer than `max_spacing`.
    /// Original waypoints are kept.
    pub fn resampled(&self, max_spacing: f64) -> Result<Trajectory, ContextError> {
        if !(max_spacing > 0.0 && max_spacing.is_finite()) {
            return Err(ContextError::InvalidSpacing(max_spacing));
        }
        let mut out = vec![self.waypoints[0]];
        for pair in self.waypoints.windows(2) {
            let len = pair[0].distance(&pair[1]);
            let pieces = (len / max_spacing).ceil().max(1.0) as usize;
            for k in 1..=pieces {
                out.push(pair[0].lerp(&pair[1], k as f64 / pieces as f64));
            }
        }
        Ok(Trajectory { waypoints: out })
    }

    pub fn reversed(&self) -> Trajectory {
        let mut waypoints = self.waypoints.clone();
        waypoints.reverse();
        Trajectory { waypoints }
    }
}

/// Search radius around each waypoint, meters. Always positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QueryRadius(f64);

impl QueryRadius {
    pub fn new(radius: f64) -> Result<Self, ContextError> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Self(radius))
        } else {
            Err(ContextError::InvalidRadius(radius))
        }
    }

    pub fn meters(&self) -> f64 {
        self.0
    }
}

impl Default for QueryRadius {
    fn default() -> Self {
        Self(DEFAULT_QUERY_RADIUS_M)
    }
}

impl TryFrom<f64> for QueryRadius {
    type Error = ContextError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        QueryRadius::new(value)
    }
}

impl From<QueryRadius> for f64 {
    fn from(r: QueryRadius) -> Self {
        r.0
    }
}

/// Objects within `radius` of any waypoint, ordered by the first waypoint that
/// reaches them and then by id.
pub fn relevant_objects(
    graph: &SceneGraph,
    trajectory: &Trajectory,
    radius: QueryRadius,
) -> Vec<String> {
    let mut first_hit: Vec<(usize, &str)> = Vec::new();
    for node in &graph.nodes {
        let hit = trajectory
            .waypoints
            .iter()
            .position(|p| distance_to_object(p, node) <= radius.meters());
        if let Some(i) = hit {
            first_hit.push((i, node.id.as_str()));
        }
    }
    first_hit.sort();
    first_hit.into_iter().map(|(_, id)| id.to_string()).collect()
}

/// Subgraph on `ids`, extended with every human related to one of them.
/// Keeps every relation whose endpoints both survive.
pub fn induce_partial_graph<S: AsRef<str>>(
    graph: &SceneGraph,
    ids: &[S],
) -> Result<SceneGraph, ContextError> {
    let mut keep: HashSet<&str> = HashSet::new();
    for id in ids {
        let id = id.as_ref();
        let node = graph
            .node(id)
            .ok_or_else(|| ContextError::UnknownId(id.to_string()))?;
        keep.insert(node.id.as_str());
    }
    let humans: Vec<&str> = graph
        .relations
        .iter()
        .filter_map(|r| {
            if keep.contains(r.tail.as_str()) && graph.is_human(&r.head) {
                Some(r.head.as_str())
            } else if keep.contains(r.head.as_str()) && graph.is_human(&r.tail) {
                Some(r.tail.as_str())
            } else {
                None
            }
        })
        .collect();
    keep.extend(humans);

    let nodes = graph
        .nodes
        .iter()
        .filter(|n| keep.contains(n.id.as_str()))
        .cloned()
        .collect();
    let relations = graph
        .relations
        .iter()
        .filter(|r| keep.contains(r.head.as_str()) && keep.contains(r.tail.as_str()))
        .cloned()
        .collect();
    Ok(SceneGraph::new(nodes, relations))
}

/// One relation as seen from the described object. When `inverted` is set the
/// object is the tail and `entity` names the head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTuple {
    pub name: String,
    pub entity: String,
    pub inverted: bool,
}

/// Record fed to assessors for each relevant object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDescription {
    pub object_id: String,
    pub object_tag: String,
    pub bbox_center: Vec3,
    pub bbox_extent: Vec3,
    pub affordances: BTreeSet<String>,
    pub attributes: BTreeSet<String>,
    pub relations: Vec<RelationTuple>,
}

pub fn describe_object(graph: &SceneGraph, id: &str) -> Result<ObjectDescription, ContextError> {
    let node = graph
        .node(id)
        .ok_or_else(|| ContextError::UnknownId(id.to_string()))?;

    let mut tag_counts: HashMap<&str, usize> = HashMap::new();
    for n in &graph.nodes {
        *tag_counts.entry(n.tag.as_str()).or_default() += 1;
    }
    // Tags name entities unless two nodes share one; then the id disambiguates.
    let entity = |other: &str| -> String {
        match graph.node(other) {
            Some(n) if tag_counts[n.tag.as_str()] > 1 => format!("{} ({})", n.tag, n.id),
            Some(n) => n.tag.clone(),
            None => other.to_string(),
        }
    };

    let outgoing = graph
        .relations
        .iter()
        .filter(|r| r.head == id)
        .map(|r| RelationTuple {
            name: r.name.clone(),
            entity: entity(&r.tail),
            inverted: false,
        });
    let incoming = graph
        .relations
        .iter()
        .filter(|r| r.tail == id)
        .map(|r| RelationTuple {
            name: r.name.clone(),
            entity: entity(&r.head),
            inverted: true,
        });

    Ok(ObjectDescription {
        object_id: node.id.clone(),
        object_tag: node.tag.clone(),
        bbox_center: node.bbox_center,
        bbox_extent: node.bbox_extent,
        affordances: node.affordances.clone(),
        attributes: node.attributes.clone(),
        relations: outgoing.chain(incoming).collect(),
    })
}

/// Canonical text block: object descriptions (sorted by id, one JSON line
/// each), then waypoints to 3 decimals, then preferences verbatim.
pub fn render_context_text(
    partial: &SceneGraph,
    trajectory: &Trajectory,
    preferences: &[String],
) -> String {
    let mut ids: Vec<&str> = partial.ids().collect();
    ids.sort_unstable();
    ids.dedup();

    let mut out = String::from("OBJECTS\n");
    if ids.is_empty() {
        out.push_str("(none)\n");
    }
    for id in ids {
        let desc = describe_object(partial, id).expect("id taken from the graph");
        out.push_str(&serde_json::to_string(&desc).expect("descriptions serialize"));
        out.push('\n');
    }

    out.push_str("\nTRAJECTORY\n");
    for (i, p) in trajectory.waypoints().iter().enumerate() {
        let _ = writeln!(out, "p{} = ({:.3}, {:.3}, {:.3})", i + 1, p.x(), p.y(), p.z());
    }

    out.push_str("\nPREFERENCES\n");
    if preferences.is_empty() {
        out.push_str("(none)\n");
    }
    for pref in preferences {
        let _ = writeln!(out, "- {pref}");
    }
    out
}
