//! In-memory 3D semantic scene graph: object nodes, labeled relations, the
//! JSON file format, validation and the box-distance queries used for
//! relevance search.
//!
//! Scene file layout (UTF-8 JSON):
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "nodes": [
//!     {"id": "bed", "tag": "bed", "bbox_center": [1.5, 3.5, 0.25],
//!      "bbox_extent": [2.0, 1.6, 0.5], "affordances": ["sit", "lie"], "attributes": ["soft"]}
//!   ],
//!   "relations": [
//!     {"name": "next to", "head": "armchair", "tail": "bed", "kind": "spatial"}
//!   ]
//! }
//! ```
//!
//! `bbox_extent` holds full side lengths, not half-extents. `schema_version`,
//! `relations`, `affordances` and `attributes` are optional on input and always
//! written on output.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{Aabb, Vec3};

/// Tag that marks a node as a human.
pub const HUMAN_TAG: &str = "human";

/// Scene file version written by [`to_json`].
pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: String,
    pub tag: String,
    pub bbox_center: Vec3,
    /// Full side lengths in meters.
    pub bbox_extent: Vec3,
    #[serde(default)]
    pub affordances: BTreeSet<String>,
    #[serde(default)]
    pub attributes: BTreeSet<String>,
}

impl ObjectNode {
    pub fn new(id: impl Into<String>, tag: impl Into<String>, center: Vec3, extent: Vec3) -> Self {
        Self {
            id: id.into(),
            tag: tag.into(),
            bbox_center: center,
            bbox_extent: extent,
            affordances: BTreeSet::new(),
            attributes: BTreeSet::new(),
        }
    }

    pub fn with_affordances<I, S>(mut self, items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.affordances = items.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_attributes<I, S>(mut self, items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.attributes = items.into_iter().map(Into::into).collect();
        self
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::new(self.bbox_center, self.bbox_extent)
    }

    pub fn is_human(&self) -> bool {
        self.tag == HUMAN_TAG
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Spatial,
    Comparative,
    Activity,
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationKind::Spatial => "spatial",
            RelationKind::Comparative => "comparative",
            RelationKind::Activity => "activity",
        })
    }
}

/// Directed labeled edge `head --name--> tail`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub head: String,
    pub tail: String,
    pub kind: RelationKind,
}

impl Relation {
    pub fn new(
        name: impl Into<String>,
        head: impl Into<String>,
        tail: impl Into<String>,
        kind: RelationKind,
    ) -> Self {
        Self {
            name: name.into(),
            head: head.into(),
            tail: tail.into(),
            kind,
        }
    }

    /// Identity of the edge; `kind` is not part of it.
    pub fn triple(&self) -> (&str, &str, &str) {
        (&self.name, &self.head, &self.tail)
    }

    pub fn touches(&self, id: &str) -> bool {
        self.head == id || self.tail == id
    }
}

/// Object-level scene graph. Node order is preserved from the source document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<ObjectNode>,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

impl SceneGraph {
    pub fn new(nodes: Vec<ObjectNode>, relations: Vec<Relation>) -> Self {
        Self { nodes, relations }
    }

    pub fn node(&self, id: &str) -> Option<&ObjectNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.node(id).is_some()
    }

    pub fn is_human(&self, id: &str) -> bool {
        self.node(id).is_some_and(ObjectNode::is_human)
    }

    pub fn humans(&self) -> impl Iterator<Item = &ObjectNode> {
        self.nodes.iter().filter(|n| n.is_human())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.id.as_str())
    }

    pub fn has_relation(&self, name: &str, head: &str, tail: &str) -> bool {
        self.relations
            .iter()
            .any(|r| r.triple() == (name, head, tail))
    }

    /// Relations with at least one human endpoint.
    pub fn human_relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations
            .iter()
            .filter(move |r| self.is_human(&r.head) || self.is_human(&r.tail))
    }

    /// Number of relations incident to `id`.
    pub fn degree(&self, id: &str) -> usize {
        self.relations.iter().filter(|r| r.touches(id)).count()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    EmptyId,
    DuplicateId,
    NonPositiveExtent,
    NonFiniteGeometry,
    SelfRelation,
    DanglingEndpoint,
    ActivityHeadNotHuman,
    DuplicateRelation,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::EmptyId => "empty id",
            Rule::DuplicateId => "duplicate id",
            Rule::NonPositiveExtent => "non-positive extent",
            Rule::NonFiniteGeometry => "non-finite geometry",
            Rule::SelfRelation => "relation head equals tail",
            Rule::DanglingEndpoint => "dangling endpoint",
            Rule::ActivityHeadNotHuman => "activity head must be human",
            Rule::DuplicateRelation => "duplicate relation",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One broken invariant, with the ids involved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub ids: Vec<String>,
}

impl Violation {
    pub fn new(rule: Rule, ids: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            rule,
            ids: ids.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.rule, self.ids.join(", "))
    }
}

/// Checks node and relation invariants. Returns an empty list iff the graph is valid.
pub fn validate_scene(graph: &SceneGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut tags: HashMap<&str, &str> = HashMap::new();

    for node in &graph.nodes {
        if node.id.is_empty() {
            out.push(Violation::new(Rule::EmptyId, [node.tag.as_str()]));
        }
        if !seen.insert(node.id.as_str()) {
            out.push(Violation::new(Rule::DuplicateId, [node.id.as_str()]));
        }
        tags.entry(node.id.as_str()).or_insert(node.tag.as_str());
        if !node.bbox_center.is_finite() || !node.bbox_extent.is_finite() {
            out.push(Violation::new(Rule::NonFiniteGeometry, [node.id.as_str()]));
        } else if node.bbox_extent.0.iter().any(|&e| e <= 0.0) {
            out.push(Violation::new(Rule::NonPositiveExtent, [node.id.as_str()]));
        }
    }

    let mut triples: HashSet<(&str, &str, &str)> = HashSet::new();
    for rel in &graph.relations {
        let ids = [rel.head.as_str(), rel.tail.as_str()];
        if rel.head == rel.tail {
            out.push(Violation::new(Rule::SelfRelation, ids));
        }
        for end in ids {
            if !tags.contains_key(end) {
                out.push(Violation::new(Rule::DanglingEndpoint, [end]));
            }
        }
        if rel.kind == RelationKind::Activity
            && tags.get(rel.head.as_str()).is_some_and(|t| *t != HUMAN_TAG)
        {
            out.push(Violation::new(Rule::ActivityHeadNotHuman, ids));
        }
        if !triples.insert(rel.triple()) {
            out.push(Violation::new(Rule::DuplicateRelation, ids));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Geometric queries
// ---------------------------------------------------------------------------

/// Distance from `point` to the node's box; 0 on or inside it.
pub fn distance_to_object(point: &Vec3, node: &ObjectNode) -> f64 {
    node.aabb().distance(point)
}

/// Ids of all nodes whose box lies within `radius` of `point`.
pub fn objects_within_radius(
    graph: &SceneGraph,
    point: &Vec3,
    radius: f64,
) -> Result<BTreeSet<String>, SceneError> {
    if radius.is_nan() || radius < 0.0 {
        return Err(SceneError::InvalidRadius(radius));
    }
    Ok(graph
        .nodes
        .iter()
        .filter(|n| distance_to_object(point, n) <= radius)
        .map(|n| n.id.clone())
        .collect())
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene document is not valid UTF-8")]
    NotUtf8,
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: missing required field \"{field}\"")]
    MissingField { path: String, field: String },
    #[error("{path}: unknown key")]
    UnknownKey { path: String },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported schema_version {0}")]
    UnsupportedVersion(u32),
    #[error("{path}: duplicate id \"{id}\"")]
    DuplicateId { path: String, id: String },
    #[error("{path}: dangling relation endpoint \"{id}\"")]
    DanglingEndpoint { path: String, id: String },
    #[error("invalid scene: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("radius must be a non-negative number, got {0}")]
    InvalidRadius(f64),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reject unknown keys instead of reporting them as warnings.
    pub strict: bool,
}

/// A successfully loaded scene plus non-fatal findings (unknown keys in lenient mode).
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub graph: SceneGraph,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    #[serde(default = "default_version")]
    schema_version: u32,
    nodes: Vec<ObjectNode>,
    #[serde(default)]
    relations: Vec<Relation>,
}

fn default_version() -> u32 {
    SCENE_SCHEMA_VERSION
}

const TOP_KEYS: &[&str] = &["schema_version", "nodes", "relations"];
const NODE_KEYS: &[&str] = &["id", "tag", "bbox_center", "bbox_extent", "affordances", "attributes"];
const NODE_REQUIRED: &[&str] = &["id", "tag", "bbox_center", "bbox_extent"];
const RELATION_KEYS: &[&str] = &["name", "head", "tail", "kind"];

/// Parses and validates a scene document.
pub fn load_scene(document: &[u8], options: LoadOptions) -> Result<LoadedScene, SceneError> {
    let text = std::str::from_utf8(document).map_err(|_| SceneError::NotUtf8)?;
    let value: Value = serde_json::from_str(text).map_err(|e| SceneError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let unknown = check_shape(&value)?;
    let warnings = if options.strict {
        if let Some(path) = unknown.into_iter().next() {
            return Err(SceneError::UnknownKey { path });
        }
        Vec::new()
    } else {
        unknown
            .into_iter()
            .map(|p| format!("{p}: unknown key ignored"))
            .collect()
    };

    let file: SceneFile = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        SceneError::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    if file.schema_version != SCENE_SCHEMA_VERSION {
        return Err(SceneError::UnsupportedVersion(file.schema_version));
    }
    let graph = SceneGraph::new(file.nodes, file.relations);

    let mut seen = HashSet::new();
    for (i, node) in graph.nodes.iter().enumerate() {
        if !seen.insert(node.id.as_str()) {
            return Err(SceneError::DuplicateId {
                path: format!("nodes[{i}].id"),
                id: node.id.clone(),
            });
        }
    }
    for (i, rel) in graph.relations.iter().enumerate() {
        for (field, id) in [("head", &rel.head), ("tail", &rel.tail)] {
            if !seen.contains(id.as_str()) {
                return Err(SceneError::DanglingEndpoint {
                    path: format!("relations[{i}].{field}"),
                    id: id.clone(),
                });
            }
        }
    }

    let violations = validate_scene(&graph);
    if !violations.is_empty() {
        return Err(SceneError::Invalid(violations));
    }
    Ok(LoadedScene { graph, warnings })
}

/// Walks the raw document: fails on missing required keys, returns the paths of unknown keys.
fn check_shape(value: &Value) -> Result<Vec<String>, SceneError> {
    let mut unknown = Vec::new();
    let top = value.as_object().ok_or_else(|| SceneError::Schema {
        path: ".".into(),
        message: "top level must be an object".into(),
    })?;
    collect_unknown(top, TOP_KEYS, "", &mut unknown);
    let nodes = top.get("nodes").ok_or_else(|| SceneError::MissingField {
        path: ".".into(),
        field: "nodes".into(),
    })?;

    if let Some(nodes) = nodes.as_array() {
        for (i, node) in nodes.iter().enumerate() {
            if let Some(obj) = node.as_object() {
                let path = format!("nodes[{i}]");
                require(obj, NODE_REQUIRED, &path)?;
                collect_unknown(obj, NODE_KEYS, &path, &mut unknown);
            }
        }
    }
    if let Some(rels) = top.get("relations").and_then(Value::as_array) {
        for (i, rel) in rels.iter().enumerate() {
            if let Some(obj) = rel.as_object() {
                let path = format!("relations[{i}]");
                require(obj, RELATION_KEYS, &path)?;
                collect_unknown(obj, RELATION_KEYS, &path, &mut unknown);
            }
        }
    }
    Ok(unknown)
}

fn require(
    obj: &serde_json::Map<String, Value>,
    keys: &[&str],
    path: &str,
) -> Result<(), SceneError> {
    match keys.iter().find(|k| !obj.contains_key(**k)) {
        Some(field) => Err(SceneError::MissingField {
            path: path.to_string(),
            field: field.to_string(),
        }),
        None => Ok(()),
    }
}

fn collect_unknown(
    obj: &serde_json::Map<String, Value>,
    known: &[&str],
    path: &str,
    out: &mut Vec<String>,
) {
    for key in obj.keys() {
        if !known.contains(&key.as_str()) {
            out.push(if path.is_empty() {
                key.clone()
            } else {
                format!("{path}.{key}")
            });
        }
    }
}

/// Serializes a graph in the scene file format.
pub fn to_json(graph: &SceneGraph) -> String {
    let file = SceneFile {
        schema_version: SCENE_SCHEMA_VERSION,
        nodes: graph.nodes.clone(),
        relations: graph.relations.clone(),
    };
    serde_json::to_string_pretty(&file).expect("scene graphs always serialize")
}
