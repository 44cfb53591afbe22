//! Inserting humans into static scene graphs and deriving the three ablation
//! variants (no human, human without relations, human with relations).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::scene_graph::{
    validate_scene, ObjectNode, Relation, RelationKind, SceneGraph, Violation, HUMAN_TAG,
};

/// A `(verb, target id)` pair attached to a human.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerbTarget {
    pub verb: String,
    pub target: String,
}

impl VerbTarget {
    pub fn new(verb: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            verb: verb.into(),
            target: target.into(),
        }
    }
}

/// A human to place in a scene, with its spatial and activity relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanSpec {
    pub id: String,
    pub bbox_center: Vec3,
    pub bbox_extent: Vec3,
    #[serde(default)]
    pub spatial_relations: Vec<VerbTarget>,
    #[serde(default)]
    pub activity_relations: Vec<VerbTarget>,
}

impl HumanSpec {
    pub fn relation_count(&self) -> usize {
        self.spatial_relations.len() + self.activity_relations.len()
    }

    fn relations(&self) -> impl Iterator<Item = Relation> + '_ {
        let spatial = self
            .spatial_relations
            .iter()
            .map(|vt| Relation::new(&vt.verb, &self.id, &vt.target, RelationKind::Spatial));
        let activity = self
            .activity_relations
            .iter()
            .map(|vt| Relation::new(&vt.verb, &self.id, &vt.target, RelationKind::Activity));
        spatial.chain(activity)
    }
}

/// Graph variant used in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    NoHuman,
    HumanNoRelations,
    HumanWithRelations,
}

impl Condition {
    pub const ALL: [Condition; 3] = [
        Condition::NoHuman,
        Condition::HumanNoRelations,
        Condition::HumanWithRelations,
    ];

    /// Machine key, as used in scenario and fixture files.
    pub fn key(&self) -> &'static str {
        match self {
            Condition::NoHuman => "no_human",
            Condition::HumanNoRelations => "human_no_relations",
            Condition::HumanWithRelations => "human_with_relations",
        }
    }

    /// Row label used in comparison tables.
    pub fn label(&self) -> &'static str {
        match self {
            Condition::NoHuman => "No Human",
            Condition::HumanNoRelations => "Human w/out relations",
            Condition::HumanWithRelations => "Human w/ relations",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.key() == s)
            .ok_or_else(|| format!("unknown condition \"{s}\""))
    }
}

/// How [`Condition::HumanNoRelations`] strips edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantOptions {
    /// Keep the humans' spatial relations and drop only activity relations.
    pub keep_spatial: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("id \"{0}\" already exists in the scene")]
    DuplicateId(String),
    #[error("relation target \"{0}\" does not exist")]
    MissingTarget(String),
    #[error("relation target \"{0}\" is a human; targets must be objects")]
    HumanTarget(String),
    #[error("empty verb in relation to \"{0}\"")]
    EmptyVerb(String),
    #[error("relation rejected: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Returns a copy of `graph` with a new human node and its relations.
pub fn insert_human(graph: &SceneGraph, spec: &HumanSpec) -> Result<SceneGraph, AugmentError> {
    if graph.contains(&spec.id) {
        return Err(AugmentError::DuplicateId(spec.id.clone()));
    }
    for vt in spec.spatial_relations.iter().chain(&spec.activity_relations) {
        match graph.node(&vt.target) {
            None => return Err(AugmentError::MissingTarget(vt.target.clone())),
            Some(n) if n.is_human() => return Err(AugmentError::HumanTarget(vt.target.clone())),
            Some(_) => {}
        }
        if vt.verb.trim().is_empty() {
            return Err(AugmentError::EmptyVerb(vt.target.clone()));
        }
    }

    let mut out = graph.clone();
    out.nodes.push(ObjectNode::new(
        &spec.id,
        HUMAN_TAG,
        spec.bbox_center,
        spec.bbox_extent,
    ));
    out.relations.extend(spec.relations());

    let violations = validate_scene(&out);
    if !violations.is_empty() {
        return Err(AugmentError::Invalid(violations));
    }
    Ok(out)
}

/// Adds one relation. Re-adding an existing `(name, head, tail)` triple is a no-op.
pub fn attach_relation(graph: &SceneGraph, relation: Relation) -> Result<SceneGraph, AugmentError> {
    if graph.has_relation(&relation.name, &relation.head, &relation.tail) {
        return Ok(graph.clone());
    }
    let mut out = graph.clone();
    out.relations.push(relation);
    let violations = validate_scene(&out);
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(AugmentError::Invalid(violations))
    }
}

/// Builds the graph seen under `condition`.
pub fn derive_condition_variant(
    graph: &SceneGraph,
    condition: Condition,
    options: VariantOptions,
) -> SceneGraph {
    match condition {
        Condition::HumanWithRelations => graph.clone(),
        Condition::NoHuman => {
            let nodes: Vec<ObjectNode> =
                graph.nodes.iter().filter(|n| !n.is_human()).cloned().collect();
            let relations = graph
                .relations
                .iter()
                .filter(|r| !graph.is_human(&r.head) && !graph.is_human(&r.tail))
                .cloned()
                .collect();
            SceneGraph::new(nodes, relations)
        }
        Condition::HumanNoRelations => {
            let relations = graph
                .relations
                .iter()
                .filter(|r| {
                    let human_edge = graph.is_human(&r.head) || graph.is_human(&r.tail);
                    !human_edge || (options.keep_spatial && r.kind != RelationKind::Activity)
                })
                .cloned()
                .collect();
            SceneGraph::new(graph.nodes.clone(), relations)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> SceneGraph {
        SceneGraph::new(
            vec![
                ObjectNode::new("bed", "bed", Vec3::new(0.0, 0.0, 0.25), Vec3::new(2.0, 1.6, 0.5)),
                ObjectNode::new("tv", "tv", Vec3::new(3.0, 0.0, 0.9), Vec3::new(0.2, 1.2, 0.7)),
                ObjectNode::new(
                    "armchair",
                    "armchair",
                    Vec3::new(0.0, -2.0, 0.45),
                    Vec3::new(0.9, 0.9, 0.9),
                ),
                ObjectNode::new("book", "book", Vec3::new(0.0, -2.0, 0.95), Vec3::new(0.2, 0.3, 0.05)),
            ],
            vec![Relation::new("next to", "armchair", "bed", RelationKind::Spatial)],
        )
    }

    fn sitting_watching() -> HumanSpec {
        HumanSpec {
            id: "human_1".into(),
            bbox_center: Vec3::new(0.3, 0.0, 0.75),
            bbox_extent: Vec3::new(0.5, 0.5, 1.0),
            spatial_relations: vec![VerbTarget::new("sitting on", "bed")],
            activity_relations: vec![VerbTarget::new("watching", "tv")],
        }
    }

    #[test]
    fn insert_sitting_watching_human() {
        let base = scene();
        let g = insert_human(&base, &sitting_watching()).unwrap();
        assert!(g.node("human_1").unwrap().is_human());
        assert!(g.relations.contains(&Relation::new(
            "sitting on",
            "human_1",
            "bed",
            RelationKind::Spatial
        )));
        assert!(g.relations.contains(&Relation::new(
            "watching",
            "human_1",
            "tv",
            RelationKind::Activity
        )));
        assert_eq!(g.nodes.len(), base.nodes.len() + 1);
        assert_eq!(g.relations.len(), base.relations.len() + 2);
        assert_eq!(base, scene());
    }

    #[test]
    fn insert_isolated_human() {
        let mut spec = sitting_watching();
        spec.spatial_relations.clear();
        spec.activity_relations.clear();
        let g = insert_human(&scene(), &spec).unwrap();
        assert_eq!(g.degree("human_1"), 0);
    }

    #[test]
    fn insert_errors() {
        let mut spec = sitting_watching();
        spec.activity_relations.push(VerbTarget::new("reading", "ghost"));
        assert_eq!(
            insert_human(&scene(), &spec),
            Err(AugmentError::MissingTarget("ghost".into()))
        );

        let mut spec = sitting_watching();
        spec.id = "bed".into();
        assert_eq!(
            insert_human(&scene(), &spec),
            Err(AugmentError::DuplicateId("bed".into()))
        );

        let mut spec = sitting_watching();
        spec.spatial_relations[0].verb = " ".into();
        assert_eq!(
            insert_human(&scene(), &spec),
            Err(AugmentError::EmptyVerb("bed".into()))
        );
    }

    #[test]
    fn attach_adds_and_is_idempotent() {
        let g = insert_human(&scene(), &sitting_watching()).unwrap();
        let added = attach_relation(
            &g,
            Relation::new("standing next to", "human_1", "tv", RelationKind::Spatial),
        )
        .unwrap();
        assert_eq!(added.relations.len(), g.relations.len() + 1);

        let same = attach_relation(
            &g,
            Relation::new("watching", "human_1", "tv", RelationKind::Activity),
        )
        .unwrap();
        assert_eq!(same, g);
    }

    #[test]
    fn attach_rejects_non_human_activity() {
        let err = attach_relation(
            &scene(),
            Relation::new("reading", "armchair", "book", RelationKind::Activity),
        )
        .unwrap_err();
        match err {
            AugmentError::Invalid(v) => assert_eq!(v[0].rule.name(), "activity head must be human"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn condition_variants() {
        let g = insert_human(&scene(), &sitting_watching()).unwrap();

        let none = derive_condition_variant(&g, Condition::NoHuman, VariantOptions::default());
        assert!(none.humans().next().is_none());
        assert_eq!(none, scene());

        let bare =
            derive_condition_variant(&g, Condition::HumanNoRelations, VariantOptions::default());
        assert!(bare.contains("human_1"));
        assert_eq!(bare.degree("human_1"), 0);
        assert_eq!(bare.relations.len(), 1);

        let keep = derive_condition_variant(
            &g,
            Condition::HumanNoRelations,
            VariantOptions { keep_spatial: true },
        );
        assert!(keep.has_relation("sitting on", "human_1", "bed"));
        assert!(!keep.has_relation("watching", "human_1", "tv"));

        let full =
            derive_condition_variant(&g, Condition::HumanWithRelations, VariantOptions::default());
        assert_eq!(full, g);
    }

    #[test]
    fn condition_keys_roundtrip() {
        for c in Condition::ALL {
            assert_eq!(c.key().parse::<Condition>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.key()));
        }
        assert!("sometimes_human".parse::<Condition>().is_err());
    }
}
