//! Deterministic stand-in for the LLM assessor.
//!
//! The rules do not try to reproduce any particular model's numbers. They
//! encode the orderings a human-aware assessor should produce: a human
//! outweighs every object, an object a human is using becomes costly, and an
//! empty seat only looks occupied when the graph gives no hint of where the
//! human actually sits.
//!
//! Rules run in order, each overwriting `(cost, clearance)`:
//!
//! 1. every relevant object gets `(1, 0)`;
//! 2. humans get `(5, 2)`;
//! 3. if humans exist but no relation touches a human: humans `(10, 2)`,
//!    sittable objects `(3, 1)`, large beds `(2, 0.5)`;
//! 4. tails of a human spatial relation `(3, 1.5)`; tails of a human activity
//!    relation `(2, 1)` unless already a spatial tail;
//! 5. while some human is seated, sittable objects unrelated to any human go
//!    back to `(1, 0)`;
//! 6. a preference about not disturbing or watching keeps humans dominant:
//!    their cost is scaled by [`PREFERENCE_HUMAN_FACTOR`], never below the
//!    value rules 2–3 gave them nor below any object's cost.

use std::collections::{BTreeMap, BTreeSet};

use super::{AssessRequest, Assessment, Assessor, AssessorError, CostClearance, Provenance};
use crate::scene_graph::{RelationKind, SceneGraph};
use crate::trajectory_context::Trajectory;

pub const SITTABLE_TAGS: &[&str] = &["bed", "armchair", "chair", "sofa"];
pub const SIT_AFFORDANCE: &str = "sit";

/// Ground-plane area (m²) above which a bed counts as large.
pub const LARGE_FOOTPRINT_M2: f64 = 1.5;

pub const PREFERENCE_HUMAN_FACTOR: f64 = 1.0;
pub const PREFERENCE_KEYWORDS: &[&str] = &["don't disturb", "do not disturb", "watching"];

const BASE: CostClearance = CostClearance::raw(1.0, 0.0);
const HUMAN: CostClearance = CostClearance::raw(5.0, 2.0);
const HUMAN_UNRELATED: CostClearance = CostClearance::raw(10.0, 2.0);
const SEAT_MAYBE_USED: CostClearance = CostClearance::raw(3.0, 1.0);
const LARGE_BED_MAYBE_USED: CostClearance = CostClearance::raw(2.0, 0.5);
const SPATIAL_TAIL: CostClearance = CostClearance::raw(3.0, 1.5);
const ACTIVITY_TAIL: CostClearance = CostClearance::raw(2.0, 1.0);

fn is_sittable(graph: &SceneGraph, id: &str) -> bool {
    graph.node(id).is_some_and(|n| {
        !n.is_human()
            && (n.affordances.contains(SIT_AFFORDANCE) || SITTABLE_TAGS.contains(&n.tag.as_str()))
    })
}

fn is_large_bed(graph: &SceneGraph, id: &str) -> bool {
    graph
        .node(id)
        .is_some_and(|n| n.tag == "bed" && n.aabb().footprint().area() >= LARGE_FOOTPRINT_M2)
}

pub fn rule_based_assess(
    partial: &SceneGraph,
    _trajectory: &Trajectory,
    relevant: &[String],
    preferences: &[String],
) -> Assessment {
    let mut entries: BTreeMap<String, CostClearance> =
        relevant.iter().map(|id| (id.clone(), BASE)).collect();
    let is_human = |id: &str| partial.is_human(id);
    let any_human = partial.humans().next().is_some();
    let human_edges: Vec<_> = partial
        .relations
        .iter()
        .filter(|r| is_human(&r.head) || is_human(&r.tail))
        .collect();

    let mut human_floor = HUMAN.cost;

    // 2
    for (id, cc) in entries.iter_mut() {
        if is_human(id) {
            *cc = HUMAN;
        }
    }

    // 3
    if any_human && human_edges.is_empty() {
        human_floor = HUMAN_UNRELATED.cost;
        for (id, cc) in entries.iter_mut() {
            if is_human(id) {
                *cc = HUMAN_UNRELATED;
            } else if is_large_bed(partial, id) {
                *cc = LARGE_BED_MAYBE_USED;
            } else if is_sittable(partial, id) {
                *cc = SEAT_MAYBE_USED;
            }
        }
    }

    // 4
    let spatial_tails: BTreeSet<&str> = human_edges
        .iter()
        .filter(|r| is_human(&r.head) && r.kind == RelationKind::Spatial)
        .map(|r| r.tail.as_str())
        .collect();
    let activity_tails: BTreeSet<&str> = human_edges
        .iter()
        .filter(|r| is_human(&r.head) && r.kind == RelationKind::Activity)
        .map(|r| r.tail.as_str())
        .collect();
    for (id, cc) in entries.iter_mut() {
        if is_human(id) {
            continue;
        }
        if spatial_tails.contains(id.as_str()) {
            *cc = SPATIAL_TAIL;
        } else if activity_tails.contains(id.as_str()) {
            *cc = ACTIVITY_TAIL;
        }
    }

    // 5
    let seated = human_edges.iter().any(|r| {
        is_human(&r.head) && r.kind == RelationKind::Spatial && r.name.to_lowercase().contains("sit")
    });
    if seated {
        let related: BTreeSet<&str> = human_edges
            .iter()
            .flat_map(|r| [r.head.as_str(), r.tail.as_str()])
            .collect();
        for (id, cc) in entries.iter_mut() {
            if is_sittable(partial, id) && !related.contains(id.as_str()) {
                *cc = BASE;
            }
        }
    }

    // 6
    let matched: Vec<&str> = PREFERENCE_KEYWORDS
        .iter()
        .copied()
        .filter(|k| preferences.iter().any(|p| p.to_lowercase().contains(k)))
        .collect();
    if !matched.is_empty() {
        let max_static = entries
            .iter()
            .filter(|(id, _)| !is_human(id))
            .map(|(_, cc)| cc.cost)
            .fold(1.0, f64::max);
        for (id, cc) in entries.iter_mut() {
            if is_human(id) {
                cc.cost = (cc.cost * PREFERENCE_HUMAN_FACTOR)
                    .max(human_floor)
                    .max(max_static);
            }
        }
    }

    let mut provenance = Provenance::new("rules")
        .with("large_footprint_m2", LARGE_FOOTPRINT_M2.to_string());
    if !matched.is_empty() {
        provenance = provenance.with("preference_keywords", matched.join(","));
    }
    Assessment {
        entries,
        provenance,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleAssessor;

impl Assessor for RuleAssessor {
    fn name(&self) -> &str {
        "rules"
    }

    fn assess(&self, request: &AssessRequest<'_>) -> Result<Assessment, AssessorError> {
        Ok(rule_based_assess(
            request.partial,
            request.trajectory,
            request.relevant,
            request.preferences,
        ))
    }
}
