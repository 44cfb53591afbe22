//! Scenario files, condition runs, reports and the condition comparison table.
//!
//! A scenario names a scene file, an optional human to insert, the graph
//! variants to run and the planning setup. [`run_scenario`] plans once per
//! variant and gathers everything into a [`RunReport`]; [`compare_conditions`]
//! turns a report into the cost (clearance) table per object.

pub mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_assessment::{
    assess, AssessError, AssessRequest, Assessment, Assessor, CompletionTransport, CostClearance,
    FixtureError, FixtureStore, HttpTransport, LlmAssessor, LlmError, ReplayAssessor, RetryPolicy,
    RuleAssessor,
};
use crate::cost_field::{ActivityZone, Bounds, Costmap, Falloff, ZoneConfig};
use crate::geometry::Vec2;
use crate::human_augmentation::{
    derive_condition_variant, insert_human, AugmentError, Condition, HumanSpec, VariantOptions,
};
use crate::planner::{iterate_plan, IterateError, IterationSetup, Path, DEFAULT_MAX_ROUNDS};
use crate::scene_graph::{load_scene, LoadOptions, SceneError, SceneGraph};
use crate::trajectory_context::{
    induce_partial_graph, relevant_objects, ContextError, QueryRadius, Trajectory,
    DEFAULT_RESAMPLE_SPACING_M,
};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const COMPARISON_SCHEMA_VERSION: u32 = 1;

/// Height of planned waypoints when the scenario does not set one.
pub const DEFAULT_WAYPOINT_Z: f64 = 0.5;

// ---------------------------------------------------------------------------
// Scenario file
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessorKind {
    Rules,
    Replay,
    Llm,
}

impl AssessorKind {
    pub fn key(&self) -> &'static str {
        match self {
            AssessorKind::Rules => "rules",
            AssessorKind::Replay => "replay",
            AssessorKind::Llm => "llm",
        }
    }
}

impl fmt::Display for AssessorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for AssessorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rules" => Ok(AssessorKind::Rules),
            "replay" => Ok(AssessorKind::Replay),
            "llm" => Ok(AssessorKind::Llm),
            other => Err(format!("unknown assessor \"{other}\" (expected rules, replay or llm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub min: Vec2,
    pub max: Vec2,
    pub resolution: f64,
}

impl MapSpec {
    pub fn bounds(&self) -> Bounds {
        Bounds::new(self.min, self.max)
    }

    fn contains(&self, p: &Vec2) -> bool {
        p.x() >= self.min.x() && p.x() <= self.max.x() && p.y() >= self.min.y() && p.y() <= self.max.y()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySettings {
    /// Fixture file, relative to the scenario file.
    pub fixtures: String,
    /// Scenario part of the fixture key; defaults to the scenario name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

fn default_max_attempts() -> u32 {
    RetryPolicy::default().max_attempts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSettings {
    pub model: String,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default)]
    pub temperature: f64,
}

fn default_waypoint_z() -> f64 {
    DEFAULT_WAYPOINT_Z
}

fn default_max_rounds() -> u32 {
    DEFAULT_MAX_ROUNDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// Scene file, relative to the scenario file.
    pub scene: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human: Option<HumanSpec>,
    pub conditions: Vec<Condition>,
    #[serde(default)]
    pub keep_spatial: bool,
    #[serde(default)]
    pub preferences: Vec<String>,
    pub start: Vec2,
    pub goal: Vec2,
    #[serde(default = "default_waypoint_z")]
    pub waypoint_z: f64,
    #[serde(default)]
    pub query_radius_m: QueryRadius,
    pub map: MapSpec,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    #[serde(default)]
    pub falloff: Falloff,
    /// Activity verb → cost and clearance of the zone between human and target.
    #[serde(default)]
    pub activity_zones: ZoneConfig,
    /// Objects shown as columns of the comparison table, in this order.
    #[serde(default)]
    pub focus_objects: Vec<String>,
    pub assessor: AssessorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<ReplaySettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmSettings>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported scenario schema_version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario =
            serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &FsPath) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(ScenarioError::UnsupportedVersion(self.schema_version));
        }
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if self.name.is_empty() {
            return invalid("name is empty".into());
        }
        if self.conditions.is_empty() {
            return invalid("conditions is empty".into());
        }
        let unique: BTreeSet<_> = self.conditions.iter().collect();
        if unique.len() != self.conditions.len() {
            return invalid("conditions repeat".into());
        }
        let r = self.map.resolution;
        if !(r.is_finite() && r > 0.0) {
            return invalid(format!("map.resolution must be positive, got {r}"));
        }
        if !(self.map.min.x() < self.map.max.x() && self.map.min.y() < self.map.max.y()) {
            return invalid("map.min must be below map.max on both axes".into());
        }
        for (which, p) in [("start", &self.start), ("goal", &self.goal)] {
            if !self.map.contains(p) {
                return invalid(format!("{which} ({}, {}) lies outside the map", p.x(), p.y()));
            }
        }
        if !self.waypoint_z.is_finite() {
            return invalid("waypoint_z must be finite".into());
        }
        if self.max_rounds == 0 {
            return invalid("max_rounds must be at least 1".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Overrides applied on top of the scenario file.
#[derive(Clone, Default)]
pub struct RunOptions {
    /// Reject unknown keys in the scene file.
    pub strict: bool,
    pub assessor: Option<AssessorKind>,
    /// Used instead of the HTTP client when the LLM assessor runs.
    pub transport: Option<Arc<dyn CompletionTransport>>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{role} file not found: {}", .path.display())]
    MissingFile { role: &'static str, path: PathBuf },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scene {}: {source}", .path.display())]
    Scene {
        path: PathBuf,
        #[source]
        source: SceneError,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("fixtures {}: {source}", .path.display())]
    Fixture {
        path: PathBuf,
        #[source]
        source: FixtureError,
    },
    #[error("inserting human: {0}")]
    Augment(#[from] AugmentError),
    #[error("assessor configuration: {0}")]
    Config(String),
    #[error("LLM assessor: {0}")]
    Llm(#[from] LlmError),
    #[error("condition {condition}, {source}")]
    Condition {
        condition: &'static str,
        #[source]
        source: IterateError,
    },
    #[error("condition {condition}, relevance: {source}")]
    Context {
        condition: &'static str,
        #[source]
        source: ContextError,
    },
    #[error("condition {condition}, assessment: {source}")]
    Assess {
        condition: &'static str,
        #[source]
        source: AssessError,
    },
}

enum AssessorSource {
    Rules,
    Replay {
        store: Arc<FixtureStore>,
        key: String,
    },
    Llm {
        transport: Arc<dyn CompletionTransport>,
        model: String,
        policy: RetryPolicy,
    },
}

impl AssessorSource {
    fn for_condition(&self, condition: Condition) -> Box<dyn Assessor> {
        match self {
            AssessorSource::Rules => Box::new(RuleAssessor),
            AssessorSource::Replay { store, key } => {
                Box::new(ReplayAssessor::new(store.clone(), key.clone(), condition))
            }
            AssessorSource::Llm {
                transport,
                model,
                policy,
            } => Box::new(LlmAssessor::new(
                Box::new(transport.clone()),
                model.clone(),
                *policy,
            )),
        }
    }
}

struct Prepared {
    scene: SceneGraph,
    kind: AssessorKind,
    source: AssessorSource,
}

fn existing(role: &'static str, base_dir: &FsPath, relative: &str) -> Result<PathBuf, RunError> {
    let path = base_dir.join(relative);
    if path.is_file() {
        Ok(path)
    } else {
        Err(RunError::MissingFile { role, path })
    }
}

fn read(path: &FsPath) -> Result<Vec<u8>, RunError> {
    std::fs::read(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads every referenced file and builds the augmented scene. Nothing is
/// planned until all inputs are known to exist and parse.
fn prepare(
    scenario: &Scenario,
    base_dir: &FsPath,
    options: &RunOptions,
) -> Result<Prepared, RunError> {
    scenario.validate()?;
    let scene_path = existing("scene", base_dir, &scenario.scene)?;
    let kind = options.assessor.unwrap_or(scenario.assessor);
    let source = match kind {
        AssessorKind::Rules => AssessorSource::Rules,
        AssessorKind::Replay => {
            let settings = scenario.replay.as_ref().ok_or_else(|| {
                RunError::Config("the replay assessor needs a \"replay\" section".into())
            })?;
            let path = existing("fixture", base_dir, &settings.fixtures)?;
            let text = String::from_utf8_lossy(&read(&path)?).into_owned();
            let store = FixtureStore::from_json(&text)
                .map_err(|source| RunError::Fixture { path, source })?;
            AssessorSource::Replay {
                store: Arc::new(store),
                key: settings.key.clone().unwrap_or_else(|| scenario.name.clone()),
            }
        }
        AssessorKind::Llm => {
            let settings = scenario.llm.as_ref().ok_or_else(|| {
                RunError::Config("the llm assessor needs an \"llm\" section".into())
            })?;
            let transport: Arc<dyn CompletionTransport> = match &options.transport {
                Some(t) => t.clone(),
                None => Arc::new(
                    HttpTransport::from_env(settings.model.clone())?
                        .with_temperature(settings.temperature),
                ),
            };
            AssessorSource::Llm {
                transport,
                model: settings.model.clone(),
                policy: RetryPolicy {
                    max_attempts: settings.max_attempts,
                },
            }
        }
    };

    let loaded = load_scene(
        &read(&scene_path)?,
        LoadOptions {
            strict: options.strict,
        },
    )
    .map_err(|source| RunError::Scene {
        path: scene_path.clone(),
        source,
    })?;
    let scene = match &scenario.human {
        Some(spec) => insert_human(&loaded.graph, spec)?,
        None => loaded.graph,
    };
    Ok(Prepared {
        scene,
        kind,
        source,
    })
}

fn variant(scenario: &Scenario, scene: &SceneGraph, condition: Condition) -> SceneGraph {
    derive_condition_variant(
        scene,
        condition,
        VariantOptions {
            keep_spatial: scenario.keep_spatial,
        },
    )
}

/// Length, cost and closest approach of one planned path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathStats {
    pub total_cost: f64,
    pub length_m: f64,
    /// Smallest ground-plane distance from a path point to each object's
    /// footprint, for every object of the augmented scene.
    pub min_distance_m: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distance_to_human_m: Option<f64>,
}

pub fn path_stats(path: &Path, scene: &SceneGraph) -> PathStats {
    let min_distance_m: BTreeMap<String, f64> = scene
        .nodes
        .iter()
        .map(|n| {
            let footprint = n.aabb().footprint();
            let d = path
                .polyline
                .iter()
                .map(|p| footprint.distance(p))
                .fold(f64::INFINITY, f64::min);
            (n.id.clone(), d)
        })
        .filter(|(_, d)| d.is_finite())
        .collect();
    let min_distance_to_human_m = scene
        .humans()
        .filter_map(|h| min_distance_m.get(&h.id).copied())
        .reduce(f64::min);
    PathStats {
        total_cost: path.total_cost,
        length_m: path.length_m,
        min_distance_m,
        min_distance_to_human_m,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionReport {
    pub condition: Condition,
    pub label: String,
    /// Objects the final assessment covers.
    pub relevant: Vec<String>,
    pub rounds: u32,
    pub converged: bool,
    pub assessment: Assessment,
    pub zones: Vec<ActivityZone>,
    pub path: Path,
    pub stats: PathStats,
    pub costmap: Costmap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: String,
    pub assessor: AssessorKind,
    pub start: Vec2,
    pub goal: Vec2,
    pub focus_objects: Vec<String>,
    /// Scene with the human inserted and all relations kept.
    pub scene: SceneGraph,
    pub conditions: Vec<ConditionReport>,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported report schema_version {0}")]
    UnsupportedVersion(u32),
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let report: RunReport =
            serde_path_to_error::deserialize(de).map_err(|e| ReportError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(ReportError::UnsupportedVersion(report.schema_version));
        }
        Ok(report)
    }

    pub fn condition(&self, condition: Condition) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == condition)
    }

    /// One line per condition: rounds, cost, length and closest human approach.
    pub fn summary_text(&self) -> String {
        let width = self.conditions.iter().map(|c| c.label.len()).max().unwrap_or(0);
        let mut out = format!("scenario {} (assessor {})\n", self.scenario, self.assessor);
        for c in &self.conditions {
            let human = c
                .stats
                .min_distance_to_human_m
                .map_or_else(|| "-".to_string(), |d| format!("{d:.3} m"));
            out.push_str(&format!(
                "{:<width$}  rounds {}{}  cost {:.4}  length {:.3} m  closest human {}\n",
                c.label,
                c.rounds,
                if c.converged { "" } else { " (not converged)" },
                c.stats.total_cost,
                c.stats.length_m,
                human,
            ));
        }
        out
    }
}

/// Plans the scenario once per condition. Conditions run in parallel; the
/// report lists them in the declared order.
pub fn run_scenario(
    scenario: &Scenario,
    base_dir: &FsPath,
    options: &RunOptions,
) -> Result<RunReport, RunError> {
    let prepared = prepare(scenario, base_dir, options)?;
    let setup = IterationSetup {
        start: scenario.start,
        goal: scenario.goal,
        waypoint_z: scenario.waypoint_z,
        radius: scenario.query_radius_m,
        preferences: scenario.preferences.clone(),
        bounds: scenario.map.bounds(),
        resolution: scenario.map.resolution,
        falloff: scenario.falloff,
        zones: scenario.activity_zones.clone(),
        max_rounds: scenario.max_rounds,
    };
    let conditions = scenario
        .conditions
        .par_iter()
        .map(|&condition| {
            let graph = variant(scenario, &prepared.scene, condition);
            let assessor = prepared.source.for_condition(condition);
            let outcome = iterate_plan(&graph, &setup, assessor.as_ref()).map_err(|source| {
                RunError::Condition {
                    condition: condition.key(),
                    source,
                }
            })?;
            Ok(ConditionReport {
                condition,
                label: condition.label().to_string(),
                relevant: outcome.relevant,
                rounds: outcome.rounds,
                converged: outcome.converged,
                assessment: outcome.assessment,
                zones: outcome.zones,
                stats: path_stats(&outcome.path, &prepared.scene),
                path: outcome.path,
                costmap: outcome.costmap,
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;

    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: scenario.name.clone(),
        assessor: prepared.kind,
        start: scenario.start,
        goal: scenario.goal,
        focus_objects: scenario.focus_objects.clone(),
        scene: prepared.scene,
        conditions,
    })
}

/// Assessment of the objects near the straight segment start → goal, without
/// planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionAssessment {
    pub condition: Condition,
    pub label: String,
    pub relevant: Vec<String>,
    pub assessment: Assessment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessReport {
    pub schema_version: u32,
    pub scenario: String,
    pub assessor: AssessorKind,
    pub focus_objects: Vec<String>,
    pub scene: SceneGraph,
    pub conditions: Vec<ConditionAssessment>,
}

pub fn assess_scenario(
    scenario: &Scenario,
    base_dir: &FsPath,
    options: &RunOptions,
) -> Result<AssessReport, RunError> {
    let prepared = prepare(scenario, base_dir, options)?;
    let straight = Trajectory::straight(scenario.start, scenario.goal, scenario.waypoint_z);
    let conditions = scenario
        .conditions
        .par_iter()
        .map(|&condition| {
            let key = condition.key();
            let context = |source| RunError::Context {
                condition: key,
                source,
            };
            let graph = variant(scenario, &prepared.scene, condition);
            let dense = straight
                .resampled(DEFAULT_RESAMPLE_SPACING_M)
                .map_err(context)?;
            let relevant = relevant_objects(&graph, &dense, scenario.query_radius_m);
            let partial = induce_partial_graph(&graph, &relevant).map_err(context)?;
            let assessor = prepared.source.for_condition(condition);
            let assessment = assess(
                assessor.as_ref(),
                &AssessRequest {
                    partial: &partial,
                    trajectory: &straight,
                    relevant: &relevant,
                    preferences: &scenario.preferences,
                },
            )
            .map_err(|source| RunError::Assess {
                condition: key,
                source,
            })?;
            Ok(ConditionAssessment {
                condition,
                label: condition.label().to_string(),
                relevant,
                assessment,
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    Ok(AssessReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: scenario.name.clone(),
        assessor: prepared.kind,
        focus_objects: scenario.focus_objects.clone(),
        scene: prepared.scene,
        conditions,
    })
}

impl AssessReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

// ---------------------------------------------------------------------------
// Comparison table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonColumn {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonRow {
    pub condition: Condition,
    pub label: String,
    /// One entry per column; `None` where the condition did not assess the object.
    pub cells: Vec<Option<CostClearance>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub schema_version: u32,
    pub scenario: String,
    pub columns: Vec<ComparisonColumn>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("need ≥ 2 conditions, got {0}")]
    TooFewConditions(usize),
    #[error("comparison: {0}")]
    Parse(String),
}

/// Cost (clearance) per object and condition. Columns follow the focus
/// objects when given, otherwise every assessed object in id order.
pub fn compare_conditions(report: &RunReport) -> Result<Comparison, CompareError> {
    let rows: Vec<_> = report
        .conditions
        .iter()
        .map(|c| (c.condition, &c.assessment))
        .collect();
    comparison(&report.scenario, &report.scene, &report.focus_objects, &rows)
}

pub fn compare_assessments(report: &AssessReport) -> Result<Comparison, CompareError> {
    let rows: Vec<_> = report
        .conditions
        .iter()
        .map(|c| (c.condition, &c.assessment))
        .collect();
    comparison(&report.scenario, &report.scene, &report.focus_objects, &rows)
}

fn comparison(
    scenario: &str,
    scene: &SceneGraph,
    focus: &[String],
    rows: &[(Condition, &Assessment)],
) -> Result<Comparison, CompareError> {
    if rows.len() < 2 {
        return Err(CompareError::TooFewConditions(rows.len()));
    }
    let ids: Vec<String> = if focus.is_empty() {
        rows.iter()
            .flat_map(|(_, a)| a.entries.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        focus.to_vec()
    };
    let tag_of = |id: &str| scene.node(id).map(|n| n.tag.clone());
    let mut tag_counts: BTreeMap<String, usize> = BTreeMap::new();
    for id in &ids {
        if let Some(tag) = tag_of(id) {
            *tag_counts.entry(tag).or_default() += 1;
        }
    }
    let columns = ids
        .iter()
        .map(|id| {
            let label = match tag_of(id) {
                Some(tag) if tag_counts[&tag] == 1 => tag,
                _ => id.clone(),
            };
            ComparisonColumn {
                id: id.clone(),
                label,
            }
        })
        .collect();
    let rows = rows
        .iter()
        .map(|(condition, a)| ComparisonRow {
            condition: *condition,
            label: condition.label().to_string(),
            cells: ids.iter().map(|id| a.get(id)).collect(),
        })
        .collect();
    Ok(Comparison {
        schema_version: COMPARISON_SCHEMA_VERSION,
        scenario: scenario.to_string(),
        columns,
        rows,
    })
}

impl Comparison {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparisons serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CompareError> {
        serde_json::from_str(text).map_err(|e| CompareError::Parse(e.to_string()))
    }

    pub fn cell(&self, condition: Condition, id: &str) -> Option<CostClearance> {
        let col = self.columns.iter().position(|c| c.id == id)?;
        self.rows
            .iter()
            .find(|r| r.condition == condition)
            .and_then(|r| r.cells[col])
    }

    /// Aligned table with one row per condition; absent objects read `-`.
    pub fn to_text(&self) -> String {
        let mut table: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        table.push(
            std::iter::once(String::new())
                .chain(self.columns.iter().map(|c| c.label.clone()))
                .collect(),
        );
        for row in &self.rows {
            table.push(
                std::iter::once(row.label.clone())
                    .chain(
                        row.cells
                            .iter()
                            .map(|c| c.map_or_else(|| "-".to_string(), |cc| cc.to_string())),
                    )
                    .collect(),
            );
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|i| table.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &table {
            let line = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}"))
                .collect::<Vec<_>>()
                .join("  ");
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_assessment::Provenance;
    use crate::geometry::Vec3;
    use crate::scene_graph::ObjectNode;

    fn assessment(entries: &[(&str, f64, f64)]) -> Assessment {
        Assessment {
            entries: entries
                .iter()
                .map(|(id, c, r)| (id.to_string(), CostClearance::new(*c, *r).unwrap()))
                .collect(),
            provenance: Provenance::new("test"),
        }
    }

    fn scene() -> SceneGraph {
        SceneGraph::new(
            vec![
                ObjectNode::new("bed", "bed", Vec3::new(0.0, 0.0, 0.25), Vec3::new(2.0, 1.6, 0.5)),
                ObjectNode::new("c1", "chair", Vec3::new(3.0, 0.0, 0.4), Vec3::new(0.5, 0.5, 0.8)),
                ObjectNode::new("c2", "chair", Vec3::new(4.0, 0.0, 0.4), Vec3::new(0.5, 0.5, 0.8)),
            ],
            vec![],
        )
    }

    #[test]
    fn union_of_objects_with_dashes() {
        let a = assessment(&[("bed", 1.0, 0.5)]);
        let b = assessment(&[("c1", 3.0, 1.0)]);
        let rows = [(Condition::NoHuman, &a), (Condition::HumanNoRelations, &b)];
        let table = comparison("t", &scene(), &[], &rows).unwrap();
        assert_eq!(table.columns.len(), 2);
        assert_eq!(
            table.to_text(),
            "                       bed      chair\n\
             No Human               1 (0.5)  -\n\
             Human w/out relations  -        3 (1)\n"
        );
    }

    #[test]
    fn colliding_tags_fall_back_to_ids() {
        let a = assessment(&[("c1", 1.0, 0.0), ("c2", 2.0, 1.0)]);
        let rows = [(Condition::NoHuman, &a), (Condition::HumanWithRelations, &a)];
        let table = comparison("t", &scene(), &[], &rows).unwrap();
        let labels: Vec<_> = table.columns.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["c1", "c2"]);
    }

    #[test]
    fn single_condition_is_rejected() {
        let a = assessment(&[("bed", 1.0, 0.5)]);
        let err = comparison("t", &scene(), &[], &[(Condition::NoHuman, &a)]).unwrap_err();
        assert!(err.to_string().starts_with("need ≥ 2 conditions"));
    }

    #[test]
    fn comparison_json_roundtrip() {
        let a = assessment(&[("bed", 1.0, 0.5), ("c1", 2.0, 1.5)]);
        let b = assessment(&[("bed", 3.0, 1.5)]);
        let rows = [(Condition::NoHuman, &a), (Condition::HumanWithRelations, &b)];
        let table = comparison("t", &scene(), &["c1".into(), "bed".into()], &rows).unwrap();
        let back = Comparison::from_json(&table.to_json()).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.cell(Condition::NoHuman, "c1"), CostClearance::new(2.0, 1.5).ok());
        assert_eq!(back.cell(Condition::HumanWithRelations, "c1"), None);
    }

    #[test]
    fn scenario_validation() {
        let text = r#"{"schema_version": 1, "name": "s", "scene": "scene.json",
            "conditions": ["no_human"], "start": [0.5, 0.5], "goal": [1.5, 0.5],
            "map": {"min": [0, 0], "max": [2, 1], "resolution": 0.1}, "assessor": "rules"}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.max_rounds, DEFAULT_MAX_ROUNDS);
        assert_eq!(s.query_radius_m.meters(), 2.0);
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);

        let bad = text.replace("\"no_human\"", "");
        assert!(matches!(Scenario::from_json(&bad), Err(ScenarioError::Invalid(_))));
        let outside = text.replace("[1.5, 0.5]", "[3.5, 0.5]");
        assert!(Scenario::from_json(&outside).unwrap_err().to_string().contains("goal"));
        let unknown = text.replace("\"assessor\"", "\"speed\": 1, \"assessor\"");
        match Scenario::from_json(&unknown) {
            Err(ScenarioError::Parse { message, .. }) => assert!(message.contains("speed")),
            other => panic!("unexpected {other:?}"),
        }
        let typed = text.replace("\"resolution\": 0.1", "\"resolution\": \"fine\"");
        match Scenario::from_json(&typed) {
            Err(ScenarioError::Parse { path, .. }) => assert_eq!(path, "map.resolution"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
