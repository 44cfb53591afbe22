//! Per-object cost and clearance assignment.
//!
//! An [`Assessor`] maps a partial scene graph, a trajectory and a list of
//! preferences to an [`Assessment`]: one [`CostClearance`] per relevant object.
//! Three implementations ship: an LLM client ([`llm`]), a deterministic rule
//! model ([`rules`]) and recorded fixtures ([`replay`]).
//!
//! Every assessment is checked by [`validate_assessment`] before it leaves
//! [`assess`]: costs are at least 1, clearances at least 0, and the key set
//! equals the requested relevant set.

pub mod llm;
pub mod replay;
pub mod rules;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene_graph::SceneGraph;
use crate::trajectory_context::{render_context_text, Trajectory};

pub use llm::{llm_assess, CompletionTransport, HttpTransport, LlmAssessor, LlmError, RetryPolicy};
pub use replay::{replay_assess, FixtureError, FixtureStore, ReplayAssessor};
pub use rules::{rule_based_assess, RuleAssessor};

/// Impact factor (≥ 1) and decay distance in meters (≥ 0) for one object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCostClearance")]
pub struct CostClearance {
    pub cost: f64,
    pub clearance: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCostClearance {
    cost: f64,
    clearance: f64,
}

impl TryFrom<RawCostClearance> for CostClearance {
    type Error = String;

    fn try_from(raw: RawCostClearance) -> Result<Self, Self::Error> {
        CostClearance::new(raw.cost, raw.clearance)
    }
}

impl CostClearance {
    /// No influence at all.
    pub const NEUTRAL: CostClearance = CostClearance {
        cost: 1.0,
        clearance: 0.0,
    };

    pub fn new(cost: f64, clearance: f64) -> Result<Self, String> {
        if !(cost >= 1.0 && cost.is_finite()) {
            return Err(format!("cost must be a finite number >= 1, got {cost}"));
        }
        if !(clearance >= 0.0 && clearance.is_finite()) {
            return Err(format!("clearance must be a finite number >= 0, got {clearance}"));
        }
        Ok(Self { cost, clearance })
    }

    pub(crate) const fn raw(cost: f64, clearance: f64) -> Self {
        Self { cost, clearance }
    }
}

impl fmt::Display for CostClearance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.cost, self.clearance)
    }
}

/// One prompt/response pair of an LLM exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub response: String,
}

/// Which assessor produced an assessment, and how.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub assessor: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, String>,
    #[serde(default = "one")]
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transcript: Vec<Exchange>,
}

fn one() -> u32 {
    1
}

impl Provenance {
    pub fn new(assessor: impl Into<String>) -> Self {
        Self {
            assessor: assessor.into(),
            parameters: BTreeMap::new(),
            attempts: 1,
            transcript: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.parameters.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Assessment {
    pub entries: BTreeMap<String, CostClearance>,
    pub provenance: Provenance,
}

impl Assessment {
    pub fn get(&self, id: &str) -> Option<CostClearance> {
        self.entries.get(id).copied()
    }

    pub fn ids(&self) -> BTreeSet<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// Everything an assessor sees.
#[derive(Debug, Clone, Copy)]
pub struct AssessRequest<'a> {
    pub partial: &'a SceneGraph,
    pub trajectory: &'a Trajectory,
    pub relevant: &'a [String],
    pub preferences: &'a [String],
}

#[derive(Debug, Error)]
pub enum AssessorError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
}

/// Contract shared by the LLM, rule and replay assessors.
pub trait Assessor: Send + Sync {
    fn name(&self) -> &str;

    fn assess(&self, request: &AssessRequest<'_>) -> Result<Assessment, AssessorError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AssessmentViolation {
    OutOfRange {
        object_id: String,
        field: String,
        value: f64,
    },
    Missing {
        object_id: String,
    },
    Extra {
        object_id: String,
    },
}

impl fmt::Display for AssessmentViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssessmentViolation::OutOfRange {
                object_id,
                field,
                value,
            } => write!(f, "{object_id}: {field} {value} out of range"),
            AssessmentViolation::Missing { object_id } => write!(f, "{object_id}: missing"),
            AssessmentViolation::Extra { object_id } => write!(f, "{object_id}: not requested"),
        }
    }
}

/// Range and coverage check. Empty iff valid.
pub fn validate_assessment(assessment: &Assessment, relevant: &[String]) -> Vec<AssessmentViolation> {
    let mut out = Vec::new();
    for (id, cc) in &assessment.entries {
        if !(cc.cost >= 1.0 && cc.cost.is_finite()) {
            out.push(AssessmentViolation::OutOfRange {
                object_id: id.clone(),
                field: "cost".into(),
                value: cc.cost,
            });
        }
        if !(cc.clearance >= 0.0 && cc.clearance.is_finite()) {
            out.push(AssessmentViolation::OutOfRange {
                object_id: id.clone(),
                field: "clearance".into(),
                value: cc.clearance,
            });
        }
    }
    let wanted: BTreeSet<&str> = relevant.iter().map(String::as_str).collect();
    for id in &wanted {
        if !assessment.entries.contains_key(*id) {
            out.push(AssessmentViolation::Missing {
                object_id: id.to_string(),
            });
        }
    }
    for id in assessment.entries.keys() {
        if !wanted.contains(id.as_str()) {
            out.push(AssessmentViolation::Extra {
                object_id: id.clone(),
            });
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum AssessError {
    #[error("relevant id \"{0}\" is not part of the partial graph")]
    UnknownRelevant(String),
    #[error("assessor {assessor} failed: {source}")]
    Failed {
        assessor: String,
        #[source]
        source: AssessorError,
    },
    #[error("assessor {assessor} returned an invalid assessment: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid {
        assessor: String,
        violations: Vec<AssessmentViolation>,
    },
}

/// Runs `port` and enforces the assessment contract on its output.
pub fn assess(port: &dyn Assessor, request: &AssessRequest<'_>) -> Result<Assessment, AssessError> {
    if let Some(id) = request.relevant.iter().find(|id| !request.partial.contains(id)) {
        return Err(AssessError::UnknownRelevant(id.clone()));
    }
    let assessment = port.assess(request).map_err(|source| AssessError::Failed {
        assessor: port.name().to_string(),
        source,
    })?;
    let violations = validate_assessment(&assessment, request.relevant);
    if !violations.is_empty() {
        return Err(AssessError::Invalid {
            assessor: port.name().to_string(),
            violations,
        });
    }
    Ok(assessment)
}

// ---------------------------------------------------------------------------
// Prompt and response format
// ---------------------------------------------------------------------------

/// The value-range sentence every prompt carries.
pub const CONTRACT_SENTENCE: &str = "Each cost must be a number greater than or equal to 1 \
(1 means the object has no impact at all) and each clearance must be a number of meters \
greater than or equal to 0 (0 means no impact at all); the clearance is the distance over \
which the object's cost fades away as the robot moves farther from it.";

const PROMPT_HEAD: &str = "\
You assign navigation costs for a mobile robot moving through a home.
Below are the objects near the robot's planned trajectory (with any humans present, \
their relations and activities), the trajectory waypoints in meters, and the preferences \
the robot must respect. For every object to rate, return a cost reflecting how strongly \
it should influence the trajectory and a clearance.
";

const PROMPT_SCHEMA: &str = "\
Respond with JSON only, exactly in this form:
{\"assessments\": [{\"object_id\": \"<id>\", \"cost\": <number>, \"clearance\": <number>}]}
Include each id from RATE exactly once and no other ids.
";

/// Prompt asking for a rating of every node in `partial`.
pub fn build_prompt(partial: &SceneGraph, trajectory: &Trajectory, preferences: &[String]) -> String {
    let ids: Vec<String> = partial.ids().map(String::from).collect();
    build_prompt_for(partial, trajectory, preferences, &ids)
}

/// Prompt asking for a rating of exactly `relevant`; other nodes of `partial` are context.
pub fn build_prompt_for(
    partial: &SceneGraph,
    trajectory: &Trajectory,
    preferences: &[String],
    relevant: &[String],
) -> String {
    let mut rate: Vec<&str> = relevant.iter().map(String::as_str).collect();
    rate.sort_unstable();
    rate.dedup();
    let mut out = String::new();
    out.push_str(PROMPT_HEAD);
    out.push_str(CONTRACT_SENTENCE);
    out.push('\n');
    out.push_str(PROMPT_SCHEMA);
    out.push('\n');
    out.push_str(&render_context_text(partial, trajectory, preferences));
    out.push_str("\nRATE\n");
    if rate.is_empty() {
        out.push_str("(none)\n");
    } else {
        out.push_str(&rate.join(", "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeViolation {
    pub object_id: String,
    pub field: String,
    pub value: f64,
}

/// Why a response was rejected. [`ParseError::code`] is stable and machine-readable.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("response is not valid JSON: {0}")]
    Syntax(String),
    #[error("response does not match the schema: {0}")]
    Schema(String),
    #[error("object id \"{0}\" appears more than once")]
    DuplicateId(String),
    #[error("values out of range: {}", .0.iter().map(|v| format!("{} {} = {}", v.object_id, v.field, v.value)).collect::<Vec<_>>().join(", "))]
    OutOfRange(Vec<RangeViolation>),
    #[error("ids do not match the requested objects (missing: [{}], unexpected: [{}])", .missing.join(", "), .extra.join(", "))]
    Coverage {
        missing: Vec<String>,
        extra: Vec<String>,
    },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Syntax(_) => "syntax",
            ParseError::Schema(_) => "schema",
            ParseError::DuplicateId(_) => "duplicate_id",
            ParseError::OutOfRange(_) => "out_of_range",
            ParseError::Coverage { .. } => "coverage",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseDoc {
    assessments: Vec<ResponseEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseEntry {
    object_id: String,
    cost: f64,
    clearance: f64,
}

/// Strips one surrounding markdown code fence, if present.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

/// Parses `{"assessments": [{"object_id", "cost", "clearance"}, ...]}` and checks
/// ranges and exact coverage of `relevant`.
pub fn parse_assessment(response: &str, relevant: &[String]) -> Result<Assessment, ParseError> {
    let value: serde_json::Value =
        serde_json::from_str(unfence(response)).map_err(|e| ParseError::Syntax(e.to_string()))?;
    let doc: ResponseDoc =
        serde_json::from_value(value).map_err(|e| ParseError::Schema(e.to_string()))?;

    let mut entries = BTreeMap::new();
    let mut range = Vec::new();
    for e in doc.assessments {
        if !(e.cost >= 1.0) {
            range.push(RangeViolation {
                object_id: e.object_id.clone(),
                field: "cost".into(),
                value: e.cost,
            });
        }
        if !(e.clearance >= 0.0) {
            range.push(RangeViolation {
                object_id: e.object_id.clone(),
                field: "clearance".into(),
                value: e.clearance,
            });
        }
        if entries
            .insert(e.object_id.clone(), CostClearance::raw(e.cost, e.clearance))
            .is_some()
        {
            return Err(ParseError::DuplicateId(e.object_id));
        }
    }
    if !range.is_empty() {
        return Err(ParseError::OutOfRange(range));
    }

    let wanted: BTreeSet<&str> = relevant.iter().map(String::as_str).collect();
    let missing: Vec<String> = wanted
        .iter()
        .filter(|id| !entries.contains_key(**id))
        .map(|id| id.to_string())
        .collect();
    let extra: Vec<String> = entries
        .keys()
        .filter(|id| !wanted.contains(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(ParseError::Coverage { missing, extra });
    }
    Ok(Assessment {
        entries,
        provenance: Provenance::new("response"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Vec2, Vec3};
    use crate::scene_graph::ObjectNode;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    const WITH_RELATIONS: &str = r#"{"assessments": [
        {"object_id": "bed", "cost": 3, "clearance": 1.5},
        {"object_id": "human_1", "cost": 5, "clearance": 2},
        {"object_id": "armchair", "cost": 1, "clearance": 0}
    ]}"#;

    #[test]
    fn parses_table_row() {
        let a = parse_assessment(WITH_RELATIONS, &ids(&["bed", "human_1", "armchair"])).unwrap();
        assert_eq!(a.get("bed"), Some(CostClearance::raw(3.0, 1.5)));
        assert_eq!(a.get("human_1"), Some(CostClearance::raw(5.0, 2.0)));
        assert_eq!(a.get("armchair"), Some(CostClearance::raw(1.0, 0.0)));
        assert!(validate_assessment(&a, &ids(&["bed", "human_1", "armchair"])).is_empty());
    }

    #[test]
    fn accepts_fenced_response() {
        let fenced = format!("```json\n{WITH_RELATIONS}\n```");
        assert!(parse_assessment(&fenced, &ids(&["bed", "human_1", "armchair"])).is_ok());
    }

    #[test]
    fn rejects_low_cost_naming_object() {
        let text = WITH_RELATIONS.replace(r#""cost": 3"#, r#""cost": 0.5"#);
        let err = parse_assessment(&text, &ids(&["bed", "human_1", "armchair"])).unwrap_err();
        assert_eq!(err.code(), "out_of_range");
        assert_eq!(
            err,
            ParseError::OutOfRange(vec![RangeViolation {
                object_id: "bed".into(),
                field: "cost".into(),
                value: 0.5
            }])
        );
    }

    #[test]
    fn rejects_missing_armchair() {
        let text = r#"{"assessments": [
            {"object_id": "bed", "cost": 3, "clearance": 1.5},
            {"object_id": "human_1", "cost": 5, "clearance": 2}]}"#;
        let err = parse_assessment(text, &ids(&["bed", "human_1", "armchair"])).unwrap_err();
        assert_eq!(
            err,
            ParseError::Coverage {
                missing: ids(&["armchair"]),
                extra: vec![]
            }
        );
    }

    #[test]
    fn error_codes_are_distinct() {
        let rel = ids(&["bed"]);
        let codes = [
            parse_assessment("not json", &rel).unwrap_err().code(),
            parse_assessment(r#"{"items": []}"#, &rel).unwrap_err().code(),
            parse_assessment(
                r#"{"assessments": [{"object_id": "bed", "cost": 2, "clearance": 1},
                                    {"object_id": "bed", "cost": 2, "clearance": 1}]}"#,
                &rel,
            )
            .unwrap_err()
            .code(),
            parse_assessment(
                r#"{"assessments": [{"object_id": "bed", "cost": 2, "clearance": -1}]}"#,
                &rel,
            )
            .unwrap_err()
            .code(),
            parse_assessment(r#"{"assessments": []}"#, &rel).unwrap_err().code(),
        ];
        assert_eq!(
            codes,
            ["syntax", "schema", "duplicate_id", "out_of_range", "coverage"]
        );
    }

    #[test]
    fn validate_flags_range_and_coverage() {
        let mut a = Assessment::default();
        a.entries.insert("bed".into(), CostClearance::raw(2.0, -0.1));
        assert_eq!(
            validate_assessment(&a, &ids(&["bed"])),
            vec![AssessmentViolation::OutOfRange {
                object_id: "bed".into(),
                field: "clearance".into(),
                value: -0.1
            }]
        );
        let mut b = Assessment::default();
        b.entries.insert("bed".into(), CostClearance::raw(2.0, 0.5));
        b.entries.insert("lamp".into(), CostClearance::raw(1.0, 0.0));
        assert_eq!(
            validate_assessment(&b, &ids(&["bed"])),
            vec![AssessmentViolation::Extra {
                object_id: "lamp".into()
            }]
        );
    }

    #[test]
    fn cost_clearance_rejects_bad_values_on_deserialize() {
        assert!(serde_json::from_str::<CostClearance>(r#"{"cost": 0.9, "clearance": 0}"#).is_err());
        assert!(serde_json::from_str::<CostClearance>(r#"{"cost": 1, "clearance": -1}"#).is_err());
        let ok: CostClearance = serde_json::from_str(r#"{"cost": 3, "clearance": 1.5}"#).unwrap();
        assert_eq!(ok.to_string(), "3 (1.5)");
    }

    fn tiny_scene() -> SceneGraph {
        SceneGraph::new(
            vec![ObjectNode::new("bed", "bed", Vec3::new(0.0, 0.0, 0.25), Vec3::new(2.0, 1.6, 0.5))],
            vec![],
        )
    }

    #[test]
    fn prompt_is_deterministic_and_states_contract() {
        let g = tiny_scene();
        let t = Trajectory::straight(Vec2::new(-2.0, 0.0), Vec2::new(2.0, 0.0), 0.0);
        let prefs = vec!["Watch out for the glass table".to_string()];
        let a = build_prompt(&g, &t, &prefs);
        assert_eq!(a, build_prompt(&g, &t, &prefs));
        assert!(a.contains(CONTRACT_SENTENCE));
        assert!(a.contains("\"object_id\":\"bed\""));
        assert!(a.ends_with("RATE\nbed\n"));
    }

    #[test]
    fn prompt_for_empty_scene() {
        let t = Trajectory::straight(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), 0.0);
        let p = build_prompt(&SceneGraph::default(), &t, &[]);
        assert!(p.contains(CONTRACT_SENTENCE));
        assert!(p.contains("OBJECTS\n(none)\n"));
        assert!(p.ends_with("RATE\n(none)\n"));
    }

    struct Fixed(Assessment);

    impl Assessor for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }

        fn assess(&self, _: &AssessRequest<'_>) -> Result<Assessment, AssessorError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn assess_enforces_contract() {
        let g = tiny_scene();
        let t = Trajectory::straight(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), 0.0);
        let relevant = ids(&["bed"]);
        let req = AssessRequest {
            partial: &g,
            trajectory: &t,
            relevant: &relevant,
            preferences: &[],
        };
        let err = assess(&Fixed(Assessment::default()), &req).unwrap_err();
        assert!(matches!(err, AssessError::Invalid { ref assessor, .. } if assessor == "fixed"));

        let ghost = ids(&["ghost"]);
        let req_ghost = AssessRequest {
            relevant: &ghost,
            ..req
        };
        assert!(matches!(
            assess(&Fixed(Assessment::default()), &req_ghost),
            Err(AssessError::UnknownRelevant(_))
        ));

        let empty: Vec<String> = vec![];
        let req_empty = AssessRequest {
            relevant: &empty,
            ..req
        };
        let a = assess(&Fixed(Assessment::default()), &req_empty).unwrap();
        assert!(a.entries.is_empty());
    }
}
