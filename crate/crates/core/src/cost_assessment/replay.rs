//! Recorded assessments keyed by `"scenario/condition"`.
//!
//! Fixture file:
//!
//! ```json
//! {"schema_version": 1,
//!  "assessments": {"bedroom_tv/no_human": {"bed": {"cost": 1, "clearance": 0.5}}}}
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AssessRequest, Assessment, Assessor, AssessorError, CostClearance, Provenance};
use crate::human_augmentation::Condition;

pub const FIXTURE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("no recorded assessment for \"{0}\"")]
    MissingKey(String),
    #[error("fixture file: {0}")]
    Parse(String),
    #[error("unsupported fixture schema_version {0}")]
    UnsupportedVersion(u32),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureStore {
    pub schema_version: u32,
    pub assessments: BTreeMap<String, BTreeMap<String, CostClearance>>,
}

impl FixtureStore {
    pub fn key(scenario: &str, condition: Condition) -> String {
        format!("{scenario}/{}", condition.key())
    }

    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let store: FixtureStore =
            serde_json::from_str(text).map_err(|e| FixtureError::Parse(e.to_string()))?;
        if store.schema_version != FIXTURE_SCHEMA_VERSION {
            return Err(FixtureError::UnsupportedVersion(store.schema_version));
        }
        Ok(store)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fixture stores serialize")
    }

    pub fn insert(&mut self, scenario: &str, condition: Condition, assessment: &Assessment) {
        self.assessments
            .insert(Self::key(scenario, condition), assessment.entries.clone());
    }
}

/// Returns the stored entries for `(scenario, condition)` unchanged.
pub fn replay_assess(
    store: &FixtureStore,
    scenario: &str,
    condition: Condition,
) -> Result<Assessment, FixtureError> {
    let key = FixtureStore::key(scenario, condition);
    let entries = store
        .assessments
        .get(&key)
        .cloned()
        .ok_or_else(|| FixtureError::MissingKey(key.clone()))?;
    Ok(Assessment {
        entries,
        provenance: Provenance::new("replay").with("key", key),
    })
}

/// Serves one fixture entry as an [`Assessor`].
///
/// The stored entries are projected onto the requested relevant set: relevant
/// objects without a recording get [`CostClearance::NEUTRAL`], recorded objects
/// outside the set are dropped. Both lists are kept in the provenance.
pub struct ReplayAssessor {
    store: Arc<FixtureStore>,
    scenario: String,
    condition: Condition,
}

impl ReplayAssessor {
    pub fn new(store: Arc<FixtureStore>, scenario: impl Into<String>, condition: Condition) -> Self {
        Self {
            store,
            scenario: scenario.into(),
            condition,
        }
    }
}

impl Assessor for ReplayAssessor {
    fn name(&self) -> &str {
        "replay"
    }

    fn assess(&self, request: &AssessRequest<'_>) -> Result<Assessment, AssessorError> {
        let stored = replay_assess(&self.store, &self.scenario, self.condition)?;
        let mut entries = BTreeMap::new();
        let mut filled = Vec::new();
        for id in request.relevant {
            match stored.entries.get(id) {
                Some(cc) => {
                    entries.insert(id.clone(), *cc);
                }
                None => {
                    entries.insert(id.clone(), CostClearance::NEUTRAL);
                    filled.push(id.as_str());
                }
            }
        }
        let dropped: Vec<&str> = stored
            .entries
            .keys()
            .filter(|id| !request.relevant.contains(id))
            .map(String::as_str)
            .collect();
        filled.sort_unstable();

        let mut provenance = stored.provenance;
        if !filled.is_empty() {
            provenance = provenance.with("neutral_fill", filled.join(","));
        }
        if !dropped.is_empty() {
            provenance = provenance.with("not_relevant", dropped.join(","));
        }
        Ok(Assessment {
            entries,
            provenance,
        })
    }
}
