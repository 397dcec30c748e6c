//! Scenario files (`jarvis-scenario/1`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AgentPose, Cell, ClassRegistry, ObjectClass, ObjectId, ObjectInstance, WorldRules, WorldState};

pub const SCENARIO_FORMAT: &str = "jarvis-scenario/1";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported scenario format `{0}` (expected `{SCENARIO_FORMAT}`)")]
    Format(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format: String,
    pub width: i32,
    pub height: i32,
    pub obstacles: Vec<Cell>,
    pub classes: Vec<ObjectClass>,
    pub objects: Vec<ObjectInstance>,
    pub agent: AgentPose,
    #[serde(default)]
    pub held: Option<ObjectId>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub rules: WorldRules,
}

impl Scenario {
    pub fn from_state(state: &WorldState) -> Scenario {
        Scenario {
            format: SCENARIO_FORMAT.to_string(),
            width: state.width,
            height: state.height,
            obstacles: state.static_obstacles.iter().copied().collect(),
            classes: state.registry.iter().cloned().collect(),
            objects: state.objects.values().cloned().collect(),
            agent: state.agent,
            held: state.held,
            seed: state.rng_seed,
            rules: state.rules,
        }
    }

    /// Builds and validates the world state described by this scenario.
    pub fn into_state(self) -> Result<WorldState, ScenarioError> {
        if self.format != SCENARIO_FORMAT {
            return Err(ScenarioError::Format(self.format));
        }
        let registry = ClassRegistry::new(self.classes).map_err(ScenarioError::Invalid)?;
        if !registry.contains("CounterTop") {
            return Err(ScenarioError::Invalid(
                "class registry must define CounterTop".into(),
            ));
        }
        let mut objects = BTreeMap::new();
        for o in self.objects {
            if objects.insert(o.id, o.clone()).is_some() {
                return Err(ScenarioError::Invalid(format!("duplicate object id {}", o.id)));
            }
        }
        let next_id = objects.keys().next_back().map(|k| k.0 + 1).unwrap_or(0);
        let state = WorldState {
            width: self.width,
            height: self.height,
            static_obstacles: self.obstacles.into_iter().collect::<BTreeSet<_>>(),
            registry: Arc::new(registry),
            objects,
            agent: self.agent,
            held: self.held,
            rng_seed: self.seed,
            step: 0,
            rules: self.rules,
            next_id,
        };
        state
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(state)
    }

    pub fn load(path: &Path) -> Result<WorldState, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        let sc: Scenario = serde_json::from_str(&text)?;
        sc.into_state()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}
