//! Benchmark instances (`jarvis-instance/1`) and suite files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::goal::{GoalSpec, TaskType};
use crate::language::templates::TaskParams;
use crate::language::{actions_to_subgoals, Dialogue, RecordedAction, SubGoal, SubGoalAction};
use crate::world::scenario::Scenario;
use crate::world::WorldState;

pub const INSTANCE_FORMAT: &str = "jarvis-instance/1";
pub const SUITE_FORMAT: &str = "jarvis-suite/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstanceKind {
    /// Execution from dialogue history: resume after `history`.
    Edh,
    /// Trajectory from dialogue: the whole session, empty history.
    Tfd,
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("instance {id}: unsupported format `{format}`")]
    Format { id: String, format: String },
    #[error("instance {id}: {reason}")]
    Invalid { id: String, reason: String },
}

/// One session: initial scenario, dialogue, the actions already taken and
/// the reference future.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub format: String,
    pub id: String,
    pub kind: InstanceKind,
    pub task: TaskType,
    pub params: TaskParams,
    pub scenario: Scenario,
    pub dialogue: Dialogue,
    #[serde(default)]
    pub history: Vec<RecordedAction>,
    pub reference: Vec<RecordedAction>,
    pub goal: GoalSpec,
}

impl Instance {
    pub fn initial_state(&self) -> Result<WorldState, InstanceError> {
        self.scenario.clone().into_state().map_err(|e| self.invalid(e.to_string()))
    }

    fn invalid(&self, reason: impl Into<String>) -> InstanceError {
        InstanceError::Invalid {
            id: self.id.clone(),
            reason: reason.into(),
        }
    }

    /// State after replaying the history.
    pub fn state_after_history(&self) -> Result<WorldState, InstanceError> {
        let mut w = self.initial_state()?;
        for (i, r) in self.history.iter().enumerate() {
            let out = w.apply(r.action);
            if !out.success && r.action.is_interaction() {
                return Err(self.invalid(format!("history action {i} fails on replay")));
            }
        }
        Ok(w)
    }

    /// Structural checks plus reference replay: history then reference from
    /// the scenario must satisfy every goal condition.
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.format != INSTANCE_FORMAT {
            return Err(InstanceError::Format {
                id: self.id.clone(),
                format: self.format.clone(),
            });
        }
        if self.kind == InstanceKind::Tfd && !self.history.is_empty() {
            return Err(self.invalid("TfD instance carries a history"));
        }
        self.dialogue.validate().map_err(|e| self.invalid(e.to_string()))?;
        let mut w = self.state_after_history()?;
        self.goal.validate(&w.registry).map_err(|e| self.invalid(e))?;
        for r in &self.reference {
            w.apply(r.action);
        }
        let gc = w.goal_conditions_met(&self.goal);
        if gc < 1.0 {
            return Err(self.invalid(format!("reference replay reaches gc {gc:.3}, not 1")));
        }
        Ok(())
    }

    pub fn history_subgoals(&self) -> Vec<SubGoal> {
        actions_to_subgoals(&self.history)
    }

    /// Ground-truth future sub-goals.
    pub fn oracle_subgoals(&self) -> Vec<SubGoal> {
        actions_to_subgoals(&self.reference)
    }

    /// Class in hand after the history, as an agent reading it would infer.
    pub fn held_after_history(&self) -> Option<String> {
        held_after(&self.history_subgoals())
    }

    /// Reference length |A_R| counted over the future actions.
    pub fn ref_len(&self) -> usize {
        self.reference.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn load(path: &Path) -> Result<Instance, InstanceError> {
        let inst: Instance = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        inst.validate()?;
        Ok(inst)
    }
}

/// Held class after a sub-goal sequence under ideal execution.
pub fn held_after(seq: &[SubGoal]) -> Option<String> {
    seq.iter().fold(None, |held, g| match g.action {
        SubGoalAction::PickUp => Some(g.target.clone()),
        SubGoalAction::Place => None,
        _ => held,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub format: String,
    pub seed: u64,
    pub instances: Vec<Instance>,
}

impl Suite {
    pub fn new(seed: u64, instances: Vec<Instance>) -> Self {
        Suite {
            format: SUITE_FORMAT.to_string(),
            seed,
            instances,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("suite serializes")
    }

    /// Reads and validates a suite file, or a single instance file.
    pub fn load(path: &Path) -> Result<Suite, InstanceError> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let suite = if value.get("instances").is_some() {
            let s: Suite = serde_json::from_value(value)?;
            if s.format != SUITE_FORMAT {
                return Err(InstanceError::Format {
                    id: path.display().to_string(),
                    format: s.format,
                });
            }
            s
        } else {
            Suite::new(0, vec![serde_json::from_value(value)?])
        };
        for i in &suite.instances {
            i.validate()?;
        }
        Ok(suite)
    }
}
