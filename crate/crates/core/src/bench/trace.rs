//! Episode traces as JSON Lines: a header, step and message records in
//! order, and the metrics block last.

use serde::{Deserialize, Serialize};

use super::instance::InstanceKind;
use super::metrics::EpisodeMetrics;
use super::runner::RunConfig;
use crate::commander::Message;
use crate::goal::TaskType;
use crate::language::{RecordedAction, SubGoal};
use crate::world::scenario::Scenario;
use crate::world::{teleport_execute, Action, WorldState};

pub const TRACE_FORMAT: &str = "jarvis-trace/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: String,
    pub instance_id: String,
    pub task: TaskType,
    pub kind: InstanceKind,
    pub seed: u64,
    pub config: RunConfig,
    pub scenario: Scenario,
    pub history: Vec<RecordedAction>,
    pub plan: Vec<SubGoal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner_error: Option<String>,
    /// World hash after the history replay.
    pub start_hash: String,
}

/// One executed step. Exactly one of `action` and `teleport` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    /// Sub-goal run by the teleporting executor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teleport: Option<SubGoal>,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pointer: usize,
    pub world_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_hash: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Header(Box<TraceHeader>),
    Step(StepRecord),
    Message(Message),
    Metrics(EpisodeMetrics),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TraceEvent {
    Step(StepRecord),
    Message(Message),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    pub metrics: EpisodeMetrics,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace has no header line")]
    NoHeader,
    #[error("trace has no metrics line")]
    NoMetrics,
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("history does not reproduce the recorded start state")]
    StartMismatch,
    #[error("step {step}: {reason}")]
    Diverged { step: usize, reason: String },
}

impl EpisodeTrace {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> + '_ {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Step(s) => Some(s),
            TraceEvent::Message(_) => None,
        })
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> + '_ {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Message(m) => Some(m),
            TraceEvent::Step(_) => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |l: TraceLine| {
            out.push_str(&serde_json::to_string(&l).expect("trace line serializes"));
            out.push('\n');
        };
        push(TraceLine::Header(Box::new(self.header.clone())));
        for e in &self.events {
            push(match e {
                TraceEvent::Step(s) => TraceLine::Step(s.clone()),
                TraceEvent::Message(m) => TraceLine::Message(m.clone()),
            });
        }
        push(TraceLine::Metrics(self.metrics.clone()));
        out
    }

    /// Parses a JSONL trace. Blank input yields `None`.
    pub fn parse(text: &str) -> Result<Option<EpisodeTrace>, TraceError> {
        let mut header = None;
        let mut events = Vec::new();
        let mut metrics = None;
        let mut any = false;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            any = true;
            let parsed: TraceLine = serde_json::from_str(line).map_err(|e| TraceError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            match parsed {
                TraceLine::Header(h) => header = Some(*h),
                TraceLine::Step(s) => events.push(TraceEvent::Step(s)),
                TraceLine::Message(m) => events.push(TraceEvent::Message(m)),
                TraceLine::Metrics(m) => metrics = Some(m),
            }
        }
        if !any {
            return Ok(None);
        }
        Ok(Some(EpisodeTrace {
            header: header.ok_or(TraceError::NoHeader)?,
            events,
            metrics: metrics.ok_or(TraceError::NoMetrics)?,
        }))
    }
}

/// Re-executes a trace and checks every recorded world hash. Returns the
/// number of steps verified.
pub fn replay(trace: &EpisodeTrace) -> Result<usize, TraceError> {
    let mut w: WorldState = trace
        .header
        .scenario
        .clone()
        .into_state()
        .map_err(|e| TraceError::Scenario(e.to_string()))?;
    for r in &trace.header.history {
        w.apply(r.action);
    }
    if w.state_hash() != trace.header.start_hash {
        return Err(TraceError::StartMismatch);
    }
    let mut n = 0;
    for s in trace.steps() {
        let success = match (&s.action, &s.teleport) {
            (Some(a), None) => w.apply(*a).success,
            (None, Some(g)) => {
                let (next, ok, _) = teleport_execute(&w, g);
                w = next;
                ok
            }
            _ => {
                return Err(TraceError::Diverged {
                    step: s.t,
                    reason: "record needs exactly one of action and teleport".into(),
                })
            }
        };
        if success != s.success {
            return Err(TraceError::Diverged {
                step: s.t,
                reason: format!("success {success}, recorded {}", s.success),
            });
        }
        let h = w.state_hash();
        if h != s.world_hash {
            return Err(TraceError::Diverged {
                step: s.t,
                reason: format!("world hash {h}, recorded {}", s.world_hash),
            });
        }
        n += 1;
    }
    Ok(n)
}
