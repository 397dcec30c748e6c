//! Wire messages of the remote planner: one JSON object per line.

use serde::{Deserialize, Serialize};

use super::{Dialogue, SubGoal};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerRequest {
    pub dialogue: Dialogue,
    pub history: Vec<SubGoal>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerResponse {
    pub subgoals: Vec<SubGoal>,
}

fn to_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("protocol messages serialize");
    s.push('\n');
    s
}

impl PlannerRequest {
    pub fn to_line(&self) -> String {
        to_line(self)
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end())
    }
}

impl PlannerResponse {
    pub fn to_line(&self) -> String {
        to_line(self)
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end())
    }
}
