//! Goal specifications: the expected state changes of a task.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::world::{ClassRegistry, StateFlag};

/// The twelve household task types of the catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskType {
    WaterPlant,
    MakeCoffee,
    CleanX,
    AllXOnY,
    BoilX,
    MakeToast,
    NSlicesOfX,
    PutXOnY,
    CookX,
    MakeSandwich,
    MakeSalad,
    MakeBreakfast,
}

impl TaskType {
    pub const ALL: [TaskType; 12] = [
        TaskType::WaterPlant,
        TaskType::MakeCoffee,
        TaskType::CleanX,
        TaskType::AllXOnY,
        TaskType::BoilX,
        TaskType::MakeToast,
        TaskType::NSlicesOfX,
        TaskType::PutXOnY,
        TaskType::CookX,
        TaskType::MakeSandwich,
        TaskType::MakeSalad,
        TaskType::MakeBreakfast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskType::WaterPlant => "WaterPlant",
            TaskType::MakeCoffee => "MakeCoffee",
            TaskType::CleanX => "CleanX",
            TaskType::AllXOnY => "AllXOnY",
            TaskType::BoilX => "BoilX",
            TaskType::MakeToast => "MakeToast",
            TaskType::NSlicesOfX => "NSlicesOfX",
            TaskType::PutXOnY => "PutXOnY",
            TaskType::CookX => "CookX",
            TaskType::MakeSandwich => "MakeSandwich",
            TaskType::MakeSalad => "MakeSalad",
            TaskType::MakeBreakfast => "MakeBreakfast",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskType::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown task type `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    /// A state flag must have the given value.
    Flag { flag: StateFlag, value: bool },
    /// The object must sit directly inside an instance of `receptacle`.
    In { receptacle: String },
}

/// One expected state change: at least `count` (default 1) instances of
/// `class` satisfy `kind`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub class: String,
    pub kind: ConditionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
}

impl Condition {
    pub fn flag(class: &str, flag: StateFlag, value: bool) -> Self {
        Condition {
            class: class.to_string(),
            kind: ConditionKind::Flag { flag, value },
            count: None,
        }
    }

    pub fn inside(class: &str, receptacle: &str) -> Self {
        Condition {
            class: class.to_string(),
            kind: ConditionKind::In {
                receptacle: receptacle.to_string(),
            },
            count: None,
        }
    }

    pub fn times(mut self, n: u32) -> Self {
        self.count = Some(n);
        self
    }

    /// Templated description, e.g. "plate is clean".
    pub fn describe(&self) -> String {
        let obj = crate::language::spoken_name(&self.class);
        let n = self.count.unwrap_or(1);
        let subject = if n > 1 { format!("{n} {obj}") } else { obj };
        let verb = if n > 1 { "are" } else { "is" };
        match &self.kind {
            ConditionKind::Flag { flag, value } => {
                format!("{subject} {verb} {}", flag.describe(*value))
            }
            ConditionKind::In { receptacle } => format!(
                "{subject} {verb} in {}",
                crate::language::spoken_name(receptacle)
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub task_type: TaskType,
    pub conditions: Vec<Condition>,
}

impl GoalSpec {
    /// Load-time validation against a class registry.
    pub fn validate(&self, registry: &ClassRegistry) -> Result<(), String> {
        if self.conditions.is_empty() {
            return Err("goal has no conditions".into());
        }
        for c in &self.conditions {
            if !registry.contains(&c.class) {
                return Err(format!("goal references unknown class `{}`", c.class));
            }
            if let ConditionKind::In { receptacle } = &c.kind {
                if !registry.contains(receptacle) {
                    return Err(format!("goal references unknown class `{receptacle}`"));
                }
            }
        }
        Ok(())
    }
}
