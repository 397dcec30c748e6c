//! Dialogue and sub-goal representation, the action-history to sub-goal
//! transformation, and the sub-goal planners.

mod planner;
pub mod protocol;
pub mod templates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::world::{Action, InteractKind};

pub use planner::{
    plan, subtract_history, OraclePlanner, Planner, PlannerBackend, PlannerError, RemoteEndpoint,
    RemotePlanner, TemplatePlanner, DEFAULT_REMOTE_TIMEOUT,
};

pub const TOKEN_COMMANDER: &str = "<COM>";
pub const TOKEN_FOLLOWER: &str = "<FOL>";
pub const TOKEN_HISTORY: &str = "<HIS>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    Commander,
    Follower,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub player: Player,
    pub utterance: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dialogue {
    pub turns: Vec<Turn>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LanguageError {
    #[error("empty utterance in turn {0}")]
    EmptyUtterance(usize),
    #[error("utterance in turn {0} contains a reserved token")]
    ReservedToken(usize),
    #[error("unknown sub-goal action `{0}`")]
    UnknownAction(String),
    #[error("sub-goal `{0}` is missing its target")]
    MissingTarget(String),
    #[error("malformed serialized input: {0}")]
    Malformed(String),
}

impl Dialogue {
    pub fn new(turns: Vec<Turn>) -> Result<Self, LanguageError> {
        let d = Dialogue { turns };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), LanguageError> {
        for (i, t) in self.turns.iter().enumerate() {
            if t.utterance.trim().is_empty() {
                return Err(LanguageError::EmptyUtterance(i));
            }
            if [TOKEN_COMMANDER, TOKEN_FOLLOWER, TOKEN_HISTORY]
                .iter()
                .any(|tok| t.utterance.contains(tok))
            {
                return Err(LanguageError::ReservedToken(i));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, player: Player, utterance: impl Into<String>) {
        self.turns.push(Turn {
            player,
            utterance: utterance.into(),
        });
    }

    pub fn commander_utterances(&self) -> impl Iterator<Item = &str> + '_ {
        self.turns
            .iter()
            .filter(|t| t.player == Player::Commander)
            .map(|t| t.utterance.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubGoalAction {
    Navigate,
    PickUp,
    Place,
    Open,
    Close,
    ToggleOn,
    ToggleOff,
    Slice,
    Pour,
}

impl SubGoalAction {
    pub const ALL: [SubGoalAction; 9] = [
        SubGoalAction::Navigate,
        SubGoalAction::PickUp,
        SubGoalAction::Place,
        SubGoalAction::Open,
        SubGoalAction::Close,
        SubGoalAction::ToggleOn,
        SubGoalAction::ToggleOff,
        SubGoalAction::Slice,
        SubGoalAction::Pour,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubGoalAction::Navigate => "Navigate",
            SubGoalAction::PickUp => "PickUp",
            SubGoalAction::Place => "Place",
            SubGoalAction::Open => "Open",
            SubGoalAction::Close => "Close",
            SubGoalAction::ToggleOn => "ToggleOn",
            SubGoalAction::ToggleOff => "ToggleOff",
            SubGoalAction::Slice => "Slice",
            SubGoalAction::Pour => "Pour",
        }
    }

    pub fn is_navigate(self) -> bool {
        self == SubGoalAction::Navigate
    }
}

impl FromStr for SubGoalAction {
    type Err = LanguageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubGoalAction::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| LanguageError::UnknownAction(s.to_string()))
    }
}

impl fmt::Display for SubGoalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An (action, target class) pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubGoal {
    pub action: SubGoalAction,
    pub target: String,
}

impl SubGoal {
    pub fn new(action: SubGoalAction, target: impl Into<String>) -> Self {
        SubGoal {
            action,
            target: target.into(),
        }
    }

    pub fn nav(target: impl Into<String>) -> Self {
        SubGoal::new(SubGoalAction::Navigate, target)
    }
}

impl fmt::Display for SubGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.action, self.target)
    }
}

/// Space-joined "Action Target" tokens.
pub fn format_subgoals(seq: &[SubGoal]) -> String {
    seq.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" ")
}

/// Parses whitespace-separated "Action Target" pairs (newlines allowed).
pub fn parse_subgoals(text: &str) -> Result<Vec<SubGoal>, LanguageError> {
    let mut toks = text.split_whitespace();
    let mut out = Vec::new();
    while let Some(a) = toks.next() {
        let action: SubGoalAction = a.parse()?;
        let target = toks
            .next()
            .ok_or_else(|| LanguageError::MissingTarget(a.to_string()))?;
        out.push(SubGoal::new(action, target));
    }
    Ok(out)
}

/// An executed action together with the class its interaction resolved to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordedAction {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl RecordedAction {
    pub fn motion(m: crate::world::Motion) -> Self {
        RecordedAction {
            action: Action::Motion(m),
            target: None,
        }
    }

    pub fn interact(kind: InteractKind, target_u: f64, target: &str) -> Self {
        RecordedAction {
            action: Action::Interact { kind, target_u },
            target: Some(target.to_string()),
        }
    }
}

/// Converts an action history into sub-goals: interactions map to
/// (action, target) and each run of motions before an interaction collapses
/// into one Navigate toward that interaction's target. Trailing motions are
/// dropped.
pub fn actions_to_subgoals(history: &[RecordedAction]) -> Vec<SubGoal> {
    let mut out = Vec::new();
    let mut moved = false;
    for rec in history {
        match rec.action {
            Action::Motion(_) => moved = true,
            Action::Interact { kind, .. } => {
                let Some(target) = &rec.target else { continue };
                if moved {
                    out.push(SubGoal::nav(target.clone()));
                }
                out.push(SubGoal::new(SubGoalAction::from_interaction(kind), target.clone()));
                moved = false;
            }
            Action::Stop => {}
        }
    }
    out
}

/// Planner input text: role-prefixed utterances, then the history sub-goals.
pub fn serialize(d: &Dialogue, hist: &[SubGoal]) -> String {
    let mut parts: Vec<String> = d
        .turns
        .iter()
        .map(|t| {
            let tok = match t.player {
                Player::Commander => TOKEN_COMMANDER,
                Player::Follower => TOKEN_FOLLOWER,
            };
            format!("{tok} {}", t.utterance.trim())
        })
        .collect();
    parts.push(TOKEN_HISTORY.to_string());
    if !hist.is_empty() {
        parts.push(format_subgoals(hist));
    }
    parts.join(" ")
}

/// Inverse of [`serialize`] (utterance whitespace is normalized to single spaces).
pub fn parse_serialized(text: &str) -> Result<(Dialogue, Vec<SubGoal>), LanguageError> {
    let (dialogue_part, hist_part) = text
        .rsplit_once(TOKEN_HISTORY)
        .ok_or_else(|| LanguageError::Malformed("missing <HIS> token".into()))?;
    let mut turns = Vec::new();
    let mut current: Option<(Player, Vec<&str>)> = None;
    for tok in dialogue_part.split_whitespace() {
        let player = match tok {
            TOKEN_COMMANDER => Some(Player::Commander),
            TOKEN_FOLLOWER => Some(Player::Follower),
            _ => None,
        };
        match (player, current.as_mut()) {
            (Some(p), _) => {
                if let Some((pp, words)) = current.take() {
                    turns.push(Turn {
                        player: pp,
                        utterance: words.join(" "),
                    });
                }
                current = Some((p, Vec::new()));
            }
            (None, Some((_, words))) => words.push(tok),
            (None, None) => {
                return Err(LanguageError::Malformed(format!(
                    "text before the first role token: `{tok}`"
                )))
            }
        }
    }
    if let Some((p, words)) = current {
        turns.push(Turn {
            player: p,
            utterance: words.join(" "),
        });
    }
    let d = Dialogue::new(turns)?;
    Ok((d, parse_subgoals(hist_part)?))
}

/// "CounterTop" -> "counter top".
pub fn spoken_name(class: &str) -> String {
    let mut out = String::new();
    for (i, ch) in class.chars().enumerate() {
        if ch.is_uppercase() && i > 0 {
            out.push(' ');
        }
        out.extend(ch.to_lowercase());
    }
    out
}

#[cfg(test)]
mod tests;
