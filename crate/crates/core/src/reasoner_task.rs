//! Task-level commonsense: predicate evaluation under ideal execution and
//! sub-goal sequence rectification.

use std::fmt;

use crate::language::{SubGoal, SubGoalAction};
use crate::world::ClassRegistry;

/// Where surplus held objects are put down.
pub const DUMP_TARGET: &str = "CounterTop";
pub const KNIFE: &str = "Knife";

/// Agent state assuming every earlier sub-goal succeeded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdealAgentState {
    pub picked_object: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskPredicate {
    Movable,
    Sliceable,
    Openable,
    Toggleable,
    IsReceptacle,
    IsGrasped,
    Pick,
    Place,
    Slice,
}

fn affordance(registry: &ClassRegistry, class: &str, f: impl Fn(&crate::world::Affordances) -> bool) -> bool {
    match registry.get(class) {
        Some(c) => f(&c.affordances),
        None => {
            log::warn!("predicate over unknown class `{class}`");
            false
        }
    }
}

/// Evaluates a predicate. `arg` is the object class; IsGrasped ignores it.
pub fn eval_task_predicate(p: TaskPredicate, arg: &str, state: &IdealAgentState, registry: &ClassRegistry) -> bool {
    use TaskPredicate::*;
    match p {
        Movable => affordance(registry, arg, |a| a.movable),
        Sliceable => affordance(registry, arg, |a| a.sliceable),
        Openable => affordance(registry, arg, |a| a.openable),
        Toggleable => affordance(registry, arg, |a| a.toggleable),
        IsReceptacle => affordance(registry, arg, |a| a.receptacle),
        IsGrasped => state.picked_object.is_some(),
        Pick => state.picked_object.is_none() && eval_task_predicate(Movable, arg, state, registry),
        Place => state.picked_object.is_some() && eval_task_predicate(IsReceptacle, arg, state, registry),
        Slice => {
            state.picked_object.as_deref() == Some(KNIFE) && eval_task_predicate(Sliceable, arg, state, registry)
        }
    }
}

fn sg(a: SubGoalAction, t: &str) -> SubGoal {
    SubGoal::new(a, t)
}

/// Puts exactly one Navigate to the target before every interaction.
pub fn normalize_navigation(seq: &[SubGoal]) -> Vec<SubGoal> {
    let mut out = Vec::with_capacity(seq.len() * 2);
    for g in seq.iter().filter(|g| !g.action.is_navigate()) {
        out.push(SubGoal::nav(g.target.clone()));
        out.push(g.clone());
    }
    out
}

/// Repairs a sub-goal sequence, starting from empty hands.
pub fn rectify(g: &[SubGoal], registry: &ClassRegistry) -> Vec<SubGoal> {
    rectify_from(g, registry, None)
}

/// Repairs a sub-goal sequence for an agent that starts out holding `held`.
pub fn rectify_from(g: &[SubGoal], registry: &ClassRegistry, held: Option<&str>) -> Vec<SubGoal> {
    use SubGoalAction::*;
    let mut st = IdealAgentState {
        picked_object: held.map(str::to_string),
    };
    let mut out: Vec<SubGoal> = Vec::with_capacity(g.len() + 4);
    for step in g.iter().filter(|s| !s.action.is_navigate()) {
        let x = step.target.as_str();
        match step.action {
            PickUp => {
                if !eval_task_predicate(TaskPredicate::Movable, x, &st, registry) {
                    continue;
                }
                if st.picked_object.is_some() {
                    out.push(sg(Place, DUMP_TARGET));
                }
                st.picked_object = Some(x.to_string());
            }
            Place => {
                if !eval_task_predicate(TaskPredicate::Place, x, &st, registry) {
                    continue;
                }
                st.picked_object = None;
            }
            Slice => {
                if !eval_task_predicate(TaskPredicate::Sliceable, x, &st, registry) {
                    continue;
                }
                if st.picked_object.as_deref() != Some(KNIFE) {
                    if st.picked_object.is_some() {
                        out.push(sg(Place, DUMP_TARGET));
                    }
                    out.push(sg(PickUp, KNIFE));
                    st.picked_object = Some(KNIFE.to_string());
                }
            }
            Open | Close => {
                if !eval_task_predicate(TaskPredicate::Openable, x, &st, registry) {
                    continue;
                }
            }
            ToggleOn | ToggleOff => {
                if !eval_task_predicate(TaskPredicate::Toggleable, x, &st, registry) {
                    continue;
                }
            }
            Pour | Navigate => {}
        }
        out.push(step.clone());
    }
    normalize_navigation(&out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealViolation {
    pub index: usize,
    pub reason: String,
}

impl fmt::Display for IdealViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.index, self.reason)
    }
}

/// Replays a sequence through an executor that tracks only the held object,
/// and checks Navigate normalization along the way.
pub fn validate_ideal(seq: &[SubGoal], registry: &ClassRegistry, held: Option<&str>) -> Result<(), IdealViolation> {
    use SubGoalAction::*;
    let mut st = IdealAgentState {
        picked_object: held.map(str::to_string),
    };
    let fail = |index: usize, reason: String| Err(IdealViolation { index, reason });
    for (i, g) in seq.iter().enumerate() {
        let x = g.target.as_str();
        if g.action.is_navigate() {
            match seq.get(i + 1) {
                Some(n) if !n.action.is_navigate() && n.target == g.target => {}
                _ => return fail(i, format!("{g} is not followed by an interaction on {x}")),
            }
            continue;
        }
        if i == 0 || seq[i - 1] != SubGoal::nav(x) {
            return fail(i, format!("{g} lacks its Navigate"));
        }
        let (pred, ok) = match g.action {
            PickUp => (TaskPredicate::Pick, true),
            Place => (TaskPredicate::Place, true),
            Slice => (TaskPredicate::Slice, true),
            Open | Close => (TaskPredicate::Openable, true),
            ToggleOn | ToggleOff => (TaskPredicate::Toggleable, true),
            Pour | Navigate => (TaskPredicate::IsGrasped, false),
        };
        if ok && !eval_task_predicate(pred, x, &st, registry) {
            return fail(i, format!("{g} violates {pred:?}"));
        }
        match g.action {
            PickUp => st.picked_object = Some(x.to_string()),
            Place => st.picked_object = None,
            _ => {}
        }
    }
    Ok(())
}

/// Line diff of two sequences ("+ X" inserted, "- X" removed), by longest
/// common subsequence.
pub fn diff(before: &[SubGoal], after: &[SubGoal]) -> Vec<String> {
    let (n, m) = (before.len(), after.len());
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if before[i] == after[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < n || j < m {
        if i < n && j < m && before[i] == after[j] {
            i += 1;
            j += 1;
        } else if j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j]) {
            out.push(format!("+ {}", after[j]));
            j += 1;
        } else {
            out.push(format!("- {}", before[i]));
            i += 1;
        }
    }
    out
}
