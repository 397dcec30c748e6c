use std::collections::BTreeSet;

use super::nav::{blocked_cells, cell_value, navigation_field};
use crate::perception::{check_success, EgoFrame, SemanticMap, DEFAULT_SUCCESS_THRESHOLD};
use crate::world::{Action, AgentPose, Cell};

/// Distance under which a target counts as near, in meters.
pub const NEAR_M: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActionPredicate {
    IsEmpty,
    Observe,
    Success,
    Near,
    Move,
    Collision,
    Target,
    Interactive,
    Ignore,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PredicateArg<'a> {
    Class(&'a str),
    Cell(Cell),
    None,
}

/// Everything the action-level predicates read.
pub struct PredicateContext<'a> {
    pub map: &'a SemanticMap,
    pub frame: &'a EgoFrame,
    pub pose: AgentPose,
    /// Previous frame, pose and action, when there was one.
    pub prev: Option<(&'a EgoFrame, AgentPose, Action)>,
    /// Local search around the target ran out.
    pub search_exhausted: bool,
}

/// Cells holding a non-suppressed patch of `class`.
pub fn class_cells(map: &SemanticMap, class: &str) -> BTreeSet<Cell> {
    map.layer(class)
        .map(|l| l.iter().map(|p| map.patch_cell(p)).collect())
        .unwrap_or_default()
}

pub fn is_near(map: &SemanticMap, pose: AgentPose, class: &str, dist_m: f64) -> bool {
    map.distance_to_class(pose.cell, class).is_some_and(|d| d < dist_m)
}

fn reachable(map: &SemanticMap, pose: AgentPose, goals: &BTreeSet<Cell>) -> bool {
    !goals.is_empty() && cell_value(&navigation_field(map, goals, &[pose.cell]), map, pose.cell).is_finite()
}

pub fn eval_action_predicate(p: ActionPredicate, arg: PredicateArg, ctx: &PredicateContext) -> bool {
    use ActionPredicate::*;
    let class = match arg {
        PredicateArg::Class(c) => Some(c),
        _ => None,
    };
    let observe = |c: &str| ctx.frame.observes(c);
    let near = |c: &str| is_near(ctx.map, ctx.pose, c, NEAR_M);
    match (p, class, arg) {
        (IsEmpty, _, PredicateArg::Cell(c)) => !blocked_cells(ctx.map).contains(&c),
        (Observe, Some(c), _) => observe(c),
        (Success, ..) => ctx
            .prev
            .is_some_and(|(f, pose, a)| match a.motion() {
                Some(_) => pose != ctx.pose,
                None => check_success(f, ctx.frame, DEFAULT_SUCCESS_THRESHOLD),
            }),
        (Near, Some(c), _) => {
            if !ctx.map.has_class(c) {
                log::debug!("Near({c}): class not in map");
            }
            near(c)
        }
        (Move, _, PredicateArg::Cell(c)) => reachable(ctx.map, ctx.pose, &BTreeSet::from([c])),
        (Collision, ..) => ctx.prev.is_some_and(|(_, pose, a)| {
            a.motion().is_some_and(|m| m.is_translation()) && pose == ctx.pose
        }),
        (Target, Some(c), _) => observe(c) && reachable(ctx.map, ctx.pose, &class_cells(ctx.map, c)),
        (Interactive, Some(c), _) => observe(c) && near(c),
        (Ignore, Some(c), _) => ctx.search_exhausted && !observe(c) && near(c),
        _ => {
            log::warn!("predicate {p:?} does not take {arg:?}");
            false
        }
    }
}
