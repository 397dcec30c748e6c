//! Ground-truth demonstrator: walks the true grid to a pose from which each
//! sub-goal's interaction succeeds. Used to synthesize reference actions.

use std::collections::{BTreeMap, VecDeque};

use crate::language::{RecordedAction, SubGoal, SubGoalAction};
use crate::world::{Action, AgentPose, Motion, ObjectId, WorldState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExpertError {
    #[error("sub-goal {index} ({goal}): no pose reaches a usable {target}")]
    Unreachable { index: usize, goal: String, target: String },
    #[error("sub-goal {index} ({goal}) failed: {reason}")]
    Failed { index: usize, goal: String, reason: String },
}

/// Receptacle class of the Place that immediately follows interaction `i`,
/// skipping Navigates.
pub fn next_place_target(plan: &[SubGoal], i: usize) -> Option<&str> {
    plan.iter()
        .skip(i + 1)
        .find(|g| !g.action.is_navigate())
        .filter(|g| g.action == SubGoalAction::Place)
        .map(|g| g.target.as_str())
}

pub fn inside_class(state: &WorldState, id: ObjectId, class: &str) -> bool {
    let mut cur = state.objects.get(&id).and_then(|o| o.parent);
    while let Some(p) = cur {
        let Some(o) = state.objects.get(&p) else { break };
        if o.class == class {
            return true;
        }
        cur = o.parent;
    }
    false
}

/// Poses adjacent to an instance of `g.target` from which the sub-goal
/// works, with the view coordinate to use. Instances inside a `exclude_in`
/// are skipped. Without `trial` a pose only has to put the instance under
/// the view coordinate; with it the interaction must also succeed.
pub fn stand_points(
    state: &WorldState,
    g: &SubGoal,
    exclude_in: Option<&str>,
    trial: bool,
) -> BTreeMap<AgentPose, f64> {
    let mut out = BTreeMap::new();
    for inst in state.instances_of(&g.target) {
        let spent = g.action == SubGoalAction::Slice && inst.state.sliced;
        if spent || exclude_in.is_some_and(|c| inside_class(state, inst.id, c)) || state.held == Some(inst.id) {
            continue;
        }
        let Some(anchor) = state.visible_anchor(inst.id) else { continue };
        for pose in state.viewing_poses(state.objects[&anchor].cell) {
            let Some(u) = state.point_of(pose, inst.id) else { continue };
            let mut probe = state.clone();
            probe.agent = pose;
            let ok = match g.action.interaction() {
                None => true,
                Some(kind) => {
                    probe.resolve_target(u) == Ok(inst.id)
                        && (!trial || probe.apply(Action::Interact { kind, target_u: u }).success)
                }
            };
            if ok {
                out.entry(pose).or_insert(u);
            }
        }
    }
    out
}

/// Shortest motion sequence from the agent pose to any pose in `goals`.
pub fn shortest_motions(state: &WorldState, goals: &BTreeMap<AgentPose, f64>) -> Option<(Vec<Motion>, AgentPose)> {
    let start = state.agent;
    if goals.contains_key(&start) {
        return Some((Vec::new(), start));
    }
    let mut prev: BTreeMap<AgentPose, (AgentPose, Motion)> = BTreeMap::new();
    let mut q = VecDeque::from([start]);
    while let Some(p) = q.pop_front() {
        for m in Motion::ALL {
            let n = p.after(m);
            if (m.is_translation() && state.is_blocked(n.cell)) || n == start || prev.contains_key(&n) {
                continue;
            }
            prev.insert(n, (p, m));
            if goals.contains_key(&n) {
                let mut path = vec![m];
                let mut cur = p;
                while cur != start {
                    let (pp, pm) = prev[&cur];
                    path.push(pm);
                    cur = pp;
                }
                path.reverse();
                return Some((path, n));
            }
            q.push_back(n);
        }
    }
    None
}

/// Executes `plan` on a copy of `state`, returning the actions taken and
/// the final state.
pub fn demonstrate(state: &WorldState, plan: &[SubGoal]) -> Result<(Vec<RecordedAction>, WorldState), ExpertError> {
    let mut w = state.clone();
    let mut out = Vec::new();
    for (i, g) in plan.iter().enumerate() {
        let exclude = match g.action {
            SubGoalAction::PickUp => next_place_target(plan, i),
            _ => None,
        };
        let goals = stand_points(&w, g, exclude, true);
        let unreachable = || ExpertError::Unreachable {
            index: i,
            goal: g.to_string(),
            target: g.target.clone(),
        };
        if g.action.is_navigate() && goals.is_empty() {
            return Err(unreachable());
        }
        let (path, pose) = shortest_motions(&w, &goals).ok_or_else(unreachable)?;
        for m in path {
            let r = w.apply(Action::Motion(m));
            debug_assert!(r.success);
            out.push(RecordedAction::motion(m));
        }
        debug_assert_eq!(w.agent, pose);
        if let Some(kind) = g.action.interaction() {
            let u = goals[&pose];
            let r = w.apply(Action::Interact { kind, target_u: u });
            if !r.success {
                return Err(ExpertError::Failed {
                    index: i,
                    goal: g.to_string(),
                    reason: r.error.map(|e| e.to_string()).unwrap_or_default(),
                });
            }
            out.push(RecordedAction::interact(kind, u, &g.target));
        }
    }
    Ok((out, w))
}
