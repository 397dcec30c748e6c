use super::raycast::ray_index_for_u;
use super::{
    u_for_ray_index, Action, ActionError, AgentPose, Cell, Heading, InteractKind, Motion, ObjectId,
    ObjectState, ToggleEffect, WorldState, INTERACT_REACH_M,
};
use crate::language::{SubGoal, SubGoalAction};

use super::raycast::DEPTH_STEP_M;

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub success: bool,
    pub error: Option<ActionError>,
    /// Instance the interaction resolved to, when it got that far.
    pub target: Option<ObjectId>,
}

impl StepOutcome {
    fn ok(target: Option<ObjectId>) -> Self {
        StepOutcome {
            success: true,
            error: None,
            target,
        }
    }

    fn fail(error: ActionError, target: Option<ObjectId>) -> Self {
        StepOutcome {
            success: false,
            error: Some(error),
            target,
        }
    }
}

impl WorldState {
    /// Applies one action in place.
    pub fn apply(&mut self, action: Action) -> StepOutcome {
        match action {
            Action::Stop => StepOutcome::ok(None),
            Action::Motion(m) => {
                self.step += 1;
                self.apply_motion(m)
            }
            Action::Interact { kind, target_u } => {
                self.step += 1;
                self.apply_interaction(kind, target_u)
            }
        }
    }

    fn apply_motion(&mut self, m: Motion) -> StepOutcome {
        let next = self.agent.after(m);
        if m.is_translation() && self.is_blocked(next.cell) {
            return StepOutcome::fail(ActionError::Blocked, None);
        }
        self.agent = next;
        StepOutcome::ok(None)
    }

    /// Resolves a view coordinate to the instance under it.
    pub fn resolve_target(&self, target_u: f64) -> Result<ObjectId, ActionError> {
        let hit = self.cast_ray_index(self.agent, ray_index_for_u(target_u));
        let id = hit.instance.ok_or(ActionError::ObjectNotFound)?;
        if hit.depth_steps as f64 * DEPTH_STEP_M > INTERACT_REACH_M + 1e-9 {
            return Err(ActionError::TooFar);
        }
        Ok(id)
    }

    fn affords(&self, id: ObjectId) -> super::Affordances {
        self.class_of(id).map(|c| c.affordances).unwrap_or_default()
    }

    fn apply_interaction(&mut self, kind: InteractKind, target_u: f64) -> StepOutcome {
        use ActionError::*;
        // hand-side preconditions come first
        match kind {
            InteractKind::Pickup if self.held.is_some() => return StepOutcome::fail(HandOccupied, None),
            InteractKind::Place if self.held.is_none() => return StepOutcome::fail(NothingHeld, None),
            InteractKind::Pour if self.held.is_none() => return StepOutcome::fail(NothingHeld, None),
            InteractKind::Slice if self.held_class() != Some("Knife") => {
                return StepOutcome::fail(KnifeNotInHand, None)
            }
            _ => {}
        }
        let target = match self.resolve_target(target_u) {
            Ok(t) => t,
            Err(e) => return StepOutcome::fail(e, None),
        };
        let result = match kind {
            InteractKind::Pickup => self.pickup(target),
            InteractKind::Place => self.place(target),
            InteractKind::Open | InteractKind::Close => {
                if !self.affords(target).openable {
                    Err(NotOpenable)
                } else {
                    self.obj_mut(target).state.open = kind == InteractKind::Open;
                    Ok(())
                }
            }
            InteractKind::ToggleOn | InteractKind::ToggleOff => {
                if !self.affords(target).toggleable {
                    Err(NotToggleable)
                } else {
                    let on = kind == InteractKind::ToggleOn;
                    self.obj_mut(target).state.on = on;
                    if on {
                        self.run_toggle_effect(target);
                    }
                    Ok(())
                }
            }
            InteractKind::Slice => self.slice(target),
            InteractKind::Pour => self.pour(target),
        };
        match result {
            Ok(()) => StepOutcome::ok(Some(target)),
            Err(e) => StepOutcome::fail(e, Some(target)),
        }
    }

    fn obj_mut(&mut self, id: ObjectId) -> &mut super::ObjectInstance {
        self.objects.get_mut(&id).expect("resolved instance exists")
    }

    fn pickup(&mut self, target: ObjectId) -> Result<(), ActionError> {
        if !self.affords(target).movable {
            return Err(ActionError::ObjectNotFound);
        }
        self.obj_mut(target).parent = None;
        self.held = Some(target);
        Ok(())
    }

    fn place(&mut self, target: ObjectId) -> Result<(), ActionError> {
        let held = self.held.expect("checked above");
        // the point may land on an item resting on the receptacle
        let mut cur = Some(target);
        let mut receptacle = None;
        while let Some(id) = cur {
            if self.affords(id).receptacle {
                receptacle = Some(id);
                break;
            }
            cur = self.objects.get(&id).and_then(|o| o.parent);
        }
        let rec = receptacle.ok_or(ActionError::InvalidPlacement)?;
        if self.hides_contents(rec) {
            return Err(ActionError::InvalidPlacement);
        }
        if self.children(rec).count() >= self.rules.receptacle_capacity {
            return Err(ActionError::ReceptacleFull);
        }
        let cell = self.objects[&rec].cell;
        self.obj_mut(held).parent = Some(rec);
        self.move_subtree(held, cell);
        self.held = None;
        Ok(())
    }

    fn move_subtree(&mut self, id: ObjectId, cell: Cell) {
        let kids: Vec<ObjectId> = self.children(id).map(|o| o.id).collect();
        self.obj_mut(id).cell = cell;
        for k in kids {
            self.move_subtree(k, cell);
        }
    }

    fn descendants(&self, id: ObjectId) -> Vec<ObjectId> {
        let mut out = Vec::new();
        let mut stack: Vec<ObjectId> = self.children(id).map(|o| o.id).collect();
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.children(c).map(|o| o.id));
        }
        out.sort();
        out
    }

    fn run_toggle_effect(&mut self, appliance: ObjectId) {
        let Some(effect) = self.class_of(appliance).and_then(|c| c.on_effect) else {
            return;
        };
        match effect {
            ToggleEffect::WashHeld => {
                if let Some(h) = self.held {
                    let fillable = self.affords(h).fillable;
                    let o = self.obj_mut(h);
                    o.state.dirty = false;
                    if fillable {
                        o.state.filled = true;
                    }
                }
            }
            ToggleEffect::Toast => {
                for d in self.descendants(appliance) {
                    self.obj_mut(d).state.toasted = true;
                }
            }
            ToggleEffect::Cook => {
                for d in self.descendants(appliance) {
                    self.obj_mut(d).state.cooked = true;
                }
            }
            ToggleEffect::FillContents => {
                let kids: Vec<ObjectId> = self.children(appliance).map(|o| o.id).collect();
                for k in kids {
                    if self.affords(k).fillable {
                        self.obj_mut(k).state.filled = true;
                    }
                }
            }
        }
    }

    fn slice(&mut self, target: ObjectId) -> Result<(), ActionError> {
        let t = self.objects[&target].clone();
        if !self.affords(target).sliceable || t.state.sliced {
            return Err(ActionError::NotSliceable);
        }
        // contents of a sliced object drop into its parent
        let kids: Vec<ObjectId> = self.children(target).map(|o| o.id).collect();
        for k in kids {
            self.obj_mut(k).parent = t.parent;
        }
        self.objects.remove(&target);
        for _ in 0..self.rules.slice_count.max(1) {
            let id = self.alloc_id();
            self.objects.insert(
                id,
                super::ObjectInstance {
                    id,
                    class: t.class.clone(),
                    cell: t.cell,
                    parent: t.parent,
                    state: ObjectState {
                        sliced: true,
                        ..t.state
                    },
                },
            );
        }
        Ok(())
    }

    fn pour(&mut self, target: ObjectId) -> Result<(), ActionError> {
        let held = self.held.expect("checked above");
        if !self.affords(held).fillable || !self.objects[&held].state.filled {
            return Err(ActionError::PourUnavailable);
        }
        if !self.affords(target).fillable {
            return Err(ActionError::PourUnavailable);
        }
        self.obj_mut(target).state.filled = true;
        self.obj_mut(held).state.filled = false;
        Ok(())
    }

    /// Adjacent free cells from which `target_cell` is faced directly.
    pub fn viewing_poses(&self, target_cell: Cell) -> Vec<AgentPose> {
        Heading::ALL
            .into_iter()
            .filter_map(|h| {
                let stand = target_cell.offset(h.reverse().delta());
                (!self.is_blocked(stand)).then_some(AgentPose::new(stand, h))
            })
            .collect()
    }

    /// Center ray of `id` as seen from `pose`, normalized to [0, 1].
    pub fn point_of(&self, pose: AgentPose, id: ObjectId) -> Option<f64> {
        let hits = self.cast_rays(pose);
        let idx: Vec<usize> = hits
            .iter()
            .enumerate()
            .filter(|(_, h)| h.instance == Some(id))
            .map(|(i, _)| i)
            .collect();
        let (first, last) = (*idx.first()?, *idx.last()?);
        Some(u_for_ray_index((first + last) / 2))
    }
}

/// Executes one sub-goal with ground-truth targeting, teleporting the agent
/// next to the nearest usable instance of the target class.
pub fn teleport_execute(state: &WorldState, g: &SubGoal) -> (WorldState, bool, Option<ActionError>) {
    let mut best: Option<(i64, ObjectId, AgentPose, Option<f64>)> = None;
    let mut fallback: Option<(i64, ObjectId, AgentPose, Option<f64>)> = None;
    for inst in state.instances_of(&g.target) {
        let Some(anchor) = state.visible_anchor(inst.id) else { continue };
        let cell = state.objects[&anchor].cell;
        for pose in state.viewing_poses(cell) {
            let d = pose.cell.dist2(state.agent.cell);
            let mut probe = state.clone();
            probe.agent = pose;
            let u = probe.point_of(pose, inst.id);
            let cand = (d, inst.id, pose, u);
            let usable = match g.action.interaction() {
                None => true,
                Some(kind) => u.is_some_and(|u| {
                    let mut trial = probe.clone();
                    trial
                        .apply(Action::Interact { kind, target_u: u })
                        .success
                }),
            };
            let slot = if usable { &mut best } else { &mut fallback };
            if slot.as_ref().is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
                *slot = Some(cand);
            }
        }
    }
    let Some((_, _, pose, u)) = best.or(fallback) else {
        return (state.clone(), false, Some(ActionError::ObjectNotFound));
    };
    let mut next = state.clone();
    next.agent = pose;
    match g.action.interaction() {
        None => (next, true, None),
        Some(kind) => {
            let Some(u) = u else {
                next.step += 1;
                return (next, false, Some(ActionError::ObjectNotFound));
            };
            let out = next.apply(Action::Interact { kind, target_u: u });
            (next, out.success, out.error)
        }
    }
}

impl SubGoalAction {
    /// Simulator interaction behind a sub-goal action; `None` for Navigate.
    pub fn interaction(self) -> Option<InteractKind> {
        Some(match self {
            SubGoalAction::Navigate => return None,
            SubGoalAction::PickUp => InteractKind::Pickup,
            SubGoalAction::Place => InteractKind::Place,
            SubGoalAction::Open => InteractKind::Open,
            SubGoalAction::Close => InteractKind::Close,
            SubGoalAction::ToggleOn => InteractKind::ToggleOn,
            SubGoalAction::ToggleOff => InteractKind::ToggleOff,
            SubGoalAction::Slice => InteractKind::Slice,
            SubGoalAction::Pour => InteractKind::Pour,
        })
    }

    pub fn from_interaction(kind: InteractKind) -> SubGoalAction {
        match kind {
            InteractKind::Pickup => SubGoalAction::PickUp,
            InteractKind::Place => SubGoalAction::Place,
            InteractKind::Open => SubGoalAction::Open,
            InteractKind::Close => SubGoalAction::Close,
            InteractKind::ToggleOn => SubGoalAction::ToggleOn,
            InteractKind::ToggleOff => SubGoalAction::ToggleOff,
            InteractKind::Slice => SubGoalAction::Slice,
            InteractKind::Pour => SubGoalAction::Pour,
        }
    }
}
