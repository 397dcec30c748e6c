use std::collections::BTreeSet;
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fmm::DistanceField;
use super::nav::{blocked_cells, navigation_field, next_step_from_field};
use super::policy::{ExplorationPolicy, PolicyContext};
use super::predicates::NEAR_M;
use crate::language::{SubGoal, SubGoalAction};
use crate::perception::{check_success, update_collision, EgoFrame, Patch, SemanticMap, DEFAULT_SUCCESS_THRESHOLD, PATCH_M};
use crate::world::{
    ray_index_for_u, u_for_ray_index, Action, AgentPose, Cell, Heading, InteractKind, Motion, ObjectId, INTERACT_REACH_M,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutorConfig {
    pub near_m: f64,
    /// Rotations of the local search program.
    pub search_turns: usize,
    /// One-cell probes of the local search program.
    pub search_probes: usize,
    /// Failed attempts on one target before its patches are suppressed.
    pub strikes: u32,
    pub success_threshold: f64,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            near_m: NEAR_M,
            search_turns: 4,
            search_probes: 4,
            strikes: 2,
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
        }
    }
}

const PROBES: [Motion; 4] = [Motion::PanLeft, Motion::PanRight, Motion::PanRight, Motion::PanLeft];

/// Progress of the local search around a target that the map places close
/// by but the frame does not show.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchPhase {
    pub pointer: usize,
    pub target: String,
    pub done: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutorState {
    pub pointer: usize,
    pub fail_count: u32,
    pub step_count: u32,
    pub collision_memory: BTreeSet<(AgentPose, Motion)>,
    pub search_phase: Option<SearchPhase>,
}

/// Ground-truth help from a Commander: where to stand and where to point.
/// With `class` set it applies only to sub-goals on that class.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Guidance {
    pub class: Option<String>,
    pub pose: Option<AgentPose>,
    pub point: Option<f64>,
}

/// A successful Place, remembered so the same object is not picked up
/// again for a later Place into the same receptacle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    pub object: String,
    pub instance: Option<ObjectId>,
    pub receptacle: String,
    pub cell: Cell,
}

enum Approach {
    Move(Motion),
    Facing,
    Stuck,
}

#[derive(Clone, Debug)]
struct Previous {
    action: Action,
    pose: AgentPose,
    frame: EgoFrame,
}

/// The action-level executor: turns a sub-goal plan into one action per
/// call, keeping its own semantic map.
pub struct Executor {
    pub state: ExecutorState,
    pub plan: Vec<SubGoal>,
    pub map: SemanticMap,
    pub config: ExecutorConfig,
    guidance: Option<Guidance>,
    prev: Option<Previous>,
    rng: ChaCha8Rng,
    strikes: u32,
    field_cache: Option<(u64, DistanceField)>,
    stopped: bool,
    /// Class the agent believes it holds, and the instance it saw picked.
    holding: Option<(String, Option<ObjectId>)>,
    placed: Vec<Placement>,
}

fn turn_toward(from: Heading, to: Heading) -> Option<Motion> {
    if from == to {
        None
    } else if from.right() == to {
        Some(Motion::TurnRight)
    } else {
        Some(Motion::TurnLeft)
    }
}

impl Executor {
    pub fn new(plan: Vec<SubGoal>, map: SemanticMap, config: ExecutorConfig, seed: u64) -> Self {
        Executor {
            state: ExecutorState::default(),
            plan,
            map,
            config,
            guidance: None,
            prev: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            strikes: 0,
            field_cache: None,
            stopped: false,
            holding: None,
            placed: Vec::new(),
        }
    }

    /// Declares what the agent holds at the start, for resumed sessions.
    pub fn set_holding(&mut self, class: Option<String>, instance: Option<ObjectId>) {
        self.holding = class.map(|c| (c, instance));
    }

    /// Records a Place made before this executor took over.
    pub fn remember_place(&mut self, placement: Placement) {
        self.placed.push(placement);
    }

    pub fn holding(&self) -> Option<&str> {
        self.holding.as_ref().map(|(c, _)| c.as_str())
    }

    /// Placements to avoid for the current sub-goal: those of its class
    /// into the receptacle of the next Place, when it is a PickUp.
    fn avoided(&self) -> Vec<&Placement> {
        let p = self.state.pointer;
        let Some(g) = self.plan.get(p) else {
            return Vec::new();
        };
        if g.action != SubGoalAction::PickUp {
            return Vec::new();
        }
        match self.plan[p + 1..].iter().find(|n| !n.action.is_navigate()) {
            Some(n) if n.action == SubGoalAction::Place => self
                .placed
                .iter()
                .filter(|pl| pl.object == g.target && pl.receptacle == n.target)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Replaces the plan, keeping the map and collision memory.
    pub fn load(&mut self, plan: Vec<SubGoal>, guidance: Option<Guidance>) {
        self.plan = plan;
        self.guidance = guidance;
        self.state.pointer = 0;
        self.state.search_phase = None;
        self.strikes = 0;
        self.stopped = false;
    }

    pub fn current(&self) -> Option<&SubGoal> {
        self.plan.get(self.state.pointer)
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// Next action given the frame and pose that followed the previous one.
    pub fn decide(&mut self, frame: &EgoFrame, pose: AgentPose, policy: &mut dyn ExplorationPolicy) -> Action {
        if self.stopped {
            return Action::Stop;
        }
        let prev = self.prev.take();
        let last_failed = prev.as_ref().is_some_and(|p| !self.absorb(p, frame, pose));
        self.map.project_frame(frame, pose);
        let last = prev.as_ref().map(|p| p.action);
        let mut action = self.choose(frame, pose, last, last_failed, policy);
        if last_failed && Some(action) == last {
            action = Action::Motion(self.random_feasible(pose, last.and_then(|a| a.motion())));
        }
        if action == Action::Stop {
            self.stopped = true;
        } else {
            self.state.step_count += 1;
        }
        self.prev = Some(Previous {
            action,
            pose,
            frame: frame.clone(),
        });
        action
    }

    /// Judges the previous action; true on success.
    fn absorb(&mut self, p: &Previous, frame: &EgoFrame, pose: AgentPose) -> bool {
        match p.action {
            Action::Stop => true,
            Action::Motion(m) => {
                let ok = pose != p.pose;
                if !ok && m.is_translation() {
                    self.map = update_collision(&self.map, p.pose, p.action);
                    self.state.collision_memory.insert((p.pose, m));
                }
                ok
            }
            Action::Interact { kind, target_u } => {
                let ok = check_success(&p.frame, frame, self.config.success_threshold);
                let class = self.current().map(|g| g.target.clone());
                let hit = self.interaction_patch(p, target_u);
                if ok {
                    match (kind, &class, hit) {
                        (InteractKind::Pickup, Some(c), Some(hit)) => {
                            // the object left its receptacle
                            let cell = self.map.patch_cell(hit);
                            for q in self.map.class_patches_in_cell(c, cell) {
                                if let Some(l) = self.map.layers.get_mut(c) {
                                    l.set(q, false);
                                }
                            }
                            let seen = p.frame.rays.get(ray_index_for_u(target_u)).and_then(|r| r.instance);
                            self.holding = Some((c.clone(), seen));
                        }
                        (InteractKind::Place, Some(c), hit) => {
                            if let (Some((object, instance)), Some(hit)) = (self.holding.take(), hit) {
                                self.placed.push(Placement {
                                    object,
                                    instance,
                                    receptacle: c.clone(),
                                    cell: self.map.patch_cell(hit),
                                });
                            }
                        }
                        _ => {}
                    }
                    self.state.pointer += 1;
                    self.state.search_phase = None;
                    self.strikes = 0;
                } else {
                    self.state.fail_count += 1;
                    self.strikes += 1;
                    if self.strikes >= self.config.strikes {
                        self.strikes = 0;
                        // hints that keep failing are no longer trusted
                        self.guidance = None;
                        if let (Some(c), Some(hit)) = (class, hit) {
                            self.suppress_cell(&c, self.map.patch_cell(hit), hit);
                        }
                    }
                }
                ok
            }
        }
    }

    fn interaction_patch(&self, p: &Previous, u: f64) -> Option<Patch> {
        let w = p.frame.width();
        let i = ray_index_for_u(u);
        let ray = p.frame.rays.get(i)?;
        ray.hit.then(|| self.map.ray_patch(p.pose, i, w, ray.depth_steps as f64))
    }

    fn suppress_cell(&mut self, class: &str, cell: Cell, hit: Patch) {
        let mut patches = self.map.class_patches_in_cell(class, cell);
        if patches.is_empty() {
            patches.push(hit);
        }
        for q in patches {
            self.map.flag_false(class, q);
        }
    }

    fn choose(
        &mut self,
        frame: &EgoFrame,
        pose: AgentPose,
        last: Option<Action>,
        last_failed: bool,
        policy: &mut dyn ExplorationPolicy,
    ) -> Action {
        loop {
            let Some(g) = self.current().cloned() else {
                return Action::Stop;
            };
            if self
                .state
                .search_phase
                .as_ref()
                .is_some_and(|s| s.pointer != self.state.pointer || s.target != g.target)
            {
                self.state.search_phase = None;
            }
            let explore = |this: &mut Self, policy: &mut dyn ExplorationPolicy| {
                let ctx = PolicyContext {
                    map: &this.map,
                    pose,
                    last_failed,
                };
                Action::Motion(policy.next(frame, last, Some(&g), &ctx))
            };

            let hint = self
                .guidance
                .as_ref()
                .filter(|h| h.class.as_ref().is_none_or(|c| *c == g.target))
                .and_then(|h| Some((h.pose?, h.point)));
            if let Some((stand, point)) = hint {
                if pose.cell != stand.cell {
                    let field = self.field_to(BTreeSet::from([stand.cell]), &[pose.cell, stand.cell]);
                    return match next_step_from_field(&field, &self.map, pose) {
                        Ok(m) => Action::Motion(m),
                        Err(_) => explore(self, policy),
                    };
                }
                if let Some(t) = turn_toward(pose.heading, stand.heading) {
                    return Action::Motion(t);
                }
                match (g.action.interaction(), point) {
                    (None, _) => {
                        self.state.pointer += 1;
                        continue;
                    }
                    (Some(kind), Some(u)) => return Action::Interact { kind, target_u: u },
                    // arrived without a point: the map takes over from here
                    (Some(_), None) => self.guidance = None,
                }
            }

            // prefer cells without an object already placed for this goal,
            // falling back to them when nothing else is known
            let avoided = self.avoided();
            let skip: BTreeSet<ObjectId> = avoided.iter().filter_map(|pl| pl.instance).collect();
            let mut excluded: BTreeSet<Cell> = avoided.iter().map(|pl| pl.cell).collect();
            let mut patches = self.target_patches(&g.target, &excluded);
            if patches.is_empty() && !excluded.is_empty() {
                excluded.clear();
                patches = self.target_patches(&g.target, &excluded);
            }
            if patches.is_empty() {
                return explore(self, policy);
            }
            let cells: BTreeSet<Cell> = patches.iter().map(|p| self.map.patch_cell(*p)).collect();
            let (cx, cy) = self.map.cell_center(pose.cell);
            let limit = self.config.near_m / PATCH_M;
            if patches.iter().any(|p| dist(*p, cx, cy) < limit) {
                let w = frame.width();
                // only cells straight ahead count: a receptacle seen from
                // the side shows a single slot, so a change may not register
                let ahead = pose.heading.delta();
                let keep = |i: usize| {
                    let d = frame.rays[i].depth_steps as f64;
                    let c = self.map.patch_cell(self.map.ray_patch(pose, i, w, d));
                    let (dx, dy) = (c.x - pose.cell.x, c.y - pose.cell.y);
                    let in_line = dx * ahead.1 == dy * ahead.0 && dx * ahead.0 + dy * ahead.1 > 0;
                    in_line && !excluded.contains(&c) && frame.rays[i].instance.is_none_or(|o| !skip.contains(&o))
                };
                if let Some(u) = point_in_frame_where(frame, &g.target, keep) {
                    match g.action.interaction() {
                        None => {
                            self.state.pointer += 1;
                            self.state.search_phase = None;
                            continue;
                        }
                        Some(kind) => return Action::Interact { kind, target_u: u },
                    }
                }
                if self.state.search_phase.is_none() {
                    let step = match self.approach(pose, &cells) {
                        Approach::Move(m) => Some(m),
                        Approach::Facing => None,
                        Approach::Stuck => self.face_target(pose, &patches),
                    };
                    if let Some(m) = step {
                        return Action::Motion(m);
                    }
                    self.state.search_phase = Some(SearchPhase {
                        pointer: self.state.pointer,
                        target: g.target.clone(),
                        done: 0,
                    });
                }
                if let Some(m) = self.search_step() {
                    return Action::Motion(m);
                }
                log::debug!("local search for {} exhausted at {:?}", g.target, pose);
                self.suppress_near(pose, &g.target, &excluded);
                self.state.search_phase = None;
                continue;
            }
            let field = self.field_to(cells, &[pose.cell]);
            return match next_step_from_field(&field, &self.map, pose) {
                Ok(m) => Action::Motion(m),
                Err(_) => explore(self, policy),
            };
        }
    }

    fn search_step(&mut self) -> Option<Motion> {
        let (turns, probes) = (self.config.search_turns, self.config.search_probes.min(PROBES.len()));
        let s = self.state.search_phase.as_mut()?;
        let m = if s.done < turns {
            Motion::TurnLeft
        } else if s.done < turns + probes {
            PROBES[s.done - turns]
        } else {
            return None;
        };
        s.done += 1;
        Some(m)
    }

    /// Patches of `class` outside the excluded cells.
    fn target_patches(&self, class: &str, excluded: &BTreeSet<Cell>) -> Vec<Patch> {
        match self.map.layer(class) {
            Some(l) => l.iter().filter(|p| !excluded.contains(&self.map.patch_cell(*p))).collect(),
            None => Vec::new(),
        }
    }

    /// Move toward a free cell next to one of `cells`, then turn to face it.
    fn approach(&mut self, pose: AgentPose, cells: &BTreeSet<Cell>) -> Approach {
        let blocked = blocked_cells(&self.map);
        let mut stands = BTreeSet::new();
        let mut here = Vec::new();
        for c in cells {
            for h in Heading::ALL {
                let (dx, dy) = h.delta();
                let s = c.offset((-dx, -dy));
                if s == pose.cell {
                    here.push(h);
                } else if !blocked.contains(&s) && !cells.contains(&s) {
                    stands.insert(s);
                }
            }
        }
        if !here.is_empty() {
            if here.contains(&pose.heading) {
                return Approach::Facing;
            }
            let h = if here.contains(&pose.heading.left()) {
                pose.heading.left()
            } else if here.contains(&pose.heading.right()) {
                pose.heading.right()
            } else {
                here[0]
            };
            return turn_toward(pose.heading, h).map_or(Approach::Facing, Approach::Move);
        }
        if stands.is_empty() {
            return Approach::Stuck;
        }
        let field = self.field_to(stands, &[pose.cell]);
        next_step_from_field(&field, &self.map, pose).map_or(Approach::Stuck, Approach::Move)
    }

    /// Turn that brings the nearest of `patches` in front, if needed.
    fn face_target(&self, pose: AgentPose, patches: &[Patch]) -> Option<Motion> {
        let (cx, cy) = self.map.cell_center(pose.cell);
        let nearest = patches
            .iter()
            .copied()
            .min_by(|a, b| dist(*a, cx, cy).total_cmp(&dist(*b, cx, cy)))?;
        let (dx, dy) = (nearest.x as f64 + 0.5 - cx, nearest.y as f64 + 0.5 - cy);
        let want = if dx.abs() >= dy.abs() {
            if dx > 0.0 {
                Heading::East
            } else {
                Heading::West
            }
        } else if dy > 0.0 {
            Heading::South
        } else {
            Heading::North
        };
        turn_toward(pose.heading, want)
    }

    /// Suppresses every patch of `class` that makes it count as near.
    fn suppress_near(&mut self, pose: AgentPose, class: &str, excluded: &BTreeSet<Cell>) {
        let (cx, cy) = self.map.cell_center(pose.cell);
        let limit = self.config.near_m / PATCH_M;
        let near: Vec<Patch> = self
            .target_patches(class, excluded)
            .into_iter()
            .filter(|p| dist(*p, cx, cy) < limit)
            .collect();
        for p in near {
            self.map.flag_false(class, p);
        }
    }

    fn field_to(&mut self, goals: BTreeSet<Cell>, force_free: &[Cell]) -> DistanceField {
        let mut h = DefaultHasher::new();
        self.map.obstacle.hash(&mut h);
        goals.hash(&mut h);
        force_free.hash(&mut h);
        let key = h.finish();
        if let Some((k, f)) = &self.field_cache {
            if *k == key {
                return f.clone();
            }
        }
        let f = navigation_field(&self.map, &goals, force_free);
        self.field_cache = Some((key, f.clone()));
        f
    }

    /// Uniform over motions other than `exclude` that are not known to
    /// collide from `pose`.
    fn random_feasible(&mut self, pose: AgentPose, exclude: Option<Motion>) -> Motion {
        let blocked = blocked_cells(&self.map);
        let mut options: Vec<Motion> = Motion::ALL
            .into_iter()
            .filter(|m| Some(*m) != exclude)
            .filter(|m| !self.state.collision_memory.contains(&(pose, *m)))
            .filter(|m| !m.is_translation() || !blocked.contains(&pose.after(*m).cell))
            .collect();
        if options.is_empty() {
            options = Motion::ALL.into_iter().filter(|m| Some(*m) != exclude).collect();
        }
        options[self.rng.random_range(0..options.len())]
    }
}

fn dist(p: Patch, cx: f64, cy: f64) -> f64 {
    let (dx, dy) = (p.x as f64 + 0.5 - cx, p.y as f64 + 0.5 - cy);
    (dx * dx + dy * dy).sqrt()
}

/// View coordinate of the nearest in-reach run of at least [`MIN_RUN_RAYS`]
/// rays showing `class`.
pub fn point_in_frame(frame: &EgoFrame, class: &str) -> Option<f64> {
    point_in_frame_where(frame, class, |_| true)
}

/// Runs narrower than this are ignored: a sliver at the edge of the view
/// hides most of what an interaction changes.
pub const MIN_RUN_RAYS: usize = 4;

/// As [`point_in_frame`], considering only rays accepted by `keep`.
pub fn point_in_frame_where(frame: &EgoFrame, class: &str, keep: impl Fn(usize) -> bool) -> Option<f64> {
    let reach = |i: usize| {
        let r = &frame.rays[i];
        r.hit && r.class.as_deref() == Some(class) && r.depth_m() <= INTERACT_REACH_M + 1e-9 && keep(i)
    };
    let mut best: Option<(u8, usize, usize)> = None;
    let mut i = 0;
    while i < frame.width() {
        if !reach(i) {
            i += 1;
            continue;
        }
        let start = i;
        let mut depth = u8::MAX;
        while i < frame.width() && reach(i) {
            depth = depth.min(frame.rays[i].depth_steps);
            i += 1;
        }
        if i - start >= MIN_RUN_RAYS && best.is_none_or(|b| depth < b.0) {
            best = Some((depth, start, i - 1));
        }
    }
    best.map(|(_, a, b)| u_for_ray_index((a + b) / 2))
}
