//! Rule-based Commander for two-agent sessions. It reads the ground truth,
//! tells the Follower one sub-goal at a time, and attaches as much location
//! help as its setting allows.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bench::expert::{next_place_target, shortest_motions, stand_points};
use crate::bench::runner::{episode_noise, episode_seed, header, make_policy, resume, Episode, ExecutorAgent, RunConfig};
use crate::bench::trace::EpisodeTrace;
use crate::bench::{metrics::Termination, Instance};
use crate::goal::{Condition, GoalSpec};
use crate::language::templates::{task_template, utterance, TaskParams};
use crate::language::{spoken_name, SubGoal, SubGoalAction};
use crate::perception::render_from;
use crate::reasoner_action::{Executor, Guidance};
use crate::reasoner_task::rectify_from;
use crate::world::{u_for_ray_index, AgentPose, Cell, Heading, ObjectId, WorldState, CELL_SIZE_M};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommanderSetting {
    /// Stand pose and view point of the target.
    FullInfo,
    /// Stand pose only.
    NoSegmentation,
    /// Class name only.
    NoSegNoGoalLoc,
}

impl CommanderSetting {
    pub const ALL: [CommanderSetting; 3] = [
        CommanderSetting::FullInfo,
        CommanderSetting::NoSegmentation,
        CommanderSetting::NoSegNoGoalLoc,
    ];

    pub fn allows_pose(self) -> bool {
        self != CommanderSetting::NoSegNoGoalLoc
    }

    pub fn allows_point(self) -> bool {
        self == CommanderSetting::FullInfo
    }
}

impl std::str::FromStr for CommanderSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "fullinfo" | "full" => Ok(CommanderSetting::FullInfo),
            "nosegmentation" | "noseg" => Ok(CommanderSetting::NoSegmentation),
            "nosegnogoalloc" | "none" => Ok(CommanderSetting::NoSegNoGoalLoc),
            _ => Err(format!("unknown commander setting `{s}`")),
        }
    }
}

/// Where to stand: cell center in meters and facing in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseHint {
    pub x: f64,
    pub y: f64,
    pub rotation: u32,
}

impl PoseHint {
    pub fn from_pose(p: AgentPose) -> Self {
        let (x, y) = p.cell.center_m();
        PoseHint {
            x,
            y,
            rotation: p.heading.degrees(),
        }
    }

    pub fn to_pose(self) -> Option<AgentPose> {
        let cell = Cell::new((self.x / CELL_SIZE_M).floor() as i32, (self.y / CELL_SIZE_M).floor() as i32);
        Some(AgentPose::new(cell, Heading::from_degrees(self.rotation as i64)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstructionKind {
    NavigateTo,
    Interact,
    TaskHint,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub kind: InstructionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<SubGoalAction>,
    pub target_class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose_hint: Option<PoseHint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_hint: Option<f64>,
    pub text: String,
}

impl Instruction {
    pub fn done() -> Self {
        Instruction {
            kind: InstructionKind::Done,
            action: None,
            target_class: String::new(),
            pose_hint: None,
            point_hint: None,
            text: "all done, thanks".into(),
        }
    }

    pub fn subgoal(&self) -> Option<SubGoal> {
        self.action.map(|a| SubGoal::new(a, self.target_class.clone()))
    }

    /// True when the hints respect `setting`.
    pub fn respects(&self, setting: CommanderSetting) -> bool {
        (self.pose_hint.is_none() || setting.allows_pose()) && (self.point_hint.is_none() || setting.allows_point())
    }
}

fn phrase(action: SubGoalAction, class: &str) -> String {
    let x = spoken_name(class);
    match action {
        SubGoalAction::Navigate => format!("go to the {x}"),
        SubGoalAction::PickUp => format!("pick up the {x}"),
        SubGoalAction::Place => format!("put it on the {x}"),
        SubGoalAction::Open => format!("open the {x}"),
        SubGoalAction::Close => format!("close the {x}"),
        SubGoalAction::ToggleOn => format!("turn on the {x}"),
        SubGoalAction::ToggleOff => format!("turn off the {x}"),
        SubGoalAction::Slice => format!("slice the {x}"),
        SubGoalAction::Pour => format!("pour it into the {x}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageBody {
    Request,
    Instruction(Instruction),
    Report { success: bool, steps: usize },
}

/// One protocol message, stamped with the episode step it was sent at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub step: usize,
    pub setting: CommanderSetting,
    pub body: MessageBody,
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            MessageBody::Request => write!(f, "[{}] follower: what next?", self.step),
            MessageBody::Instruction(i) => write!(f, "[{}] commander: {}", self.step, i.text),
            MessageBody::Report { success, steps } => {
                write!(f, "[{}] follower: {} after {steps} steps", self.step, if *success { "done" } else { "failed" })
            }
        }
    }
}

/// Templated descriptions of the goal conditions not yet met.
pub fn progress_check(state: &WorldState, goal: &GoalSpec) -> Vec<String> {
    pending(state, goal).into_iter().map(|c| c.describe()).collect()
}

fn pending<'a>(state: &WorldState, goal: &'a GoalSpec) -> Vec<&'a Condition> {
    goal.conditions.iter().filter(|c| !state.condition_met(c)).collect()
}

/// Viewing pose closest to the agent for the nearest instance of `class`.
/// Objects inside closed containers resolve to the container.
pub fn search_object(state: &WorldState, class: &str) -> Option<PoseHint> {
    let mut goals = std::collections::BTreeMap::new();
    for inst in state.instances_of(class) {
        let Some(anchor) = state.visible_anchor(inst.id) else { continue };
        for pose in state.viewing_poses(state.objects[&anchor].cell) {
            if let Some(u) = state.point_of(pose, anchor) {
                goals.entry(pose).or_insert(u);
            }
        }
    }
    let (_, pose) = shortest_motions(state, &goals)?;
    Some(PoseHint::from_pose(pose))
}

/// View coordinate of the nearest visible instance of `class` from
/// `viewer`: its center ray over a noise-free frame.
pub fn select_oid(state: &WorldState, class: &str, viewer: AgentPose) -> Option<f64> {
    let frame = render_from(state, viewer);
    let nearest: ObjectId = frame
        .rays
        .iter()
        .filter(|r| r.class.as_deref() == Some(class))
        .min_by_key(|r| r.depth_steps)?
        .instance?;
    let idx: Vec<usize> = frame
        .rays
        .iter()
        .enumerate()
        .filter(|(_, r)| r.instance == Some(nearest))
        .map(|(i, _)| i)
        .collect();
    Some(run_center(idx[0], idx[idx.len() - 1]))
}

/// View coordinate of the middle ray of `first..=last`.
pub fn run_center(first: usize, last: usize) -> f64 {
    u_for_ray_index((first + last) / 2)
}

/// Hints for `g` given the rest of its fragment (to skip objects already
/// delivered to the next Place's receptacle).
fn hints(state: &WorldState, g: &SubGoal, fragment: &[SubGoal], at: usize) -> Option<(AgentPose, f64)> {
    let exclude = match g.action {
        SubGoalAction::PickUp => next_place_target(fragment, at),
        _ => None,
    };
    let mut goals = stand_points(state, g, exclude, true);
    if goals.is_empty() {
        // the hand is not ready yet; the Follower repairs that itself
        goals = stand_points(state, g, exclude, false);
    }
    let (_, pose) = shortest_motions(state, &goals)?;
    Some((pose, goals[&pose]))
}

fn instruction_for(setting: CommanderSetting, state: &WorldState, g: &SubGoal, fragment: &[SubGoal], at: usize) -> Instruction {
    let h = if setting.allows_pose() {
        hints(state, g, fragment, at)
    } else {
        None
    };
    Instruction {
        kind: if g.action.is_navigate() {
            InstructionKind::NavigateTo
        } else {
            InstructionKind::Interact
        },
        action: Some(g.action),
        target_class: g.target.clone(),
        pose_hint: h.map(|(p, _)| PoseHint::from_pose(p)),
        point_hint: h.filter(|_| setting.allows_point()).map(|(_, u)| u),
        text: phrase(g.action, &g.target),
    }
}

/// Stateless form: the first step of the first pending condition's
/// fragment that the state does not already show as done.
pub fn instruct(setting: CommanderSetting, pending: &[Condition], state: &WorldState, goal: &GoalSpec, params: &TaskParams) -> Instruction {
    let Some(first) = pending.first() else {
        return Instruction::done();
    };
    let tt = task_template(goal.task_type, params);
    let Some(i) = tt.goal.conditions.iter().position(|c| c == first) else {
        return Instruction::done();
    };
    let frag = &tt.fragments[i];
    let at = frag
        .iter()
        .position(|g| !already_done(state, g))
        .unwrap_or(0);
    instruction_for(setting, state, &frag[at], frag, at)
}

fn already_done(state: &WorldState, g: &SubGoal) -> bool {
    match g.action {
        SubGoalAction::Slice => state.instances_of(&g.target).any(|o| o.state.sliced),
        SubGoalAction::PickUp => state.held_class() == Some(g.target.as_str()),
        _ => false,
    }
}

/// Re-issues of one failed instruction before its condition is skipped.
pub const MAX_REISSUES: u32 = 3;

/// Stateful Commander: works through one condition's fragment at a time.
pub struct Commander {
    pub setting: CommanderSetting,
    goal: GoalSpec,
    fragments: Vec<Vec<SubGoal>>,
    active: Option<(usize, usize)>,
    failures: u32,
    rounds: Vec<u32>,
    skipped: BTreeSet<usize>,
}

impl Commander {
    pub fn new(goal: &GoalSpec, params: &TaskParams, setting: CommanderSetting) -> Self {
        let tt = task_template(goal.task_type, params);
        Commander {
            setting,
            goal: tt.goal.clone(),
            rounds: vec![0; tt.fragments.len()],
            fragments: tt.fragments,
            active: None,
            failures: 0,
            skipped: BTreeSet::new(),
        }
    }

    pub fn skipped(&self) -> &BTreeSet<usize> {
        &self.skipped
    }

    fn current(&self) -> Option<(usize, usize)> {
        self.active.filter(|(c, k)| *k < self.fragments[*c].len())
    }

    pub fn next_instruction(&mut self, state: &WorldState) -> Instruction {
        if self.current().is_none() {
            let next = self
                .goal
                .conditions
                .iter()
                .enumerate()
                .find(|(i, c)| !self.skipped.contains(i) && !state.condition_met(c))
                .map(|(i, _)| i);
            let Some(c) = next else {
                return Instruction::done();
            };
            // a fragment that ran to the end without meeting its condition
            // counts against it too
            self.rounds[c] += 1;
            if self.rounds[c] > MAX_REISSUES + 1 {
                self.skipped.insert(c);
                return self.next_instruction(state);
            }
            self.active = Some((c, 0));
            self.failures = 0;
        }
        let (c, mut k) = self.current().expect("active fragment");
        let frag = &self.fragments[c];
        while k + 1 < frag.len() && already_done(state, &frag[k]) {
            k += 1;
        }
        self.active = Some((c, k));
        instruction_for(self.setting, state, &frag[k], frag, k)
    }

    pub fn report(&mut self, success: bool) {
        let Some((c, k)) = self.current() else { return };
        if success {
            self.active = Some((c, k + 1));
            self.failures = 0;
        } else {
            self.failures += 1;
            if self.failures > MAX_REISSUES {
                log::debug!("skipping condition {c} after {} failures", self.failures);
                self.skipped.insert(c);
                self.active = None;
            }
        }
    }
}

/// Steps the Follower may spend on one instruction.
pub const INSTRUCTION_BUDGET: usize = 200;

/// Runs a two-agent session on `instance` under `setting`.
pub fn run_tatc(instance: &Instance, config: &RunConfig, setting: CommanderSetting) -> EpisodeTrace {
    let seed = episode_seed(config.seed, &instance.id);
    let noise = episode_noise(&config.mode, seed);
    let resumed = resume(instance, &noise).expect("instance was validated");
    let head = header(instance, config, seed, &[], &resumed.world);
    let mut commander = Commander::new(&instance.goal, &instance.params, setting);
    let mut executor = Executor::new(Vec::new(), resumed.map.clone(), config.executor, seed ^ 0x5EED_0001);
    resumed.prime(&mut executor);
    let mut agent = ExecutorAgent {
        executor,
        policy: make_policy(config.mode.exploration, seed ^ 0x5EED_0002),
    };
    let mut ep = Episode::new(resumed.world, noise, config.limits);
    let msg = |ep: &Episode, body| Message {
        step: ep.steps,
        setting,
        body,
    };
    ep.message(msg(&ep, MessageBody::Request));
    let hint = Instruction {
        kind: InstructionKind::TaskHint,
        action: None,
        target_class: String::new(),
        pose_hint: None,
        point_hint: None,
        text: utterance(instance.task, &instance.params),
    };
    ep.message(msg(&ep, MessageBody::Instruction(hint)));
    let end = loop {
        if let Some(t) = ep.capped() {
            break t;
        }
        let ins = commander.next_instruction(&ep.world);
        debug_assert!(ins.respects(setting));
        ep.message(msg(&ep, MessageBody::Instruction(ins.clone())));
        let Some(g) = ins.subgoal() else {
            break Termination::Stop;
        };
        let ex = &mut agent.executor;
        let plan = rectify_from(std::slice::from_ref(&g), &ep.world.registry, ex.holding());
        ex.load(
            plan,
            Some(Guidance {
                class: Some(g.target.clone()),
                pose: ins.pose_hint.and_then(PoseHint::to_pose),
                point: ins.point_hint,
            }),
        );
        let start = ep.steps;
        let mut frame = ep.frame();
        let mut success = false;
        while ep.capped().is_none() && ep.steps - start < INSTRUCTION_BUDGET {
            let a = crate::bench::runner::Agent::act(&mut agent, &frame, ep.world.agent);
            if a == crate::world::Action::Stop {
                success = true;
                break;
            }
            ep.step(a, agent.executor.state.pointer, Some(agent.executor.map.hash()));
            frame = ep.frame();
        }
        ep.message(msg(
            &ep,
            MessageBody::Report {
                success,
                steps: ep.steps - start,
            },
        ));
        commander.report(success);
    };
    ep.finish(head, &instance.goal, instance.ref_len(), end)
}

#[cfg(test)]
mod tests;
