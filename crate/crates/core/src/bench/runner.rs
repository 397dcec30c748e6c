//! The episode loop: replay the history into a map, plan, repair the plan,
//! then alternate agent decisions and world steps until the agent stops or
//! a cap is hit.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::instance::Instance;
use super::metrics::{EpisodeMetrics, Termination};
use super::trace::{EpisodeTrace, StepRecord, TraceEvent, TraceHeader, TRACE_FORMAT};
use crate::commander::{run_tatc, CommanderSetting, Message};
use crate::language::{Planner, PlannerBackend, SubGoal, SubGoalAction};
use crate::perception::{render, EgoFrame, NoiseModel, SemanticMap};
use crate::reasoner_action::{Executor, ExecutorConfig, ExplorationPolicy, FrontierPolicy, Placement, RandomPolicy};
use crate::reasoner_task::rectify_from;
use crate::world::scenario::Scenario;
use crate::world::{ray_index_for_u, teleport_execute, Action, AgentPose, InteractKind, ObjectId, WorldState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exploration {
    #[default]
    Frontier,
    Random,
}

/// Which pipeline stages are replaced by ground truth.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunMode {
    /// Use the reference future's sub-goals instead of the planner.
    pub oracle_subgoals: bool,
    /// Render frames without noise.
    pub oracle_perception: bool,
    /// Execute each sub-goal by teleporting next to its target.
    pub teleport_executor: bool,
    pub exploration: Exploration,
    pub noise: NoiseModel,
    /// Run the two-agent protocol with this Commander setting.
    pub commander_setting: Option<CommanderSetting>,
}

impl RunMode {
    pub fn oracle() -> Self {
        RunMode {
            oracle_subgoals: true,
            oracle_perception: true,
            ..RunMode::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_failures: u32,
    pub max_steps: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_failures: 30,
            max_steps: 1000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: RunMode,
    pub limits: Limits,
    pub executor: ExecutorConfig,
    pub seed: u64,
}

/// Anything that picks actions from egocentric frames.
pub trait Agent {
    fn act(&mut self, frame: &EgoFrame, pose: AgentPose) -> Action;
    /// Plan pointer, for the trace.
    fn pointer(&self) -> usize {
        0
    }
    fn map_hash(&self) -> Option<String> {
        None
    }
}

/// The standard agent: the action-level executor plus an exploration policy.
pub struct ExecutorAgent {
    pub executor: Executor,
    pub policy: Box<dyn ExplorationPolicy>,
}

impl Agent for ExecutorAgent {
    fn act(&mut self, frame: &EgoFrame, pose: AgentPose) -> Action {
        self.executor.decide(frame, pose, self.policy.as_mut())
    }

    fn pointer(&self) -> usize {
        self.executor.state.pointer
    }

    fn map_hash(&self) -> Option<String> {
        Some(self.executor.map.hash())
    }
}

pub fn make_policy(kind: Exploration, seed: u64) -> Box<dyn ExplorationPolicy> {
    match kind {
        Exploration::Frontier => Box::new(FrontierPolicy::new(seed)),
        Exploration::Random => Box::new(RandomPolicy::new(seed)),
    }
}

/// Per-episode seed from the run seed and the instance id.
pub fn episode_seed(seed: u64, instance_id: &str) -> u64 {
    let d = Sha256::digest(instance_id.as_bytes());
    seed ^ u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub fn episode_noise(mode: &RunMode, ep_seed: u64) -> NoiseModel {
    if mode.oracle_perception {
        NoiseModel::zero()
    } else {
        NoiseModel {
            seed: mode.noise.seed ^ ep_seed,
            ..mode.noise
        }
    }
}

/// What the agent knows once the history has been replayed.
pub struct Resumed {
    pub world: WorldState,
    pub map: SemanticMap,
    pub history: Vec<SubGoal>,
    pub held: Option<String>,
    pub held_instance: Option<ObjectId>,
    /// Every Place in the history.
    pub placed: Vec<Placement>,
}

impl Resumed {
    /// Hands what the history taught, besides the map, to an executor.
    pub fn prime(&self, executor: &mut Executor) {
        executor.set_holding(self.held.clone(), self.held_instance);
        for pl in &self.placed {
            executor.remember_place(pl.clone());
        }
    }
}

/// Replays the history, projecting every frame into a fresh map.
pub fn resume(instance: &Instance, noise: &NoiseModel) -> Result<Resumed, super::InstanceError> {
    let mut world = instance.initial_state()?;
    let mut map = SemanticMap::new(world.agent.cell);
    let mut frame = render(&world, noise);
    map.project_frame(&frame, world.agent);
    let mut held: Option<(String, Option<ObjectId>)> = None;
    let mut placed = Vec::new();
    for r in &instance.history {
        let pose = world.agent;
        let out = world.apply(r.action);
        if let (Action::Interact { kind, target_u }, true, Some(t)) = (r.action, out.success, &r.target) {
            match kind {
                InteractKind::Pickup => held = Some((t.clone(), frame.rays[ray_index_for_u(target_u)].instance)),
                InteractKind::Place => {
                    let i = ray_index_for_u(target_u);
                    let ray = &frame.rays[i];
                    let cell = map.patch_cell(map.ray_patch(pose, i, frame.width(), ray.depth_steps as f64));
                    if let Some((object, instance)) = held.take() {
                        placed.push(Placement {
                            object,
                            instance,
                            receptacle: t.clone(),
                            cell,
                        });
                    }
                }
                _ => {}
            }
        }
        frame = render(&world, noise);
        map.project_frame(&frame, world.agent);
    }
    Ok(Resumed {
        world,
        map,
        history: instance.history_subgoals(),
        held: instance.held_after_history(),
        held_instance: held.and_then(|(_, i)| i),
        placed,
    })
}

/// The repaired future plan, from the oracle or the planner.
pub fn plan_for(
    instance: &Instance,
    mode: &RunMode,
    planner: &PlannerBackend,
    resumed: &Resumed,
) -> Result<Vec<SubGoal>, String> {
    let raw = if mode.oracle_subgoals {
        instance.oracle_subgoals()
    } else {
        planner
            .plan(&instance.dialogue, &resumed.history)
            .map_err(|e| e.to_string())?
    };
    Ok(rectify_from(&raw, &resumed.world.registry, resumed.held.as_deref()))
}

/// Live episode state shared by the executor loop and the two-agent loop.
pub struct Episode {
    pub world: WorldState,
    pub noise: NoiseModel,
    pub limits: Limits,
    pub events: Vec<TraceEvent>,
    pub steps: usize,
    pub failures: u32,
}

impl Episode {
    pub fn new(world: WorldState, noise: NoiseModel, limits: Limits) -> Self {
        Episode {
            world,
            noise,
            limits,
            events: Vec::new(),
            steps: 0,
            failures: 0,
        }
    }

    pub fn frame(&self) -> EgoFrame {
        render(&self.world, &self.noise)
    }

    /// The cap that has been reached, if any.
    pub fn capped(&self) -> Option<Termination> {
        if self.failures >= self.limits.max_failures {
            Some(Termination::FailureLimit)
        } else if self.steps >= self.limits.max_steps {
            Some(Termination::StepLimit)
        } else {
            None
        }
    }

    /// Applies one action and records it. Stop is not a step.
    pub fn step(&mut self, action: Action, pointer: usize, map_hash: Option<String>) -> bool {
        debug_assert!(action != Action::Stop);
        let out = self.world.apply(action);
        self.steps += 1;
        if action.is_interaction() && !out.success {
            self.failures += 1;
        }
        self.events.push(TraceEvent::Step(StepRecord {
            t: self.steps - 1,
            action: Some(action),
            teleport: None,
            success: out.success,
            error: out.error.map(|e| e.to_string()),
            pointer,
            world_hash: self.world.state_hash(),
            map_hash,
        }));
        out.success
    }

    fn teleport(&mut self, g: &SubGoal, pointer: usize) -> bool {
        let (next, ok, err) = teleport_execute(&self.world, g);
        self.world = next;
        self.steps += 1;
        if g.action != SubGoalAction::Navigate && !ok {
            self.failures += 1;
        }
        self.events.push(TraceEvent::Step(StepRecord {
            t: self.steps - 1,
            action: None,
            teleport: Some(g.clone()),
            success: ok,
            error: err.map(|e| e.to_string()),
            pointer,
            world_hash: self.world.state_hash(),
            map_hash: None,
        }));
        ok
    }

    pub fn message(&mut self, m: Message) {
        self.events.push(TraceEvent::Message(m));
    }

    /// Drives `agent` until it stops or a cap is reached.
    pub fn drive(&mut self, agent: &mut dyn Agent) -> Termination {
        let mut frame = self.frame();
        loop {
            if let Some(t) = self.capped() {
                return t;
            }
            let action = agent.act(&frame, self.world.agent);
            if action == Action::Stop {
                return Termination::Stop;
            }
            self.step(action, agent.pointer(), agent.map_hash());
            frame = self.frame();
        }
    }

    pub fn finish(self, header: TraceHeader, goal: &crate::goal::GoalSpec, ref_len: usize, end: Termination) -> EpisodeTrace {
        let mut metrics = EpisodeMetrics::score(&self.world, goal, ref_len, self.steps);
        metrics.failures = self.failures;
        metrics.termination = end;
        EpisodeTrace {
            header,
            events: self.events,
            metrics,
        }
    }
}

pub fn header(instance: &Instance, config: &RunConfig, seed: u64, plan: &[SubGoal], start: &WorldState) -> TraceHeader {
    TraceHeader {
        format: TRACE_FORMAT.to_string(),
        instance_id: instance.id.clone(),
        task: instance.task,
        kind: instance.kind,
        seed,
        config: config.clone(),
        scenario: instance.scenario.clone(),
        history: instance.history.clone(),
        plan: plan.to_vec(),
        planner_error: None,
        start_hash: start.state_hash(),
    }
}

/// Runs one episode of `instance` under `config`.
pub fn run_episode(instance: &Instance, config: &RunConfig, planner: &PlannerBackend) -> EpisodeTrace {
    if let Some(setting) = config.mode.commander_setting {
        return run_tatc(instance, config, setting);
    }
    let seed = episode_seed(config.seed, &instance.id);
    let noise = episode_noise(&config.mode, seed);
    let resumed = match resume(instance, &noise) {
        Ok(r) => r,
        Err(e) => return failed_start(instance, config, seed, e.to_string()),
    };
    let plan = match plan_for(instance, &config.mode, planner, &resumed) {
        Ok(p) => p,
        Err(e) => return failed_start(instance, config, seed, e),
    };
    let head = header(instance, config, seed, &plan, &resumed.world);
    let mut ep = Episode::new(resumed.world.clone(), noise, config.limits);
    if config.mode.teleport_executor {
        let end = run_teleport(&mut ep, &plan);
        return ep.finish(head, &instance.goal, instance.ref_len(), end);
    }
    let mut executor = Executor::new(plan, resumed.map.clone(), config.executor, seed ^ 0x5EED_0001);
    resumed.prime(&mut executor);
    let mut agent = ExecutorAgent {
        executor,
        policy: make_policy(config.mode.exploration, seed ^ 0x5EED_0002),
    };
    let end = ep.drive(&mut agent);
    ep.finish(head, &instance.goal, instance.ref_len(), end)
}

/// Runs `agent` from the post-history state of `instance`, for crafted
/// agents and tests.
pub fn run_with_agent(instance: &Instance, config: &RunConfig, agent: &mut dyn Agent) -> EpisodeTrace {
    let seed = episode_seed(config.seed, &instance.id);
    let noise = episode_noise(&config.mode, seed);
    let world = instance.state_after_history().expect("instance was validated");
    let head = header(instance, config, seed, &[], &world);
    let mut ep = Episode::new(world, noise, config.limits);
    let end = ep.drive(agent);
    ep.finish(head, &instance.goal, instance.ref_len(), end)
}

fn run_teleport(ep: &mut Episode, plan: &[SubGoal]) -> Termination {
    for (i, g) in plan.iter().enumerate() {
        if let Some(t) = ep.capped() {
            return t;
        }
        ep.teleport(g, i);
    }
    Termination::Stop
}

/// A trace for an episode that could not start: the start state is scored.
fn failed_start(instance: &Instance, config: &RunConfig, seed: u64, reason: String) -> EpisodeTrace {
    log::warn!("{}: {reason}", instance.id);
    let world = instance
        .state_after_history()
        .or_else(|_| instance.initial_state())
        .unwrap_or_else(|_| {
            Scenario::into_state(instance.scenario.clone()).expect("scenario of a loaded instance is valid")
        });
    let mut head = header(instance, config, seed, &[], &world);
    head.planner_error = Some(reason);
    Episode::new(world, NoiseModel::zero(), config.limits).finish(
        head,
        &instance.goal,
        instance.ref_len(),
        Termination::PlannerError,
    )
}

/// Runs every instance, `parallel` at a time. Results keep input order.
pub fn run_suite(instances: &[Instance], config: &RunConfig, planner: &PlannerBackend, parallel: usize) -> Vec<EpisodeTrace> {
    use rayon::prelude::*;
    if parallel <= 1 {
        return instances.iter().map(|i| run_episode(i, config, planner)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .expect("thread pool");
    pool.install(|| instances.par_iter().map(|i| run_episode(i, config, planner)).collect())
}
