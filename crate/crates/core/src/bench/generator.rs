//! Seeded generator of solvable kitchen sessions.
//!
//! Each scenario is a walled room. Fixtures stand on the ring of cells
//! along the wall (corners excluded, so every fixture keeps a free cell in
//! front of it) and small objects rest on counters. The reference actions
//! come from the ground-truth demonstrator running the repaired template
//! program, and the instance is kept only if that replay satisfies the goal.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expert::demonstrate;
use super::instance::{Instance, InstanceKind, INSTANCE_FORMAT};
use crate::goal::TaskType;
use crate::language::templates::{task_template, utterance, TaskParams};
use crate::language::{Dialogue, Player};
use crate::reasoner_task::rectify;
use crate::world::scenario::Scenario;
use crate::world::{Action, AgentPose, Cell, ClassRegistry, Heading, ObjectId, ObjectState, WorldState};

pub const MAX_ATTEMPTS: usize = 100;
/// Longest reference accepted, counted over the whole session.
pub const MAX_REFERENCE_LEN: usize = 240;

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("instance {index} ({task}): no solvable scenario after {attempts} attempts")]
pub struct GenerationError {
    pub index: usize,
    pub task: TaskType,
    pub attempts: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindMix {
    Tfd,
    Edh,
    /// Alternates TfD and EDH by index.
    #[default]
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    pub seed: u64,
    pub count: usize,
    /// Task types cycled through in order; empty means all twelve.
    pub tasks: Vec<TaskType>,
    pub kinds: KindMix,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec {
            seed: 0,
            count: 12,
            tasks: Vec::new(),
            kinds: KindMix::Mixed,
        }
    }
}

/// `count` instances cycling through `task_mix` (all types when empty).
pub fn generate_suite(seed: u64, count: usize, task_mix: &[TaskType]) -> Result<Vec<Instance>, GenerationError> {
    generate_with(&SuiteSpec {
        seed,
        count,
        tasks: task_mix.to_vec(),
        kinds: KindMix::Mixed,
    })
}

pub fn generate_with(spec: &SuiteSpec) -> Result<Vec<Instance>, GenerationError> {
    let tasks: Vec<TaskType> = if spec.tasks.is_empty() {
        TaskType::ALL.to_vec()
    } else {
        spec.tasks.clone()
    };
    (0..spec.count)
        .map(|i| {
            let kind = match spec.kinds {
                KindMix::Tfd => InstanceKind::Tfd,
                KindMix::Edh => InstanceKind::Edh,
                KindMix::Mixed if i % 2 == 0 => InstanceKind::Tfd,
                KindMix::Mixed => InstanceKind::Edh,
            };
            generate_instance(spec.seed, i, tasks[i % tasks.len()], kind)
        })
        .collect()
}

/// Stream seed for instance `index` of a suite.
fn instance_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

pub fn generate_instance(
    seed: u64,
    index: usize,
    task: TaskType,
    kind: InstanceKind,
) -> Result<Instance, GenerationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(seed, index));
    for _ in 0..MAX_ATTEMPTS {
        if let Some(inst) = attempt(&mut rng, seed, index, task, kind) {
            return Ok(inst);
        }
    }
    Err(GenerationError {
        index,
        task,
        attempts: MAX_ATTEMPTS,
    })
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

fn params_for(task: TaskType, rng: &mut ChaCha8Rng) -> TaskParams {
    match task {
        TaskType::CleanX => TaskParams::new(pick(rng, &["Plate", "Mug", "Bowl", "Cup", "Pan"]), "", 1),
        TaskType::AllXOnY => {
            let y = pick(rng, &["DiningTable", "DiningTable", "Plate"]);
            let xs: &[&str] = if y == "Plate" {
                &["Fork", "Spoon", "Apple", "Egg"]
            } else {
                &["Fork", "Spoon", "Apple", "Cup", "Potato"]
            };
            TaskParams::new(pick(rng, xs), y, rng.random_range(2..=3))
        }
        TaskType::BoilX => TaskParams::new(pick(rng, &["Potato", "Egg"]), "", 1),
        TaskType::NSlicesOfX => TaskParams::new(
            pick(rng, &["Tomato", "Apple", "Lettuce", "Potato", "Bread"]),
            "",
            rng.random_range(2..=3),
        ),
        TaskType::PutXOnY => {
            let y = pick(rng, &["Plate", "Bowl", "DiningTable", "Pan"]);
            let xs: Vec<&str> = ["Apple", "Mug", "Cup", "Tomato", "Egg", "Spoon", "Fork"]
                .into_iter()
                .filter(|x| *x != y)
                .collect();
            TaskParams::new(pick(rng, &xs), y, 1)
        }
        TaskType::CookX => TaskParams::new(pick(rng, &["Potato", "Egg", "Apple"]), "", 1),
        other => TaskParams::default_for(other),
    }
}

/// Fixed furniture and hand-sized objects a task needs.
struct Needs {
    fixtures: Vec<&'static str>,
    items: Vec<(String, ObjectState)>,
}

fn needs(task: TaskType, p: &TaskParams) -> Needs {
    let s = ObjectState::default();
    let dirty = ObjectState { dirty: true, ..s };
    let item = |c: &str| (c.to_string(), s);
    let (fixtures, items): (Vec<&'static str>, Vec<(String, ObjectState)>) = match task {
        TaskType::WaterPlant => (vec!["Faucet", "Sink", "Plant"], vec![item("Mug")]),
        TaskType::MakeCoffee => (vec!["CoffeeMachine"], vec![item("Mug")]),
        TaskType::CleanX => (vec!["Faucet", "Sink"], vec![(p.x.clone(), dirty)]),
        TaskType::AllXOnY | TaskType::PutXOnY => {
            let n = if task == TaskType::AllXOnY { p.n.max(1) } else { 1 };
            let mut items: Vec<_> = (0..n).map(|_| item(&p.x)).collect();
            let mut fixtures = Vec::new();
            if p.y == "DiningTable" {
                fixtures.push("DiningTable");
            } else {
                items.push(item(&p.y));
            }
            (fixtures, items)
        }
        TaskType::BoilX => (vec!["Faucet", "Sink", "StoveBurner"], vec![item("Pot"), item(&p.x)]),
        TaskType::MakeToast => (
            vec!["Faucet", "Sink", "Toaster"],
            vec![("Plate".into(), dirty), item("Bread"), item("Knife")],
        ),
        TaskType::NSlicesOfX => (vec![], vec![item(&p.x), item("Plate"), item("Knife")]),
        TaskType::CookX => (vec!["Microwave"], vec![item(&p.x)]),
        TaskType::MakeSandwich => (
            vec!["Toaster"],
            vec![item("Bread"), item("Lettuce"), item("Knife"), item("Plate")],
        ),
        TaskType::MakeSalad => (vec![], vec![item("Lettuce"), item("Tomato"), item("Knife"), item("Plate")]),
        TaskType::MakeBreakfast => (
            vec!["CoffeeMachine", "Toaster"],
            vec![item("Mug"), item("Bread"), item("Knife")],
        ),
    };
    Needs { fixtures, items }
}

const EXTRA_FIXTURES: [&str; 7] = ["Fridge", "Cabinet", "DiningTable", "Microwave", "StoveBurner", "Sink", "Plant"];
const EXTRA_ITEMS: [&str; 10] = [
    "Apple", "Spoon", "Fork", "Cup", "Bowl", "Egg", "Potato", "Tomato", "Pan", "Lettuce",
];

/// Cells along the inside of the wall, corners excluded.
fn ring(w_in: i32, h_in: i32) -> Vec<Cell> {
    let mut out = Vec::new();
    for x in 2..w_in {
        out.push(Cell::new(x, 1));
        out.push(Cell::new(x, h_in));
    }
    for y in 2..h_in {
        out.push(Cell::new(1, y));
        out.push(Cell::new(w_in, y));
    }
    out
}

fn build_world(rng: &mut ChaCha8Rng, task: TaskType, p: &TaskParams) -> Option<WorldState> {
    let (w_in, h_in) = (rng.random_range(7..=12), rng.random_range(7..=12));
    let agent = AgentPose::new(
        Cell::new(rng.random_range(2..w_in), rng.random_range(2..h_in)),
        Heading::ALL[rng.random_range(0..4)],
    );
    let mut w = WorldState::walled(w_in + 2, h_in + 2, ClassRegistry::kitchen(), agent);
    w.rng_seed = rng.random();
    let mut slots = ring(w_in, h_in);
    slots.shuffle(rng);
    let mut slots = slots.into_iter();

    let need = needs(task, p);
    let program = task_template(task, p).interactions();
    let used: Vec<&str> = program
        .iter()
        .map(|g| g.target.as_str())
        .chain([p.x.as_str(), p.y.as_str(), "Knife"])
        .collect();

    let s = ObjectState::default();
    let mut fixtures: Vec<&str> = need.fixtures.clone();
    let mut extras: Vec<&str> = EXTRA_FIXTURES
        .into_iter()
        .filter(|f| !fixtures.contains(f) && !used.contains(f))
        .collect();
    extras.shuffle(rng);
    fixtures.extend(extras.into_iter().take(rng.random_range(1..=3)));
    let mut tables = Vec::new();
    for f in fixtures {
        let id = w.add_object(f, slots.next()?, None, s);
        if f == "DiningTable" && !used.contains(&"DiningTable") {
            tables.push(id);
        }
        if f == "Fridge" && !used.contains(&"Egg") && rng.random_bool(0.5) {
            w.add_object("Egg", Cell::new(0, 0), Some(id), s);
        }
    }

    let mut items = need.items;
    let mut pool: Vec<&str> = EXTRA_ITEMS.into_iter().filter(|c| !used.contains(c)).collect();
    pool.shuffle(rng);
    items.extend(pool.into_iter().take(rng.random_range(0..=2)).map(|c| (c.to_string(), s)));
    items.shuffle(rng);

    // two objects per counter, a spare counter for putting things down
    let counters = items.len().div_ceil(2) + 1 + rng.random_range(0..=1);
    let mut holders: Vec<ObjectId> = Vec::new();
    for _ in 0..counters {
        holders.push(w.add_object("CounterTop", slots.next()?, None, s));
    }
    holders.extend(tables);
    let mut load = vec![0usize; holders.len()];
    for (class, state) in items {
        let free: Vec<usize> = (0..holders.len()).filter(|i| load[*i] < 2).collect();
        let h = free[rng.random_range(0..free.len())];
        load[h] += 1;
        w.add_object(&class, Cell::new(0, 0), Some(holders[h]), state);
    }
    w.validate().ok()?;
    Some(w)
}

fn dialogue_for(task: TaskType, p: &TaskParams, rng: &mut ChaCha8Rng) -> Dialogue {
    let mut d = Dialogue::default();
    d.push(
        Player::Follower,
        ["hi, what should I do today?", "hello, what is my task?", "what can I help with?"][rng.random_range(0..3)],
    );
    d.push(Player::Commander, utterance(task, p));
    d.push(Player::Follower, "ok");
    d
}

fn attempt(rng: &mut ChaCha8Rng, seed: u64, index: usize, task: TaskType, kind: InstanceKind) -> Option<Instance> {
    let p = params_for(task, rng);
    let tt = task_template(task, &p);
    let world = build_world(rng, task, &p)?;
    // every condition must start out unmet
    if tt.goal.conditions.iter().any(|c| world.condition_met(c)) {
        return None;
    }
    let program = rectify(&tt.program(), &world.registry);
    let (actions, end) = demonstrate(&world, &program).ok()?;
    if end.goal_conditions_met(&tt.goal) < 1.0 || actions.len() > MAX_REFERENCE_LEN {
        return None;
    }
    let split = match kind {
        InstanceKind::Tfd => 0,
        InstanceKind::Edh => {
            let last = actions.iter().rposition(|a| a.action.is_interaction())?;
            let cuts: Vec<usize> = (0..last)
                .filter(|i| actions[*i].action.is_interaction())
                .map(|i| i + 1)
                .collect();
            *cuts.get(rng.random_range(0..cuts.len().max(1)))?
        }
    };
    let (history, reference) = actions.split_at(split);
    let inst = Instance {
        format: INSTANCE_FORMAT.to_string(),
        id: format!("s{seed}-{index:04}-{}-{}", task.name(), kind_tag(kind)),
        kind,
        task,
        params: p.clone(),
        scenario: Scenario::from_state(&world),
        dialogue: dialogue_for(task, &p, rng),
        history: history.to_vec(),
        reference: reference.to_vec(),
        goal: tt.goal,
    };
    debug_assert!(inst.history.iter().chain(&inst.reference).all(|a| a.action != Action::Stop));
    inst.validate().ok()?;
    Some(inst)
}

fn kind_tag(kind: InstanceKind) -> &'static str {
    match kind {
        InstanceKind::Edh => "edh",
        InstanceKind::Tfd => "tfd",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_task_type_generates() {
        for (i, t) in TaskType::ALL.into_iter().enumerate() {
            for kind in [InstanceKind::Tfd, InstanceKind::Edh] {
                let inst = generate_instance(3, i, t, kind).unwrap_or_else(|e| panic!("{e}"));
                assert!(inst.validate().is_ok(), "{}", inst.id);
                assert_eq!(inst.kind, kind);
            }
        }
    }

    #[test]
    fn ring_has_no_corners() {
        let r = ring(7, 9);
        assert_eq!(r.len(), 2 * 5 + 2 * 7);
        assert!(!r.contains(&Cell::new(1, 1)) && !r.contains(&Cell::new(7, 9)));
    }
}
