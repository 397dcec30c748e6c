//! Deterministic 2-D grid household simulator.
//!
//! The world is a grid of 0.25 m cells. Every non-held object sits in a cell;
//! a cell holds at most one *root* object (one without a parent), and any
//! number of objects nested inside it through receptacle links. Walls and
//! out-of-bounds cells are static obstacles. The agent occupies one cell and
//! faces one of four headings.

mod classes;
mod raycast;
pub mod scenario;
mod step;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use classes::{Affordances, ClassRegistry, ObjectClass, ToggleEffect};
pub use raycast::{
    ray_angle_deg, ray_index_for_u, u_for_ray_index, RayHit, DEPTH_STEP_M, FOV_DEG, MAX_DEPTH_STEPS,
    RAY_COUNT,
};
pub use step::{teleport_execute, StepOutcome};

use crate::goal::{Condition, ConditionKind, GoalSpec};

/// Edge length of one world cell in meters.
pub const CELL_SIZE_M: f64 = 0.25;
/// Maximum ray depth at which an interaction still reaches its target.
pub const INTERACT_REACH_M: f64 = 1.0;
pub const DEFAULT_CAPACITY: usize = 4;
pub const DEFAULT_SLICE_COUNT: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, (dx, dy): (i32, i32)) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }

    /// Center of the cell in world meters.
    pub fn center_m(self) -> (f64, f64) {
        (
            (self.x as f64 + 0.5) * CELL_SIZE_M,
            (self.y as f64 + 0.5) * CELL_SIZE_M,
        )
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn dist2(self, other: Cell) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        dx * dx + dy * dy
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Agent heading. Screen convention: +x is East, +y is South, angles grow
/// clockwise from East.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::East, Heading::South, Heading::West, Heading::North];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
            Heading::North => (0, -1),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            Heading::East => 0,
            Heading::South => 90,
            Heading::West => 180,
            Heading::North => 270,
        }
    }

    pub fn from_degrees(deg: i64) -> Option<Heading> {
        match deg.rem_euclid(360) {
            0 => Some(Heading::East),
            90 => Some(Heading::South),
            180 => Some(Heading::West),
            270 => Some(Heading::North),
            _ => None,
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::East => Heading::North,
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
        }
    }

    pub fn right(self) -> Heading {
        self.left().reverse()
    }

    pub fn reverse(self) -> Heading {
        self.left().left()
    }

    /// Heading that points from `from` toward the 4-neighbor `to`.
    pub fn toward(from: Cell, to: Cell) -> Option<Heading> {
        Heading::ALL
            .into_iter()
            .find(|h| from.offset(h.delta()) == to)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentPose {
    pub cell: Cell,
    pub heading: Heading,
}

impl AgentPose {
    pub fn new(cell: Cell, heading: Heading) -> Self {
        AgentPose { cell, heading }
    }

    /// Pose after applying a motion, ignoring collisions.
    pub fn after(self, motion: Motion) -> AgentPose {
        let h = self.heading;
        match motion {
            Motion::Forward => AgentPose::new(self.cell.offset(h.delta()), h),
            Motion::Backward => AgentPose::new(self.cell.offset(h.reverse().delta()), h),
            Motion::PanLeft => AgentPose::new(self.cell.offset(h.left().delta()), h),
            Motion::PanRight => AgentPose::new(self.cell.offset(h.right().delta()), h),
            Motion::TurnLeft => AgentPose::new(self.cell, h.left()),
            Motion::TurnRight => AgentPose::new(self.cell, h.right()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Per-instance state flags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectState {
    pub sliced: bool,
    pub cooked: bool,
    pub toasted: bool,
    pub dirty: bool,
    pub filled: bool,
    pub open: bool,
    pub on: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateFlag {
    Sliced,
    Cooked,
    Toasted,
    Dirty,
    Filled,
    Open,
    On,
}

impl StateFlag {
    pub const ALL: [StateFlag; 7] = [
        StateFlag::Sliced,
        StateFlag::Cooked,
        StateFlag::Toasted,
        StateFlag::Dirty,
        StateFlag::Filled,
        StateFlag::Open,
        StateFlag::On,
    ];

    /// Word used in templated descriptions, for the flag set to `value`.
    pub fn describe(self, value: bool) -> &'static str {
        match (self, value) {
            (StateFlag::Sliced, true) => "sliced",
            (StateFlag::Sliced, false) => "whole",
            (StateFlag::Cooked, true) => "cooked",
            (StateFlag::Cooked, false) => "raw",
            (StateFlag::Toasted, true) => "toasted",
            (StateFlag::Toasted, false) => "untoasted",
            (StateFlag::Dirty, true) => "dirty",
            (StateFlag::Dirty, false) => "clean",
            (StateFlag::Filled, true) => "filled",
            (StateFlag::Filled, false) => "empty",
            (StateFlag::Open, true) => "open",
            (StateFlag::Open, false) => "closed",
            (StateFlag::On, true) => "on",
            (StateFlag::On, false) => "off",
        }
    }
}

impl ObjectState {
    pub fn get(&self, flag: StateFlag) -> bool {
        match flag {
            StateFlag::Sliced => self.sliced,
            StateFlag::Cooked => self.cooked,
            StateFlag::Toasted => self.toasted,
            StateFlag::Dirty => self.dirty,
            StateFlag::Filled => self.filled,
            StateFlag::Open => self.open,
            StateFlag::On => self.on,
        }
    }

    /// Visible appearance bits. A change here counts as a pixel change.
    pub fn appearance(&self) -> u8 {
        StateFlag::ALL
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, f)| acc | ((self.get(*f) as u8) << i))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub class: String,
    pub cell: Cell,
    #[serde(default)]
    pub parent: Option<ObjectId>,
    #[serde(default)]
    pub state: ObjectState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Motion {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    PanLeft,
    PanRight,
}

impl Motion {
    pub const ALL: [Motion; 6] = [
        Motion::Forward,
        Motion::Backward,
        Motion::TurnLeft,
        Motion::TurnRight,
        Motion::PanLeft,
        Motion::PanRight,
    ];

    pub fn is_translation(self) -> bool {
        !matches!(self, Motion::TurnLeft | Motion::TurnRight)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InteractKind {
    Pickup,
    Place,
    Open,
    Close,
    ToggleOn,
    ToggleOff,
    Slice,
    Pour,
}

impl InteractKind {
    pub const ALL: [InteractKind; 8] = [
        InteractKind::Pickup,
        InteractKind::Place,
        InteractKind::Open,
        InteractKind::Close,
        InteractKind::ToggleOn,
        InteractKind::ToggleOff,
        InteractKind::Slice,
        InteractKind::Pour,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Motion(Motion),
    Interact { kind: InteractKind, target_u: f64 },
    Stop,
}

impl Action {
    pub fn is_interaction(&self) -> bool {
        matches!(self, Action::Interact { .. })
    }

    pub fn motion(&self) -> Option<Motion> {
        match self {
            Action::Motion(m) => Some(*m),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Motion(m) => write!(f, "{m:?}"),
            Action::Interact { kind, target_u } => write!(f, "{kind:?}@{target_u:.3}"),
            Action::Stop => write!(f, "Stop"),
        }
    }
}

/// Inverse of the `Display` form: `Forward`, `Pickup@0.5`, `Stop`.
impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "Stop" {
            return Ok(Action::Stop);
        }
        if let Some(m) = Motion::ALL.into_iter().find(|m| format!("{m:?}") == s) {
            return Ok(Action::Motion(m));
        }
        let (k, u) = s.split_once('@').ok_or_else(|| format!("unknown action `{s}`"))?;
        let kind = InteractKind::ALL
            .into_iter()
            .find(|x| format!("{x:?}") == k)
            .ok_or_else(|| format!("unknown interaction `{k}`"))?;
        let target_u: f64 = u.parse().map_err(|_| format!("bad screen coordinate `{u}`"))?;
        if !(0.0..=1.0).contains(&target_u) {
            return Err(format!("screen coordinate {target_u} outside [0, 1]"));
        }
        Ok(Action::Interact { kind, target_u })
    }
}

/// Failure vocabulary of the simulator. Every failed step carries exactly one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, thiserror::Error)]
pub enum ActionError {
    #[error("hand occupied when picking up")]
    HandOccupied,
    #[error("knife not in hand when cutting")]
    KnifeNotInHand,
    #[error("target is not openable")]
    NotOpenable,
    #[error("blocked when moving")]
    Blocked,
    #[error("collided when rotating")]
    CollideRotating,
    #[error("invalid placement")]
    InvalidPlacement,
    #[error("target too far")]
    TooFar,
    #[error("pouring unavailable")]
    PourUnavailable,
    #[error("object not found at target point")]
    ObjectNotFound,
    #[error("nothing held")]
    NothingHeld,
    #[error("receptacle full")]
    ReceptacleFull,
    #[error("target is not toggleable")]
    NotToggleable,
    #[error("target is not sliceable")]
    NotSliceable,
}

/// Tunable interaction rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldRules {
    pub receptacle_capacity: usize,
    pub slice_count: usize,
}

impl Default for WorldRules {
    fn default() -> Self {
        WorldRules {
            receptacle_capacity: DEFAULT_CAPACITY,
            slice_count: DEFAULT_SLICE_COUNT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub width: i32,
    pub height: i32,
    pub static_obstacles: BTreeSet<Cell>,
    pub registry: Arc<ClassRegistry>,
    pub objects: BTreeMap<ObjectId, ObjectInstance>,
    pub agent: AgentPose,
    pub held: Option<ObjectId>,
    pub rng_seed: u64,
    #[serde(default)]
    pub step: u64,
    #[serde(default)]
    pub rules: WorldRules,
    #[serde(default)]
    pub next_id: u32,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WorldError {
    #[error("agent pose {0} is out of bounds or inside an obstacle")]
    BadAgentPose(Cell),
    #[error("object {0} has unknown class `{1}`")]
    UnknownClass(ObjectId, String),
    #[error("object {0} references missing parent {1}")]
    MissingParent(ObjectId, ObjectId),
    #[error("object {0} is nested in a cycle")]
    ParentCycle(ObjectId),
    #[error("object {0} sits inside non-receptacle {1}")]
    ParentNotReceptacle(ObjectId, ObjectId),
    #[error("cell {0} holds more than one root object")]
    SharedCell(Cell),
    #[error("object {0} is out of bounds or inside a wall")]
    ObjectOutOfBounds(ObjectId),
    #[error("held object {0} does not exist")]
    MissingHeld(ObjectId),
    #[error("held object {0} still has a parent")]
    HeldHasParent(ObjectId),
    #[error("object {0} has state flags its class cannot afford")]
    UnaffordedState(ObjectId),
    #[error("registry: {0}")]
    Registry(String),
}

impl WorldState {
    /// Empty world with a wall ring around a `width × height` grid.
    pub fn walled(width: i32, height: i32, registry: ClassRegistry, agent: AgentPose) -> Self {
        let mut static_obstacles = BTreeSet::new();
        for x in 0..width {
            static_obstacles.insert(Cell::new(x, 0));
            static_obstacles.insert(Cell::new(x, height - 1));
        }
        for y in 0..height {
            static_obstacles.insert(Cell::new(0, y));
            static_obstacles.insert(Cell::new(width - 1, y));
        }
        WorldState {
            width,
            height,
            static_obstacles,
            registry: Arc::new(registry),
            objects: BTreeMap::new(),
            agent,
            held: None,
            rng_seed: 0,
            step: 0,
            rules: WorldRules::default(),
            next_id: 0,
        }
    }

    /// Adds an object and returns its id. Contained objects inherit the
    /// parent's cell.
    pub fn add_object(&mut self, class: &str, cell: Cell, parent: Option<ObjectId>, state: ObjectState) -> ObjectId {
        let id = self.alloc_id();
        let cell = parent
            .and_then(|p| self.objects.get(&p))
            .map(|p| p.cell)
            .unwrap_or(cell);
        self.objects.insert(
            id,
            ObjectInstance {
                id,
                class: class.to_string(),
                cell,
                parent,
                state,
            },
        );
        id
    }

    pub(crate) fn alloc_id(&mut self) -> ObjectId {
        let floor = self.objects.keys().next_back().map(|k| k.0 + 1).unwrap_or(0);
        let id = self.next_id.max(floor);
        self.next_id = id + 1;
        ObjectId(id)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.static_obstacles.contains(&c)
    }

    pub fn class_of(&self, id: ObjectId) -> Option<&ObjectClass> {
        self.objects.get(&id).and_then(|o| self.registry.get(&o.class))
    }

    /// Root (parentless, non-held) object occupying each cell.
    pub fn roots_by_cell(&self) -> BTreeMap<Cell, ObjectId> {
        self.objects
            .values()
            .filter(|o| o.parent.is_none() && Some(o.id) != self.held)
            .map(|o| (o.cell, o.id))
            .collect()
    }

    pub fn root_at(&self, c: Cell) -> Option<ObjectId> {
        self.objects
            .values()
            .find(|o| o.parent.is_none() && Some(o.id) != self.held && o.cell == c)
            .map(|o| o.id)
    }

    /// A cell the agent cannot enter.
    pub fn is_blocked(&self, c: Cell) -> bool {
        self.is_wall(c) || self.root_at(c).is_some()
    }

    pub fn children(&self, id: ObjectId) -> impl Iterator<Item = &ObjectInstance> + '_ {
        self.objects.values().filter(move |o| o.parent == Some(id))
    }

    /// True when a container hides its contents.
    pub fn hides_contents(&self, id: ObjectId) -> bool {
        match (self.objects.get(&id), self.class_of(id)) {
            (Some(o), Some(c)) => c.affordances.openable && !o.state.open,
            _ => false,
        }
    }

    /// Objects visible at a root, deepest first, ending with the root itself.
    pub fn visible_stack(&self, root: ObjectId) -> Vec<ObjectId> {
        let mut out = Vec::new();
        self.collect_visible(root, &mut out);
        out
    }

    fn collect_visible(&self, id: ObjectId, out: &mut Vec<ObjectId>) {
        if !self.hides_contents(id) {
            let kids: Vec<ObjectId> = self.children(id).map(|o| o.id).collect();
            for k in kids {
                self.collect_visible(k, out);
            }
        }
        out.push(id);
    }

    /// True when the instance can be seen by some ray: not held and not
    /// inside any closed container.
    pub fn is_observable(&self, id: ObjectId) -> bool {
        if Some(id) == self.held {
            return false;
        }
        let mut cur = self.objects.get(&id).and_then(|o| o.parent);
        while let Some(p) = cur {
            if self.hides_contents(p) || Some(p) == self.held {
                return false;
            }
            cur = self.objects.get(&p).and_then(|o| o.parent);
        }
        self.objects.contains_key(&id)
    }

    /// Outermost object that is observable and contains (or is) `id`.
    /// Objects inside closed containers resolve to the outermost closed one.
    pub fn visible_anchor(&self, id: ObjectId) -> Option<ObjectId> {
        let mut chain = vec![id];
        let mut cur = self.objects.get(&id)?.parent;
        while let Some(p) = cur {
            chain.push(p);
            cur = self.objects.get(&p)?.parent;
        }
        if chain.iter().any(|c| Some(*c) == self.held) {
            return None;
        }
        // first element (from the inside) whose ancestors are all open
        for (i, c) in chain.iter().enumerate() {
            if chain[i + 1..].iter().all(|a| !self.hides_contents(*a)) {
                return Some(*c);
            }
        }
        None
    }

    pub fn instances_of<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a ObjectInstance> + 'a {
        self.objects.values().filter(move |o| o.class == class)
    }

    pub fn held_class(&self) -> Option<&str> {
        self.held
            .and_then(|h| self.objects.get(&h))
            .map(|o| o.class.as_str())
    }

    /// Checks every structural invariant of the state.
    pub fn validate(&self) -> Result<(), WorldError> {
        self.registry.validate().map_err(WorldError::Registry)?;
        for o in self.objects.values() {
            let class = self
                .registry
                .get(&o.class)
                .ok_or_else(|| WorldError::UnknownClass(o.id, o.class.clone()))?;
            let a = class.affordances;
            if (o.state.open && !a.openable) || (o.state.on && !a.toggleable) {
                return Err(WorldError::UnaffordedState(o.id));
            }
            if Some(o.id) != self.held && self.is_wall(o.cell) {
                return Err(WorldError::ObjectOutOfBounds(o.id));
            }
            let mut seen = BTreeSet::new();
            let mut cur = o.parent;
            seen.insert(o.id);
            while let Some(p) = cur {
                let parent = self
                    .objects
                    .get(&p)
                    .ok_or(WorldError::MissingParent(o.id, p))?;
                if !seen.insert(p) {
                    return Err(WorldError::ParentCycle(o.id));
                }
                cur = parent.parent;
            }
            if let Some(p) = o.parent {
                let pc = self.class_of(p).map(|c| c.affordances.receptacle).unwrap_or(false);
                if !pc {
                    return Err(WorldError::ParentNotReceptacle(o.id, p));
                }
            }
        }
        let mut roots = BTreeSet::new();
        for o in self.objects.values() {
            if o.parent.is_none() && Some(o.id) != self.held && !roots.insert(o.cell) {
                return Err(WorldError::SharedCell(o.cell));
            }
        }
        if let Some(h) = self.held {
            let o = self.objects.get(&h).ok_or(WorldError::MissingHeld(h))?;
            if o.parent.is_some() {
                return Err(WorldError::HeldHasParent(h));
            }
        }
        if self.is_blocked(self.agent.cell) {
            return Err(WorldError::BadAgentPose(self.agent.cell));
        }
        Ok(())
    }

    /// Content hash of the dynamic state (registry excluded, it never changes).
    pub fn state_hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            width: i32,
            height: i32,
            static_obstacles: &'a BTreeSet<Cell>,
            objects: &'a BTreeMap<ObjectId, ObjectInstance>,
            agent: AgentPose,
            held: Option<ObjectId>,
            rng_seed: u64,
            step: u64,
        }
        let bytes = serde_json::to_vec(&Hashed {
            width: self.width,
            height: self.height,
            static_obstacles: &self.static_obstacles,
            objects: &self.objects,
            agent: self.agent,
            held: self.held,
            rng_seed: self.rng_seed,
            step: self.step,
        })
        .expect("world state serializes");
        let digest = Sha256::digest(&bytes);
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn condition_count(&self, c: &Condition) -> usize {
        self.instances_of(&c.class)
            .filter(|o| match &c.kind {
                ConditionKind::Flag { flag, value } => o.state.get(*flag) == *value,
                ConditionKind::In { receptacle } => o
                    .parent
                    .and_then(|p| self.objects.get(&p))
                    .map(|p| &p.class == receptacle)
                    .unwrap_or(false),
            })
            .count()
    }

    pub fn condition_met(&self, c: &Condition) -> bool {
        self.condition_count(c) >= c.count.unwrap_or(1).max(1) as usize
    }

    /// Fraction of goal conditions holding in this state.
    pub fn goal_conditions_met(&self, goal: &GoalSpec) -> f64 {
        if goal.conditions.is_empty() {
            return 1.0;
        }
        let met = goal.conditions.iter().filter(|c| self.condition_met(c)).count();
        met as f64 / goal.conditions.len() as f64
    }
}

/// Free-function form of [`WorldState::goal_conditions_met`].
pub fn goal_conditions_met(state: &WorldState, goal: &GoalSpec) -> f64 {
    state.goal_conditions_met(goal)
}

/// Value-semantics step: returns the successor state.
pub fn step(state: &WorldState, action: Action) -> (WorldState, bool, Option<ActionError>) {
    let mut next = state.clone();
    let out = next.apply(action);
    (next, out.success, out.error)
}

#[cfg(test)]
mod tests;
