use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nav::{blocked_cells, navigation_field, next_step_from_field};
use crate::language::SubGoal;
use crate::perception::{EgoFrame, SemanticMap};
use crate::world::{Action, AgentPose, Cell, Heading, Motion};

/// What an exploration policy may look at besides the frame.
pub struct PolicyContext<'a> {
    pub map: &'a SemanticMap,
    pub pose: AgentPose,
    /// Whether `last_action` failed.
    pub last_failed: bool,
}

/// Motion source used while the current target is not in the map.
pub trait ExplorationPolicy: Send {
    fn next(&mut self, frame: &EgoFrame, last_action: Option<Action>, subgoal: Option<&SubGoal>, ctx: &PolicyContext) -> Motion;
}

/// Uniform over the six motions, never repeating a motion that just failed.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn pick(&mut self, exclude: Option<Motion>) -> Motion {
        let options: Vec<Motion> = Motion::ALL.into_iter().filter(|m| Some(*m) != exclude).collect();
        options[self.rng.random_range(0..options.len())]
    }
}

impl ExplorationPolicy for RandomPolicy {
    fn next(&mut self, _: &EgoFrame, last_action: Option<Action>, _: Option<&SubGoal>, ctx: &PolicyContext) -> Motion {
        let failed = last_action.filter(|_| ctx.last_failed).and_then(|a| a.motion());
        self.pick(failed)
    }
}

/// Cells with no explored patch that border an explored, unblocked cell.
pub fn frontier_cells(map: &SemanticMap) -> BTreeSet<Cell> {
    let blocked = blocked_cells(map);
    let explored: BTreeSet<Cell> = map.explored.iter().map(|p| map.patch_cell(p)).collect();
    let mut out = BTreeSet::new();
    for c in &explored {
        if blocked.contains(c) {
            continue;
        }
        for h in Heading::ALL {
            let n = c.offset(h.delta());
            if !explored.contains(&n) && !blocked.contains(&n) && map.center_patch(n).in_bounds() {
                out.insert(n);
            }
        }
    }
    out
}

/// Walks toward the nearest frontier cell; random once none is reachable.
pub struct FrontierPolicy {
    fallback: RandomPolicy,
    pub fallbacks: u32,
}

impl FrontierPolicy {
    pub fn new(seed: u64) -> Self {
        FrontierPolicy {
            fallback: RandomPolicy::new(seed),
            fallbacks: 0,
        }
    }
}

impl ExplorationPolicy for FrontierPolicy {
    fn next(&mut self, frame: &EgoFrame, last_action: Option<Action>, subgoal: Option<&SubGoal>, ctx: &PolicyContext) -> Motion {
        let goals = frontier_cells(ctx.map);
        if !goals.is_empty() {
            let field = navigation_field(ctx.map, &goals, &[ctx.pose.cell]);
            if let Ok(m) = next_step_from_field(&field, ctx.map, ctx.pose) {
                return m;
            }
        }
        self.fallbacks += 1;
        self.fallback.next(frame, last_action, subgoal, ctx)
    }
}
