//! Action-level reasoning: FMM navigation over the semantic map,
//! interaction gating, collision recovery and local target search.

mod executor;
mod fmm;
mod nav;
mod policy;
mod predicates;

pub use executor::{
    point_in_frame, point_in_frame_where, MIN_RUN_RAYS, Executor, ExecutorConfig, ExecutorState, Guidance, Placement, SearchPhase,
};
pub use fmm::{fmm_solve, fmm_solve_masked, solve_grid, DistanceField, UNREACHABLE_GRAY};
pub use nav::{blocked_cells, cell_value, navigation_field, next_step_from_field, NoPath, SIDESTEP_PENALTY};
pub use policy::{frontier_cells, ExplorationPolicy, FrontierPolicy, PolicyContext, RandomPolicy};
pub use predicates::{
    class_cells, eval_action_predicate, is_near, ActionPredicate, PredicateArg, PredicateContext, NEAR_M,
};
