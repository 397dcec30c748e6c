use std::collections::BTreeSet;

use super::fmm::{fmm_solve_masked, DistanceField};
use crate::perception::{Patch, SemanticMap};
use crate::world::{AgentPose, Cell, Motion};

/// Extra cost, in patches, of moves that do not follow the heading.
pub const SIDESTEP_PENALTY: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("no finite path from the agent pose")]
pub struct NoPath;

/// Cells holding at least one obstacle patch.
pub fn blocked_cells(map: &SemanticMap) -> BTreeSet<Cell> {
    map.obstacle.iter().map(|p| map.patch_cell(p)).collect()
}

/// Field toward the cells in `goals`, over cell-granular free space: a patch
/// is free when its cell holds no obstacle patch. Goal cells and the cells
/// in `force_free` (the agent's own cell, a hinted stand point) always count
/// as free.
pub fn navigation_field(map: &SemanticMap, goals: &BTreeSet<Cell>, force_free: &[Cell]) -> DistanceField {
    let blocked = blocked_cells(map);
    let patches: Vec<Patch> = goals.iter().flat_map(|c| map.cell_patches(*c)).collect();
    let include: Vec<Patch> = force_free.iter().map(|c| map.center_patch(*c)).collect();
    fmm_solve_masked(map, &patches, &include, |p| {
        let c = map.patch_cell(p);
        goals.contains(&c) || force_free.contains(&c) || !blocked.contains(&c)
    })
}

/// Field value at a cell's footprint center.
pub fn cell_value(field: &DistanceField, map: &SemanticMap, c: Cell) -> f64 {
    field.get(map.center_patch(c))
}

/// One descent step on `field` from `pose`.
///
/// Translations are scored at the destination cell and must strictly
/// descend; turns are scored at the cell faced after turning. Pans and
/// backward steps pay [`SIDESTEP_PENALTY`]. Ties follow the order Forward,
/// TurnLeft, TurnRight, PanLeft, PanRight, Backward.
pub fn next_step_from_field(field: &DistanceField, map: &SemanticMap, pose: AgentPose) -> Result<Motion, NoPath> {
    let f = |c: Cell| cell_value(field, map, c);
    let here = f(pose.cell);
    if !here.is_finite() {
        return Err(NoPath);
    }
    let h = pose.heading;
    let step = |d: crate::world::Heading| pose.cell.offset(d.delta());
    let descends = |c: Cell| f(c) < here;
    if ![h, h.left(), h.right(), h.reverse()].into_iter().any(|d| descends(step(d))) {
        return Err(NoPath);
    }
    let translate = |c: Cell, penalty: f64| {
        if descends(c) {
            f(c) + penalty
        } else {
            f64::INFINITY
        }
    };
    let options = [
        (Motion::Forward, translate(step(h), 0.0)),
        (Motion::TurnLeft, f(step(h.left()))),
        (Motion::TurnRight, f(step(h.right()))),
        (Motion::PanLeft, translate(step(h.left()), SIDESTEP_PENALTY)),
        (Motion::PanRight, translate(step(h.right()), SIDESTEP_PENALTY)),
        (Motion::Backward, translate(step(h.reverse()), SIDESTEP_PENALTY)),
    ];
    let mut best: Option<(Motion, f64)> = None;
    for (m, v) in options {
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((m, v));
        }
    }
    best.map(|(m, _)| m).ok_or(NoPath)
}
