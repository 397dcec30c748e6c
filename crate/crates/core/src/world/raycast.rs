//! Ground-truth ray casting over the cell grid.
//!
//! Rays march from the agent's cell center in 0.05 m steps, so reported
//! depths are already quantized. A cell holding a root object is opaque; the
//! ray reports one of the visible objects stacked in that cell, chosen by
//! where along the entered face the ray lands.

use std::collections::BTreeMap;

use super::{AgentPose, Cell, ObjectId, WorldState, CELL_SIZE_M};

pub const RAY_COUNT: usize = 90;
pub const FOV_DEG: f64 = 90.0;
/// Depth sampling pitch in meters.
pub const DEPTH_STEP_M: f64 = 0.05;
/// 5 m / 0.05 m.
pub const MAX_DEPTH_STEPS: u8 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RayHit {
    /// Depth in units of 0.05 m.
    pub depth_steps: u8,
    pub instance: Option<ObjectId>,
    /// True when the ray stopped on a wall or grid edge.
    pub wall: bool,
}

/// Absolute angle (degrees, clockwise from East) of ray `i` out of `count`.
pub fn ray_angle_deg(heading_deg: f64, i: usize, count: usize) -> f64 {
    let pitch = FOV_DEG / count as f64;
    heading_deg - FOV_DEG / 2.0 + (i as f64 + 0.5) * pitch
}

impl WorldState {
    /// Casts the full panorama from `pose`.
    pub fn cast_rays(&self, pose: AgentPose) -> Vec<RayHit> {
        let roots = self.roots_by_cell();
        (0..RAY_COUNT)
            .map(|i| {
                let angle = ray_angle_deg(pose.heading.degrees() as f64, i, RAY_COUNT);
                self.cast_one(&roots, pose.cell, angle)
            })
            .collect()
    }

    /// Casts a single ray of the agent's current panorama.
    pub fn cast_ray_index(&self, pose: AgentPose, i: usize) -> RayHit {
        let roots = self.roots_by_cell();
        let angle = ray_angle_deg(pose.heading.degrees() as f64, i, RAY_COUNT);
        self.cast_one(&roots, pose.cell, angle)
    }

    fn cast_one(&self, roots: &BTreeMap<Cell, ObjectId>, from: Cell, angle_deg: f64) -> RayHit {
        let (ox, oy) = from.center_m();
        let (sin, cos) = angle_deg.to_radians().sin_cos();
        let mut prev = from;
        for k in 1..=MAX_DEPTH_STEPS {
            let d = k as f64 * DEPTH_STEP_M;
            let px = ox + d * cos;
            let py = oy + d * sin;
            let cell = Cell::new(
                (px / CELL_SIZE_M).floor() as i32,
                (py / CELL_SIZE_M).floor() as i32,
            );
            if cell == prev {
                continue;
            }
            let entered_vertical_face = cell.x != prev.x;
            prev = cell;
            if self.is_wall(cell) {
                return RayHit {
                    depth_steps: k,
                    instance: None,
                    wall: true,
                };
            }
            if let Some(root) = roots.get(&cell) {
                let stack = self.visible_stack(*root);
                let along = if entered_vertical_face { py } else { px } / CELL_SIZE_M;
                let t = along - along.floor();
                let slot = ((t * stack.len() as f64) as usize).min(stack.len() - 1);
                return RayHit {
                    depth_steps: k,
                    instance: Some(stack[slot]),
                    wall: false,
                };
            }
        }
        RayHit {
            depth_steps: MAX_DEPTH_STEPS,
            instance: None,
            wall: false,
        }
    }
}

/// Ray index addressed by a normalized horizontal view coordinate.
pub fn ray_index_for_u(u: f64) -> usize {
    let i = (u.clamp(0.0, 1.0) * RAY_COUNT as f64).round() as usize;
    i.min(RAY_COUNT - 1)
}

/// Normalized view coordinate of ray `i`.
pub fn u_for_ray_index(i: usize) -> f64 {
    i as f64 / RAY_COUNT as f64
}
