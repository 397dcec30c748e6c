use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EgoFrame;
use crate::world::{ray_angle_deg, Action, AgentPose, Cell};

/// Patches per map side.
pub const MAP_SIZE: usize = 240;
/// Patch pitch in meters.
pub const PATCH_M: f64 = 0.05;
pub const PATCHES_PER_CELL: i32 = 5;
/// Patch index of the start cell's center patch.
const CENTER: i32 = 120;
const WORDS: usize = MAP_SIZE * MAP_SIZE / 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Patch {
    pub x: i32,
    pub y: i32,
}

impl Patch {
    pub const fn new(x: i32, y: i32) -> Self {
        Patch { x, y }
    }

    pub fn in_bounds(self) -> bool {
        (0..MAP_SIZE as i32).contains(&self.x) && (0..MAP_SIZE as i32).contains(&self.y)
    }

    pub fn index(self) -> usize {
        self.y as usize * MAP_SIZE + self.x as usize
    }

    pub fn from_index(i: usize) -> Patch {
        Patch::new((i % MAP_SIZE) as i32, (i / MAP_SIZE) as i32)
    }

    pub fn dist2(self, o: Patch) -> i64 {
        let dx = (self.x - o.x) as i64;
        let dy = (self.y - o.y) as i64;
        dx * dx + dy * dy
    }
}

/// A 240×240 bit layer.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Layer {
    bits: Vec<u64>,
}

impl Default for Layer {
    fn default() -> Self {
        Layer { bits: vec![0; WORDS] }
    }
}

impl std::fmt::Debug for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Layer({} set)", self.count())
    }
}

impl Layer {
    pub fn get(&self, p: Patch) -> bool {
        p.in_bounds() && {
            let i = p.index();
            self.bits[i / 64] >> (i % 64) & 1 == 1
        }
    }

    pub fn set(&mut self, p: Patch, v: bool) {
        if !p.in_bounds() {
            return;
        }
        let i = p.index();
        if v {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|w| *w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = Patch> + '_ {
        self.bits.iter().enumerate().flat_map(|(wi, w)| {
            let w = *w;
            (0..64)
                .filter(move |b| w >> b & 1 == 1)
                .map(move |b| Patch::from_index(wi * 64 + b))
        })
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.bits
    }
}

/// The agent's belief about the world, anchored at the start cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticMap {
    /// World cell whose center patch is (120, 120).
    pub origin: Cell,
    pub layers: BTreeMap<String, Layer>,
    pub obstacle: Layer,
    pub explored: Layer,
    pub false_detection: BTreeSet<(String, Patch)>,
}

impl SemanticMap {
    pub fn new(origin: Cell) -> Self {
        SemanticMap {
            origin,
            layers: BTreeMap::new(),
            obstacle: Layer::default(),
            explored: Layer::default(),
            false_detection: BTreeSet::new(),
        }
    }

    /// Continuous patch coordinates of a cell center.
    pub fn cell_center(&self, c: Cell) -> (f64, f64) {
        (
            CENTER as f64 + 0.5 + (PATCHES_PER_CELL * (c.x - self.origin.x)) as f64,
            CENTER as f64 + 0.5 + (PATCHES_PER_CELL * (c.y - self.origin.y)) as f64,
        )
    }

    pub fn center_patch(&self, c: Cell) -> Patch {
        let (x, y) = self.cell_center(c);
        Patch::new(x.floor() as i32, y.floor() as i32)
    }

    /// The 5×5 block of patches covering a cell.
    pub fn cell_patches(&self, c: Cell) -> impl Iterator<Item = Patch> {
        let base = self.center_patch(c);
        (-2..=2).flat_map(move |dy| (-2..=2).map(move |dx| Patch::new(base.x + dx, base.y + dy)))
    }

    /// Cell containing a patch.
    pub fn patch_cell(&self, p: Patch) -> Cell {
        let off = |v: i32| (v - (CENTER - 2)).div_euclid(PATCHES_PER_CELL);
        Cell::new(self.origin.x + off(p.x), self.origin.y + off(p.y))
    }

    pub fn layer(&self, class: &str) -> Option<&Layer> {
        self.layers.get(class)
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.layers.get(class).is_some_and(|l| !l.is_empty())
    }

    pub fn is_flagged(&self, class: &str, p: Patch) -> bool {
        self.false_detection.contains(&(class.to_string(), p))
    }

    fn set_class(&mut self, class: &str, p: Patch) {
        if self.is_flagged(class, p) {
            return;
        }
        self.layers.entry(class.to_string()).or_default().set(p, true);
    }

    fn clear_classes(&mut self, p: Patch) {
        for layer in self.layers.values_mut() {
            layer.set(p, false);
        }
    }

    /// Marks the agent's own cell as explored free space.
    pub fn mark_footprint(&mut self, c: Cell) {
        let patches: Vec<Patch> = self.cell_patches(c).collect();
        for p in patches {
            self.explored.set(p, true);
            self.obstacle.set(p, false);
            self.clear_classes(p);
        }
    }

    /// Patch `k` steps along ray `i` of a `width`-ray frame seen from `pose`.
    pub fn ray_patch(&self, pose: AgentPose, i: usize, width: usize, k: f64) -> Patch {
        let (cx, cy) = self.cell_center(pose.cell);
        let angle = ray_angle_deg(pose.heading.degrees() as f64, i, width).to_radians();
        let (sin, cos) = angle.sin_cos();
        Patch::new((cx + k * cos).floor() as i32, (cy + k * sin).floor() as i32)
    }

    /// In-place form of [`project`].
    pub fn project_frame(&mut self, frame: &EgoFrame, pose: AgentPose) {
        let w = frame.rays.len();
        for (i, ray) in frame.rays.iter().enumerate() {
            for k in 1..ray.depth_steps {
                let p = self.ray_patch(pose, i, w, k as f64);
                if !p.in_bounds() {
                    break;
                }
                self.explored.set(p, true);
                self.clear_classes(p);
            }
            if !ray.hit {
                continue;
            }
            let end = self.ray_patch(pose, i, w, ray.depth_steps as f64);
            if !end.in_bounds() {
                log::debug!("ray {i} endpoint {end:?} outside the map");
                continue;
            }
            self.explored.set(end, true);
            self.obstacle.set(end, true);
            if let Some(class) = &ray.class {
                self.set_class(class, end);
            }
        }
        self.mark_footprint(pose.cell);
    }

    /// Marks the 5×5 block of a cell as obstacle.
    pub fn block_cell(&mut self, c: Cell) {
        let patches: Vec<Patch> = self.cell_patches(c).collect();
        for p in patches {
            self.obstacle.set(p, true);
        }
    }

    pub fn flag_false(&mut self, class: &str, p: Patch) {
        if !p.in_bounds() {
            return;
        }
        if let Some(l) = self.layers.get_mut(class) {
            l.set(p, false);
        }
        self.false_detection.insert((class.to_string(), p));
    }

    /// Patches of `class` that lie inside the given cell.
    pub fn class_patches_in_cell(&self, class: &str, c: Cell) -> Vec<Patch> {
        match self.layers.get(class) {
            Some(l) => self.cell_patches(c).filter(|p| l.get(*p)).collect(),
            None => Vec::new(),
        }
    }

    /// Euclidean distance in meters from a cell center to the nearest patch
    /// center of `class`.
    pub fn distance_to_class(&self, c: Cell, class: &str) -> Option<f64> {
        let (cx, cy) = self.cell_center(c);
        self.layers.get(class)?.iter().fold(None, |best: Option<f64>, p| {
            let dx = p.x as f64 + 0.5 - cx;
            let dy = p.y as f64 + 0.5 - cy;
            let d = (dx * dx + dy * dy).sqrt() * PATCH_M;
            Some(best.map_or(d, |b| b.min(d)))
        })
    }

    /// Content hash of the map (hex, 32 chars).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        fn feed(h: &mut Sha256, l: &Layer) {
            for w in l.words() {
                h.update(w.to_le_bytes());
            }
        }
        feed(&mut h, &self.obstacle);
        feed(&mut h, &self.explored);
        for (name, l) in &self.layers {
            if !l.is_empty() {
                h.update(name.as_bytes());
                feed(&mut h, l);
            }
        }
        for (c, p) in &self.false_detection {
            h.update(c.as_bytes());
            h.update(p.x.to_le_bytes());
            h.update(p.y.to_le_bytes());
        }
        h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Projects a frame seen from `pose` into a copy of `map`.
pub fn project(frame: &EgoFrame, pose: AgentPose, map: &SemanticMap) -> SemanticMap {
    let mut m = map.clone();
    m.project_frame(frame, pose);
    m
}

/// Marks the cell a failed translation tried to enter.
pub fn update_collision(map: &SemanticMap, pose: AgentPose, action: Action) -> SemanticMap {
    let mut m = map.clone();
    if let Some(motion) = action.motion().filter(|m| m.is_translation()) {
        m.block_cell(pose.after(motion).cell);
    }
    m
}

pub fn mark_false_detection(map: &SemanticMap, class: &str, patch: Patch) -> SemanticMap {
    let mut m = map.clone();
    m.flag_false(class, patch);
    m
}
