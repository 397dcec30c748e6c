use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::perception::{Patch, SemanticMap, MAP_SIZE};

/// Gray level of unreachable patches in [`DistanceField::to_pgm`].
pub const UNREACHABLE_GRAY: u8 = 0;

/// Travel time in patch units over a rectangular window of the map.
/// Patches outside the window read as unreachable.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    pub x0: i32,
    pub y0: i32,
    pub width: usize,
    pub height: usize,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn from_grid(x0: i32, y0: i32, width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height);
        DistanceField {
            x0,
            y0,
            width,
            height,
            values,
        }
    }

    pub fn get(&self, p: Patch) -> f64 {
        let (x, y) = (p.x - self.x0, p.y - self.y0);
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return f64::INFINITY;
        }
        self.values[y as usize * self.width + x as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Full-map binary PGM: goals white, fading with travel time down to 1;
    /// unreachable patches at [`UNREACHABLE_GRAY`].
    pub fn to_pgm(&self) -> Vec<u8> {
        let max = self.max_finite().max(1e-9);
        let mut out = format!("P5\n{MAP_SIZE} {MAP_SIZE}\n255\n").into_bytes();
        for y in 0..MAP_SIZE as i32 {
            for x in 0..MAP_SIZE as i32 {
                let v = self.get(Patch::new(x, y));
                out.push(if v.is_finite() {
                    255 - (254.0 * v / max).round() as u8
                } else {
                    UNREACHABLE_GRAY
                });
            }
        }
        out
    }

    /// Largest finite value, or 0 when nothing is reachable.
    pub fn max_finite(&self) -> f64 {
        self.values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on value, then index for a deterministic pop order
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// First-order fast marching on a `w`×`h` grid with unit speed.
///
/// `free[i]` marks traversable cells (row-major); goal cells are sources at
/// zero whether or not they are free. Uses the 4-neighbor upwind update.
pub fn solve_grid(free: &[bool], w: usize, h: usize, goals: &[usize]) -> Vec<f64> {
    assert_eq!(free.len(), w * h);
    let mut t = vec![f64::INFINITY; w * h];
    let mut known = vec![false; w * h];
    let mut heap = BinaryHeap::new();
    for &g in goals {
        if g < t.len() {
            t[g] = 0.0;
            heap.push(Entry(0.0, g));
        }
    }
    let known_at = |t: &[f64], known: &[bool], x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
            return f64::INFINITY;
        }
        let i = y as usize * w + x as usize;
        if known[i] {
            t[i]
        } else {
            f64::INFINITY
        }
    };
    while let Some(Entry(v, i)) = heap.pop() {
        if known[i] || v > t[i] {
            continue;
        }
        known[i] = true;
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let n = ny as usize * w + nx as usize;
            if known[n] || !free[n] {
                continue;
            }
            let a = known_at(&t, &known, nx - 1, ny).min(known_at(&t, &known, nx + 1, ny));
            let b = known_at(&t, &known, nx, ny - 1).min(known_at(&t, &known, nx, ny + 1));
            let u = eikonal_update(a, b);
            if u < t[n] {
                t[n] = u;
                heap.push(Entry(u, n));
            }
        }
    }
    t
}

/// Two-axis upwind solution of (T-a)² + (T-b)² = 1.
fn eikonal_update(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi - lo >= 1.0 {
        lo + 1.0
    } else {
        (lo + hi + (2.0 - (hi - lo) * (hi - lo)).sqrt()) / 2.0
    }
}

/// Margin in patches kept around the known part of the map.
const WINDOW_MARGIN: i32 = 15;

/// Bounding box (inclusive) of everything the map knows, padded.
fn window(map: &SemanticMap, goals: &[Patch], include: &[Patch]) -> (i32, i32, i32, i32) {
    let mut b = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
    let mut grow = |p: Patch| {
        b = (b.0.min(p.x), b.1.min(p.y), b.2.max(p.x), b.3.max(p.y));
    };
    map.explored.iter().for_each(&mut grow);
    map.obstacle.iter().for_each(&mut grow);
    goals.iter().chain(include).copied().for_each(&mut grow);
    grow(map.center_patch(map.origin));
    let max = MAP_SIZE as i32 - 1;
    (
        (b.0 - WINDOW_MARGIN).max(0),
        (b.1 - WINDOW_MARGIN).max(0),
        (b.2 + WINDOW_MARGIN).min(max),
        (b.3 + WINDOW_MARGIN).min(max),
    )
}

/// Distance field to `goals` over the patches the map does not mark as
/// obstacle. Unknown space counts as free.
pub fn fmm_solve(map: &SemanticMap, goals: &[Patch]) -> DistanceField {
    fmm_solve_masked(map, goals, &[], |p| !map.obstacle.get(p))
}

/// As [`fmm_solve`] with a caller-supplied free predicate. The solve window
/// always covers `include`.
pub fn fmm_solve_masked(
    map: &SemanticMap,
    goals: &[Patch],
    include: &[Patch],
    free: impl Fn(Patch) -> bool,
) -> DistanceField {
    assert!(!goals.is_empty(), "fmm_solve needs at least one goal patch");
    let (x0, y0, x1, y1) = window(map, goals, include);
    let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            mask[y * w + x] = free(Patch::new(x0 + x as i32, y0 + y as i32));
        }
    }
    let idx: Vec<usize> = goals
        .iter()
        .filter(|p| p.in_bounds())
        .map(|p| (p.y - y0) as usize * w + (p.x - x0) as usize)
        .collect();
    DistanceField::from_grid(x0, y0, w, h, solve_grid(&mask, w, h, &idx))
}
