use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::map::{Layer, Patch, SemanticMap, MAP_SIZE};
use crate::world::Cell;

pub const SNAPSHOT_FORMAT: &str = "jarvis-map/1";

/// Packed JSON form of a map: set patches as flat indices per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSnapshot {
    pub format: String,
    pub size: usize,
    pub origin: Cell,
    pub obstacle: Vec<u32>,
    pub explored: Vec<u32>,
    pub layers: BTreeMap<String, Vec<u32>>,
    pub false_detection: Vec<(String, Patch)>,
}

fn pack(l: &Layer) -> Vec<u32> {
    l.iter().map(|p| p.index() as u32).collect()
}

fn unpack(v: &[u32]) -> Result<Layer, String> {
    let mut l = Layer::default();
    for &i in v {
        if i as usize >= MAP_SIZE * MAP_SIZE {
            return Err(format!("patch index {i} out of range"));
        }
        l.set(Patch::from_index(i as usize), true);
    }
    Ok(l)
}

impl MapSnapshot {
    pub fn from_map(m: &SemanticMap) -> Self {
        MapSnapshot {
            format: SNAPSHOT_FORMAT.into(),
            size: MAP_SIZE,
            origin: m.origin,
            obstacle: pack(&m.obstacle),
            explored: pack(&m.explored),
            layers: m
                .layers
                .iter()
                .filter(|(_, l)| !l.is_empty())
                .map(|(k, l)| (k.clone(), pack(l)))
                .collect(),
            false_detection: m.false_detection.iter().cloned().collect(),
        }
    }

    pub fn into_map(self) -> Result<SemanticMap, String> {
        if self.format != SNAPSHOT_FORMAT {
            return Err(format!("unsupported map format `{}`", self.format));
        }
        if self.size != MAP_SIZE {
            return Err(format!("map size {} (expected {MAP_SIZE})", self.size));
        }
        let mut m = SemanticMap::new(self.origin);
        m.obstacle = unpack(&self.obstacle)?;
        m.explored = unpack(&self.explored)?;
        for (k, v) in &self.layers {
            m.layers.insert(k.clone(), unpack(v)?);
        }
        m.false_detection = self.false_detection.into_iter().collect();
        Ok(m)
    }
}

/// Binary PGM (P5) of a layer: set patches white.
pub fn layer_pgm(l: &Layer) -> Vec<u8> {
    let mut out = format!("P5\n{MAP_SIZE} {MAP_SIZE}\n255\n").into_bytes();
    for y in 0..MAP_SIZE as i32 {
        for x in 0..MAP_SIZE as i32 {
            out.push(if l.get(Patch::new(x, y)) { 255 } else { 0 });
        }
    }
    out
}

/// Text rendering downsampled by `factor`: `#` obstacle, the first letter of
/// a class, `.` explored free space, blank for unknown.
pub fn ascii(m: &SemanticMap, factor: usize) -> String {
    let f = factor.max(1);
    let n = MAP_SIZE.div_ceil(f);
    let mut out = String::with_capacity(n * (n + 1));
    for by in 0..n {
        for bx in 0..n {
            let block = || {
                (0..f).flat_map(move |dy| (0..f).map(move |dx| Patch::new((bx * f + dx) as i32, (by * f + dy) as i32)))
            };
            let class = m
                .layers
                .iter()
                .find(|(_, l)| block().any(|p| l.get(p)))
                .map(|(k, _)| k.chars().next().unwrap_or('?'));
            let ch = if let Some(c) = class {
                c
            } else if block().any(|p| m.obstacle.get(p)) {
                '#'
            } else if block().any(|p| m.explored.get(p)) {
                '.'
            } else {
                ' '
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}
