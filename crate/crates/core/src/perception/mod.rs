//! Egocentric observations and the semantic map built from them.
//!
//! A frame is a 1-D panorama of rays. With a zero noise model it is the
//! ground-truth ray cast; otherwise classes are dropped or confused and
//! depths jittered before quantization.

mod export;
mod map;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::world::{AgentPose, WorldState, DEPTH_STEP_M, MAX_DEPTH_STEPS};

pub use export::{ascii, layer_pgm, MapSnapshot};
pub use map::{
    mark_false_detection, project, update_collision, Layer, Patch, SemanticMap, MAP_SIZE, PATCHES_PER_CELL,
    PATCH_M,
};

pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.01;

/// One ray of an egocentric frame.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RayObs {
    pub class: Option<String>,
    pub instance: Option<crate::world::ObjectId>,
    /// Depth in units of 0.05 m, in 0..=100.
    pub depth_steps: u8,
    /// False when the ray ran out to maximum range without hitting anything.
    pub hit: bool,
    /// State appearance bits of the observed object (0 when none).
    pub appearance: u8,
}

impl RayObs {
    pub fn depth_m(&self) -> f64 {
        self.depth_steps as f64 * DEPTH_STEP_M
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EgoFrame {
    pub rays: Vec<RayObs>,
}

impl EgoFrame {
    pub fn width(&self) -> usize {
        self.rays.len()
    }

    /// Indices of rays reporting `class`.
    pub fn rays_of<'a>(&'a self, class: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.rays
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.class.as_deref() == Some(class))
            .map(|(i, _)| i)
    }

    pub fn observes(&self, class: &str) -> bool {
        self.rays_of(class).next().is_some()
    }

    fn digest(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("frame serializes");
        Sha256::digest(&bytes).into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub p_drop: f64,
    pub p_confuse: f64,
    pub depth_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::zero()
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            p_drop: 0.0,
            p_confuse: 0.0,
            depth_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.p_drop == 0.0 && self.p_confuse == 0.0 && self.depth_sigma == 0.0
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [("p_drop", self.p_drop), ("p_confuse", self.p_confuse)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.depth_sigma >= 0.0 && self.depth_sigma.is_finite()) {
            return Err(format!("depth_sigma must be finite and >= 0, got {}", self.depth_sigma));
        }
        Ok(())
    }
}

/// Ground-truth frame seen from the agent's pose.
pub fn render_clean(state: &WorldState) -> EgoFrame {
    render_from(state, state.agent)
}

/// Ground-truth frame from an arbitrary pose.
pub fn render_from(state: &WorldState, pose: AgentPose) -> EgoFrame {
    let rays = state
        .cast_rays(pose)
        .into_iter()
        .map(|h| {
            let obj = h.instance.and_then(|id| state.objects.get(&id));
            RayObs {
                class: obj.map(|o| o.class.clone()),
                instance: h.instance,
                depth_steps: h.depth_steps,
                hit: h.wall || h.instance.is_some(),
                appearance: obj.map(|o| o.state.appearance()).unwrap_or(0),
            }
        })
        .collect();
    EgoFrame { rays }
}

/// Observation of the current state under `noise`.
///
/// The noise stream is keyed by the model seed and the content of the clean
/// frame, so an unchanged scene yields an unchanged noisy frame, as a fixed
/// perception network would.
pub fn render(state: &WorldState, noise: &NoiseModel) -> EgoFrame {
    let clean = render_clean(state);
    if noise.is_zero() {
        return clean;
    }
    let digest = clean.digest();
    let mut seed = [0u8; 32];
    for (i, b) in digest.iter().enumerate() {
        seed[i] = b ^ noise.seed.to_le_bytes()[i % 8];
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    let classes: Vec<&str> = state.registry.names().collect();
    let normal = Normal::new(0.0, noise.depth_sigma.max(0.0)).expect("sigma is finite");
    let rays = clean
        .rays
        .into_iter()
        .map(|mut r| {
            if noise.depth_sigma > 0.0 && r.hit {
                let d = r.depth_m() + normal.sample(&mut rng);
                let k = (d / DEPTH_STEP_M).round().clamp(1.0, MAX_DEPTH_STEPS as f64);
                r.depth_steps = k as u8;
            }
            if r.class.is_some() && rng.random::<f64>() < noise.p_drop {
                r.class = None;
                r.instance = None;
                r.appearance = 0;
            } else if r.hit && !classes.is_empty() && rng.random::<f64>() < noise.p_confuse {
                let c = classes[rng.random_range(0..classes.len())];
                if r.class.as_deref() != Some(c) {
                    r.class = Some(c.to_string());
                    r.instance = None;
                }
            }
            r
        })
        .collect();
    EgoFrame { rays }
}

/// True when more than `threshold` of the rays changed between frames.
pub fn check_success(prev: &EgoFrame, curr: &EgoFrame, threshold: f64) -> bool {
    assert_eq!(prev.width(), curr.width(), "frames must have the same width");
    if prev.rays.is_empty() {
        return false;
    }
    let changed = prev
        .rays
        .iter()
        .zip(&curr.rays)
        .filter(|(a, b)| {
            a.class != b.class || a.instance != b.instance || a.depth_steps != b.depth_steps || a.appearance != b.appearance
        })
        .count();
    changed as f64 / prev.rays.len() as f64 > threshold
}
