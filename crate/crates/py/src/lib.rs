//! Python bindings: the simulator, noise-free mapping, suite generation,
//! benchmark runs, trace replay, plan repair and the metrics.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use jarvis_core::bench::{self, EpisodeTrace, KindMix, RunConfig, RunMode, SuiteSpec};
use jarvis_core::commander::CommanderSetting;
use jarvis_core::goal::{GoalSpec, TaskType};
use jarvis_core::language::{parse_subgoals, PlannerBackend, TemplatePlanner};
use jarvis_core::perception::{ascii, render_clean, MapSnapshot, SemanticMap};
use jarvis_core::reasoner_action::solve_grid;
use jarvis_core::reasoner_task::rectify_from;
use jarvis_core::world::scenario::Scenario;
use jarvis_core::world::{Action, ClassRegistry, WorldState};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A grid household world.
#[pyclass(module = "jarvis", skip_from_py_object)]
#[derive(Clone)]
pub struct World {
    inner: WorldState,
}

#[pymethods]
impl World {
    /// Loads a `jarvis-scenario/1` JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<World> {
        let s: Scenario = serde_json::from_str(text).map_err(value_err)?;
        Ok(World {
            inner: s.into_state().map_err(value_err)?,
        })
    }

    /// The small kitchen used in examples and tests.
    #[staticmethod]
    fn toy_kitchen() -> World {
        World {
            inner: bench::fixtures::toy_kitchen(),
        }
    }

    fn to_json(&self) -> String {
        Scenario::from_state(&self.inner).to_json()
    }

    /// Applies an action such as `Forward`, `Pickup@0.5` or `Stop`.
    /// Returns `(success, error)`.
    fn step(&mut self, action: &str) -> PyResult<(bool, Option<String>)> {
        let a: Action = action.parse().map_err(PyValueError::new_err)?;
        let out = self.inner.apply(a);
        Ok((out.success, out.error.map(|e| e.to_string())))
    }

    fn state_hash(&self) -> String {
        self.inner.state_hash()
    }

    /// `(x, y, heading_degrees)` of the agent.
    #[getter]
    fn agent(&self) -> (i32, i32, u32) {
        let p = self.inner.agent;
        (p.cell.x, p.cell.y, p.heading.degrees())
    }

    #[getter]
    fn held(&self) -> Option<String> {
        self.inner.held_class().map(str::to_string)
    }

    /// Class seen by each ray of the noise-free view, left to right.
    fn observe(&self) -> Vec<Option<String>> {
        render_clean(&self.inner).rays.into_iter().map(|r| r.class).collect()
    }

    /// Fraction of the goal's conditions that hold; `goal` is GoalSpec JSON.
    fn goal_conditions_met(&self, goal: &str) -> PyResult<f64> {
        let g: GoalSpec = serde_json::from_str(goal).map_err(value_err)?;
        Ok(self.inner.goal_conditions_met(&g))
    }

    fn __repr__(&self) -> String {
        let (x, y, h) = self.agent();
        format!("World({}x{}, agent=({x}, {y}, {h}), objects={})", self.inner.width, self.inner.height, self.inner.objects.len())
    }
}

/// Egocentric semantic map anchored at the agent's start cell.
#[pyclass(module = "jarvis")]
pub struct Map {
    inner: SemanticMap,
}

#[pymethods]
impl Map {
    #[new]
    fn new(world: &World) -> Map {
        Map {
            inner: SemanticMap::new(world.inner.agent.cell),
        }
    }

    /// Projects the world's current noise-free view.
    fn observe(&mut self, world: &World) {
        self.inner.project_frame(&render_clean(&world.inner), world.inner.agent);
    }

    fn layers(&self) -> Vec<String> {
        self.inner.layers.iter().filter(|(_, l)| !l.is_empty()).map(|(k, _)| k.clone()).collect()
    }

    /// Number of set patches in `obstacle`, `explored` or a class layer.
    fn count(&self, layer: &str) -> usize {
        match layer {
            "obstacle" => self.inner.obstacle.count(),
            "explored" => self.inner.explored.count(),
            class => self.inner.layer(class).map_or(0, |l| l.count()),
        }
    }

    #[pyo3(signature = (factor = 4))]
    fn ascii(&self, factor: usize) -> String {
        ascii(&self.inner, factor)
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    /// `jarvis-map/1` snapshot.
    fn to_json(&self) -> String {
        serde_json::to_string(&MapSnapshot::from_map(&self.inner)).expect("snapshot serializes")
    }
}

/// Suite JSON with `count` validated instances.
#[pyfunction]
#[pyo3(signature = (seed, count, tasks = None, kinds = "mixed"))]
fn generate_suite(seed: u64, count: usize, tasks: Option<Vec<String>>, kinds: &str) -> PyResult<String> {
    let tasks = tasks
        .unwrap_or_default()
        .iter()
        .map(|t| t.parse::<TaskType>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(PyValueError::new_err)?;
    let kinds = match kinds {
        "tfd" => KindMix::Tfd,
        "edh" => KindMix::Edh,
        "mixed" => KindMix::Mixed,
        other => return Err(PyValueError::new_err(format!("unknown kind mix `{other}`"))),
    };
    let instances = bench::generate_with(&SuiteSpec {
        seed,
        count,
        tasks,
        kinds,
    })
    .map_err(value_err)?;
    Ok(bench::Suite::new(seed, instances).to_json())
}

fn run_mode(mode: &str) -> PyResult<RunMode> {
    let (oracle_subgoals, oracle_perception, teleport_executor) = match mode {
        "oracle" => (true, true, false),
        "oracle-subgoals" => (true, false, false),
        "oracle-perception" => (false, true, false),
        "pipeline" => (false, false, false),
        "teleport" => (true, true, true),
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    };
    Ok(RunMode {
        oracle_subgoals,
        oracle_perception,
        teleport_executor,
        ..RunMode::default()
    })
}

/// Runs a suite (JSON text). Returns `(report_json, traces_jsonl)`.
#[pyfunction]
#[pyo3(signature = (suite, mode = "oracle", seed = 0, parallel = 1, setting = None, p_drop = 0.0, depth_sigma = 0.0))]
#[allow(clippy::too_many_arguments)]
fn run(
    suite: &str,
    mode: &str,
    seed: u64,
    parallel: usize,
    setting: Option<&str>,
    p_drop: f64,
    depth_sigma: f64,
) -> PyResult<(String, Vec<String>)> {
    let suite: bench::Suite = serde_json::from_str(suite).map_err(value_err)?;
    let mut mode = run_mode(mode)?;
    mode.commander_setting = setting
        .map(|s| s.parse::<CommanderSetting>())
        .transpose()
        .map_err(PyValueError::new_err)?;
    mode.noise.p_drop = p_drop;
    mode.noise.depth_sigma = depth_sigma;
    mode.noise.validate().map_err(PyValueError::new_err)?;
    for i in &suite.instances {
        i.validate().map_err(value_err)?;
    }
    let config = RunConfig {
        mode,
        seed,
        ..RunConfig::default()
    };
    let planner = PlannerBackend::Template(TemplatePlanner::new(ClassRegistry::kitchen().names()));
    let traces = bench::run_suite(&suite.instances, &config, &planner, parallel.max(1));
    if traces.is_empty() {
        return Err(PyValueError::new_err("suite has no instances"));
    }
    let rows: Vec<_> = traces.iter().map(|t| (t.header.task, t.metrics.clone())).collect();
    Ok((bench::aggregate(&rows).to_json(), traces.iter().map(EpisodeTrace::to_jsonl).collect()))
}

/// Verifies a JSONL trace and returns the number of steps checked.
/// Raises `ValueError` at the first divergence.
#[pyfunction]
fn replay(trace: &str) -> PyResult<usize> {
    match EpisodeTrace::parse(trace).map_err(value_err)? {
        None => Ok(0),
        Some(t) => bench::replay(&t).map_err(value_err),
    }
}

/// Repairs a sub-goal sequence given as "Action Target" text.
#[pyfunction]
#[pyo3(signature = (text, held = None))]
fn rectify(text: &str, held: Option<&str>) -> PyResult<Vec<String>> {
    let seq = parse_subgoals(text).map_err(value_err)?;
    Ok(rectify_from(&seq, &ClassRegistry::kitchen(), held)
        .iter()
        .map(|g| g.to_string())
        .collect())
}

#[pyfunction]
fn metric_tlw(m: f64, ref_len: usize, pred_len: usize) -> PyResult<f64> {
    if ref_len == 0 {
        return Err(PyValueError::new_err("ref_len must be at least 1"));
    }
    Ok(bench::metric_tlw(m, ref_len, pred_len))
}

/// Fast-marching travel times on a row-major grid; `inf` where unreachable.
#[pyfunction]
fn fmm_grid(free: Vec<bool>, width: usize, height: usize, goals: Vec<usize>) -> PyResult<Vec<f64>> {
    if free.len() != width * height {
        return Err(PyValueError::new_err(format!(
            "grid has {} cells, expected {width}x{height}",
            free.len()
        )));
    }
    Ok(solve_grid(&free, width, height, &goals))
}

/// Reads a file relative to the working directory; a convenience for
/// loading suites and traces.
#[pyfunction]
fn read_text(path: &str) -> PyResult<String> {
    std::fs::read_to_string(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
}

#[pymodule]
fn jarvis(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<World>()?;
    m.add_class::<Map>()?;
    m.add_function(wrap_pyfunction!(generate_suite, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(rectify, m)?)?;
    m.add_function(wrap_pyfunction!(metric_tlw, m)?)?;
    m.add_function(wrap_pyfunction!(fmm_grid, m)?)?;
    m.add_function(wrap_pyfunction!(read_text, m)?)?;
    m.add("TASK_TYPES", TaskType::ALL.iter().map(|t| t.name()).collect::<Vec<_>>())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_steps_and_observes() {
        let mut w = World::toy_kitchen();
        let h0 = w.state_hash();
        assert_eq!(World::from_json(&w.to_json()).unwrap().state_hash(), h0);
        assert_eq!(w.observe().len(), 90);
        assert!(w.step("TurnLeft").unwrap().0);
        assert_ne!(w.state_hash(), h0);
        assert!(w.step("Teleport").is_err());
    }

    #[test]
    fn map_projects_views() {
        let w = World::toy_kitchen();
        let mut m = Map::new(&w);
        m.observe(&w);
        assert!(m.count("obstacle") > 0);
        assert!(!m.layers().is_empty());
        assert_eq!(m.ascii(4).lines().count(), 60);
    }

    #[test]
    fn suite_runs_and_replays() {
        let suite = generate_suite(2, 3, Some(vec!["MakeToast".into()]), "tfd").unwrap();
        let (report, traces) = run(&suite, "oracle", 2, 1, None, 0.0, 0.0).unwrap();
        assert!(report.contains("\"sr\": 1.0"));
        assert_eq!(traces.len(), 3);
        for t in &traces {
            assert!(replay(t).unwrap() > 0);
        }
        assert_eq!(replay("").unwrap(), 0);
        assert!(run(&suite, "psychic", 0, 1, None, 0.0, 0.0).is_err());
        assert!(run(&suite, "pipeline", 0, 1, Some("FullInfo"), 2.0, 0.0).is_err());
    }

    #[test]
    fn helpers() {
        assert_eq!(rectify("Place Plate", None).unwrap(), Vec::<String>::new());
        assert_eq!(metric_tlw(1.0, 100, 400).unwrap(), 0.25);
        assert!(metric_tlw(1.0, 0, 1).is_err());
        let t = fmm_grid(vec![true; 5], 5, 1, vec![0]).unwrap();
        assert_eq!(t, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(fmm_grid(vec![true; 4], 5, 1, vec![0]).is_err());
    }
}
