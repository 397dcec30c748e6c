//! The `jarvis` command line: suite generation, benchmark runs, trace
//! replay, sub-goal repair, map rendering and report aggregation.
//!
//! Exit codes: 0 on completion (whatever the scores), 1 when a replay
//! diverges, 2 on I/O, input or configuration errors.

use std::io::{Read as _, Write as _};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{
    aggregate, generate_with, replay, run_suite, EpisodeTrace, Exploration, KindMix, Limits, RunConfig, RunMode,
    Suite, SuiteSpec, TraceError,
};
use crate::commander::CommanderSetting;
use crate::goal::TaskType;
use crate::language::{parse_subgoals, PlannerBackend, RemoteEndpoint, RemotePlanner, TemplatePlanner};
use crate::perception::{ascii, layer_pgm, render_clean, MapSnapshot, SemanticMap};
use crate::reasoner_action::{fmm_solve, DistanceField, ExecutorConfig};
use crate::reasoner_task::{diff, rectify_from};
use crate::world::scenario::Scenario;
use crate::world::{teleport_execute, ClassRegistry, WorldState};

pub const ENDPOINT_ENV: &str = "JARVIS_PLANNER_ENDPOINT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

#[derive(Parser, Debug)]
#[command(name = "jarvis", version, about = "Household-task engine and benchmark harness")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded suite of validated instances.
    Generate(GenerateArgs),
    /// Run a suite and write traces plus a report.
    Run(RunArgs),
    /// Re-execute a trace and verify every recorded world hash.
    Replay {
        trace: PathBuf,
    },
    /// Repair a sub-goal sequence ("Action Target" per line).
    Rectify(RectifyArgs),
    /// Render map layers, an ASCII view and optionally a distance field.
    RenderMap(RenderArgs),
    /// Aggregate metrics from trace files or directories of them.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 12)]
    pub count: usize,
    /// Comma-separated task types; all twelve when omitted.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<TaskType>,
    #[arg(long, value_enum, default_value_t = KindArg::Mixed)]
    pub kinds: KindArg,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Tfd,
    Edh,
    Mixed,
}

/// Which stages run on ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModePreset {
    /// Ground-truth sub-goals and noise-free frames.
    Oracle,
    /// Ground-truth sub-goals, noisy frames.
    OracleSubgoals,
    /// Planner sub-goals, noise-free frames.
    OraclePerception,
    /// Planner sub-goals and noisy frames.
    Pipeline,
    /// Ground-truth sub-goals executed by teleporting.
    Teleport,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[default]
    Template,
    Remote,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Suite or single-instance file.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Output directory for traces and the report.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModePreset>,
    /// Run the two-agent protocol with this Commander setting.
    #[arg(long)]
    pub setting: Option<CommanderSetting>,
    #[arg(long, value_enum)]
    pub planner: Option<PlannerKind>,
    /// `tcp://host:port` or `cmd:<command>` for the remote planner.
    #[arg(long, env = ENDPOINT_ENV)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long)]
    pub p_drop: Option<f64>,
    #[arg(long)]
    pub p_confuse: Option<f64>,
    #[arg(long)]
    pub depth_sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub exploration: Option<ExplorationArg>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub max_failures: Option<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExplorationArg {
    Frontier,
    Random,
}

#[derive(Args, Debug)]
pub struct RectifyArgs {
    /// Input file; standard input when omitted or `-`.
    pub input: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Class already in hand before the first step.
    #[arg(long)]
    pub held: Option<String>,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Map snapshot (`jarvis-map/1`).
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Trace whose trajectory is re-observed without noise.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Scenario file; the map holds the first view from the start pose.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Layers to write: `obstacle`, `explored` or a class name. Defaults to
    /// both grids and every non-empty class layer.
    #[arg(long = "layer")]
    pub layers: Vec<String>,
    /// Also write the travel-time field toward this class.
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub ascii_factor: usize,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Write the JSON report here as well.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// File configuration. Every key is optional; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Run seed (default 0).
    pub seed: Option<u64>,
    /// Suite or instance file for `run`.
    pub suite: Option<PathBuf>,
    /// Output directory for `run` (default `jarvis-run`).
    pub output: Option<PathBuf>,
    /// Episodes run at once (default 1).
    pub parallel: Option<usize>,
    pub planner: PlannerKind,
    /// Remote planner endpoint; the environment variable wins over it.
    pub endpoint: Option<String>,
    pub mode: RunMode,
    pub limits: Limits,
    pub executor: ExecutorConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        Config::parse(&read(path)?)
    }
}

/// Resolved settings of a `run` invocation.
#[derive(Debug)]
pub struct RunPlan {
    pub suite: PathBuf,
    pub out: PathBuf,
    pub parallel: usize,
    pub config: RunConfig,
    pub planner: PlannerKind,
    pub endpoint: Option<String>,
}

/// Applies flag overrides on top of the file config.
pub fn resolve_run(file: &Config, seed: Option<u64>, a: &RunArgs) -> Result<RunPlan, CliError> {
    let mut mode = file.mode.clone();
    if let Some(p) = a.mode {
        let (sub, per, tele) = match p {
            ModePreset::Oracle => (true, true, false),
            ModePreset::OracleSubgoals => (true, false, false),
            ModePreset::OraclePerception => (false, true, false),
            ModePreset::Pipeline => (false, false, false),
            ModePreset::Teleport => (true, true, true),
        };
        mode.oracle_subgoals = sub;
        mode.oracle_perception = per;
        mode.teleport_executor = tele;
    }
    if a.setting.is_some() {
        mode.commander_setting = a.setting;
    }
    if let Some(v) = a.p_drop {
        mode.noise.p_drop = v;
    }
    if let Some(v) = a.p_confuse {
        mode.noise.p_confuse = v;
    }
    if let Some(v) = a.depth_sigma {
        mode.noise.depth_sigma = v;
    }
    if let Some(e) = a.exploration {
        mode.exploration = match e {
            ExplorationArg::Frontier => Exploration::Frontier,
            ExplorationArg::Random => Exploration::Random,
        };
    }
    mode.noise.validate().map_err(CliError::Config)?;
    let mut limits = file.limits;
    if let Some(v) = a.max_steps {
        limits.max_steps = v;
    }
    if let Some(v) = a.max_failures {
        limits.max_failures = v;
    }
    let suite = a
        .suite
        .clone()
        .or_else(|| file.suite.clone())
        .ok_or_else(|| CliError::Config("no suite given (--suite or `suite` in the config)".into()))?;
    let parallel = a.parallel.or(file.parallel).unwrap_or(1);
    if parallel == 0 {
        return Err(CliError::Config("parallel must be at least 1".into()));
    }
    Ok(RunPlan {
        suite,
        out: a.out.clone().or_else(|| file.output.clone()).unwrap_or_else(|| "jarvis-run".into()),
        parallel,
        config: RunConfig {
            mode,
            limits,
            executor: file.executor,
            seed: seed.or(file.seed).unwrap_or(0),
        },
        planner: a.planner.unwrap_or(file.planner),
        endpoint: a.endpoint.clone().or_else(|| file.endpoint.clone()),
    })
}

/// Builds the planner; a TCP endpoint must accept a connection up front.
pub fn planner_backend(kind: PlannerKind, endpoint: Option<&str>) -> Result<PlannerBackend, CliError> {
    match kind {
        PlannerKind::Template => Ok(PlannerBackend::Template(TemplatePlanner::new(ClassRegistry::kitchen().names()))),
        PlannerKind::Remote => {
            let raw = endpoint
                .ok_or_else(|| CliError::Config(format!("remote planner needs --endpoint or {ENDPOINT_ENV}")))?;
            let ep: RemoteEndpoint = raw.parse().map_err(|e| CliError::Config(format!("{e}")))?;
            if let RemoteEndpoint::Tcp(addr) = &ep {
                let reachable = addr
                    .to_socket_addrs()
                    .ok()
                    .into_iter()
                    .flatten()
                    .any(|sa| TcpStream::connect_timeout(&sa, Duration::from_secs(2)).is_ok());
                if !reachable {
                    return Err(CliError::Config(format!("planner endpoint {raw} is unreachable")));
                }
            }
            Ok(PlannerBackend::Remote(RemotePlanner::new(ep)))
        }
    }
}

/// File name for an instance id.
pub fn trace_file_name(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.jsonl")
}

fn cmd_generate(seed: u64, a: &GenerateArgs) -> Result<(), CliError> {
    let spec = SuiteSpec {
        seed,
        count: a.count,
        tasks: a.tasks.clone(),
        kinds: match a.kinds {
            KindArg::Tfd => KindMix::Tfd,
            KindArg::Edh => KindMix::Edh,
            KindArg::Mixed => KindMix::Mixed,
        },
    };
    let instances = generate_with(&spec).map_err(|e| CliError::Input(e.to_string()))?;
    write(&a.out, Suite::new(seed, instances).to_json())?;
    eprintln!("wrote {} instances to {}", a.count, a.out.display());
    Ok(())
}

fn cmd_run(plan: &RunPlan) -> Result<String, CliError> {
    let suite = Suite::load(&plan.suite).map_err(|e| CliError::Input(format!("{}: {e}", plan.suite.display())))?;
    if suite.instances.is_empty() {
        return Err(CliError::Input(format!("{}: no instances", plan.suite.display())));
    }
    let backend = planner_backend(plan.planner, plan.endpoint.as_deref())?;
    let traces = run_suite(&suite.instances, &plan.config, &backend, plan.parallel);
    let dir = plan.out.join("traces");
    for t in &traces {
        write(&dir.join(trace_file_name(&t.header.instance_id)), t.to_jsonl())?;
    }
    let report = aggregate(&traces.iter().map(|t| (t.header.task, t.metrics.clone())).collect::<Vec<_>>());
    let table = report.table();
    write(&plan.out.join("report.json"), report.to_json())?;
    write(&plan.out.join("report.txt"), &table)?;
    Ok(table)
}

/// Outcome of a replay, for the exit code.
pub enum ReplayOutcome {
    Empty,
    Verified(usize),
    Diverged(TraceError),
}

pub fn replay_file(path: &Path) -> Result<ReplayOutcome, CliError> {
    let text = read(path)?;
    let trace = match EpisodeTrace::parse(&text) {
        Ok(Some(t)) => t,
        Ok(None) => return Ok(ReplayOutcome::Empty),
        Err(e) => return Err(CliError::Input(format!("{}: {e}", path.display()))),
    };
    Ok(match replay(&trace) {
        Ok(n) => ReplayOutcome::Verified(n),
        Err(e) => ReplayOutcome::Diverged(e),
    })
}

fn cmd_rectify(a: &RectifyArgs) -> Result<(), CliError> {
    let text = match a.input.as_deref() {
        Some(p) if p != Path::new("-") => read(p)?,
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(io_err(Path::new("<stdin>")))?;
            s
        }
    };
    let before = parse_subgoals(&text).map_err(|e| CliError::Input(e.to_string()))?;
    let after = rectify_from(&before, &ClassRegistry::kitchen(), a.held.as_deref());
    let mut err = std::io::stderr().lock();
    for line in diff(&before, &after) {
        let _ = writeln!(err, "{line}");
    }
    let out: String = after.iter().map(|g| format!("{g}\n")).collect();
    match &a.out {
        Some(p) => write(p, out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

/// Map built from noise-free views along a trace's trajectory.
pub fn map_from_trace(trace: &EpisodeTrace) -> Result<SemanticMap, CliError> {
    let mut w = trace
        .header
        .scenario
        .clone()
        .into_state()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let mut map = SemanticMap::new(w.agent.cell);
    let look = |w: &WorldState, map: &mut SemanticMap| map.project_frame(&render_clean(w), w.agent);
    look(&w, &mut map);
    for r in &trace.header.history {
        w.apply(r.action);
        look(&w, &mut map);
    }
    for s in trace.steps() {
        if let Some(a) = s.action {
            w.apply(a);
        } else if let Some(g) = &s.teleport {
            w = teleport_execute(&w, g).0;
        }
        look(&w, &mut map);
    }
    Ok(map)
}

/// Map holding the first view of a scenario.
pub fn map_from_scenario(w: &WorldState) -> SemanticMap {
    let mut map = SemanticMap::new(w.agent.cell);
    map.project_frame(&render_clean(w), w.agent);
    map
}

fn cmd_render(a: &RenderArgs) -> Result<Vec<PathBuf>, CliError> {
    if [&a.map, &a.trace, &a.scenario].iter().filter(|s| s.is_some()).count() != 1 {
        return Err(CliError::Input("render-map needs exactly one of --map, --trace, --scenario".into()));
    }
    let (map, registry) = if let Some(p) = &a.map {
        let snap: MapSnapshot =
            serde_json::from_str(&read(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        (snap.into_map().map_err(CliError::Input)?, Arc::new(ClassRegistry::kitchen()))
    } else if let Some(p) = &a.trace {
        let trace = EpisodeTrace::parse(&read(p)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?
            .ok_or_else(|| CliError::Input(format!("{}: empty trace", p.display())))?;
        let reg = trace.header.scenario.clone().into_state().map(|w| w.registry).unwrap_or_else(|_| Arc::new(ClassRegistry::kitchen()));
        (map_from_trace(&trace)?, reg)
    } else {
        let p = a.scenario.as_ref().expect("clap enforces one source");
        let w = Scenario::load(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        (map_from_scenario(&w), w.registry.clone())
    };
    let known = |name: &str| {
        name == "obstacle" || name == "explored" || registry.contains(name) || map.layers.contains_key(name)
    };
    for name in a.layers.iter().chain(a.field.iter()) {
        if !known(name) {
            return Err(CliError::Input(format!("unknown layer `{name}`")));
        }
    }
    let names: Vec<String> = if a.layers.is_empty() {
        ["obstacle", "explored"]
            .into_iter()
            .map(String::from)
            .chain(map.layers.iter().filter(|(_, l)| !l.is_empty()).map(|(k, _)| k.clone()))
            .collect()
    } else {
        a.layers.clone()
    };
    let empty = Default::default();
    let mut written = Vec::new();
    let mut emit = |name: String, bytes: Vec<u8>| -> Result<(), CliError> {
        let path = a.out.join(name);
        write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    for name in names {
        let layer = match name.as_str() {
            "obstacle" => &map.obstacle,
            "explored" => &map.explored,
            class => map.layers.get(class).unwrap_or(&empty),
        };
        emit(format!("{name}.pgm"), layer_pgm(layer))?;
    }
    emit("map.txt".into(), ascii(&map, a.ascii_factor).into_bytes())?;
    emit(
        "map.json".into(),
        serde_json::to_vec(&MapSnapshot::from_map(&map)).expect("snapshot serializes"),
    )?;
    if let Some(class) = &a.field {
        let goals: Vec<_> = map.layers.get(class).map(|l| l.iter().collect()).unwrap_or_default();
        let field = if goals.is_empty() {
            DistanceField::from_grid(0, 0, 0, 0, Vec::new())
        } else {
            fmm_solve(&map, &goals)
        };
        emit("field.pgm".into(), field.to_pgm())?;
    }
    Ok(written)
}

fn trace_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(io_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn cmd_report(a: &ReportArgs) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for p in trace_paths(&a.inputs)? {
        if let Some(t) = EpisodeTrace::parse(&read(&p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))? {
            rows.push((t.header.task, t.metrics));
        }
    }
    if rows.is_empty() {
        return Err(CliError::Input("no traces to aggregate".into()));
    }
    let report = aggregate(&rows);
    if let Some(p) = &a.json {
        write(p, report.to_json())?;
    }
    Ok(report.table())
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    let file = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    match cli.command {
        Command::Generate(a) => cmd_generate(seed, &a)?,
        Command::Run(a) => {
            let plan = resolve_run(&file, cli.seed, &a)?;
            print!("{}", cmd_run(&plan)?);
        }
        Command::Replay { trace } => match replay_file(&trace)? {
            ReplayOutcome::Empty => println!("empty trace, nothing to verify"),
            ReplayOutcome::Verified(n) => println!("verified {n} steps"),
            ReplayOutcome::Diverged(e) => {
                match &e {
                    TraceError::Diverged { step, reason } => eprintln!("diverged at step {step}: {reason}"),
                    other => eprintln!("replay failed: {other}"),
                }
                return Ok(ExitCode::from(1));
            }
        },
        Command::Rectify(a) => cmd_rectify(&a)?,
        Command::RenderMap(a) => {
            for p in cmd_render(&a)? {
                println!("{}", p.display());
            }
        }
        Command::Report(a) => print!("{}", cmd_report(&a)?),
    }
    Ok(ExitCode::SUCCESS)
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
