use std::path::Path;
use std::process::{Command, Output};

use jarvis_core::bench::fixtures::{toy_instance, toy_kitchen};
use jarvis_core::bench::trace::TraceEvent;
use jarvis_core::bench::{EpisodeTrace, Suite};
use jarvis_core::goal::TaskType;
use jarvis_core::perception::{MapSnapshot, Patch, SemanticMap, MAP_SIZE};
use jarvis_core::reasoner_action::UNREACHABLE_GRAY;
use jarvis_core::world::scenario::Scenario;
use jarvis_core::world::{Action, Cell, Motion};

fn jarvis(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jarvis"))
        .current_dir(dir)
        .env_remove("JARVIS_PLANNER_ENDPOINT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

/// Pixels of a binary PGM written by the renderer.
fn pgm_pixels(bytes: &[u8]) -> &[u8] {
    let header = format!("P5\n{MAP_SIZE} {MAP_SIZE}\n255\n");
    assert!(bytes.starts_with(header.as_bytes()));
    let px = &bytes[header.len()..];
    assert_eq!(px.len(), MAP_SIZE * MAP_SIZE);
    px
}

fn toy_suite(dir: &Path) {
    let insts = [TaskType::MakeToast, TaskType::WaterPlant, TaskType::MakeCoffee]
        .into_iter()
        .filter_map(toy_instance)
        .collect();
    std::fs::write(dir.join("s.json"), Suite::new(0, insts).to_json()).unwrap();
}

#[test]
fn run_is_deterministic_and_parallel_invariant() {
    let d = tempfile::tempdir().unwrap();
    toy_suite(d.path());
    for (out, par) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let o = jarvis(d.path(), &["--seed", "1", "run", "--suite", "s.json", "--mode", "oracle", "--parallel", par, "-o", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = read(d.path().join("a/report.json"));
    assert_eq!(a, read(d.path().join("b/report.json")));
    assert_eq!(a, read(d.path().join("c/report.json")));
    let t = d.path().join("a/traces/toy-MakeToast.jsonl");
    assert_eq!(read(&t), read(d.path().join("c/traces/toy-MakeToast.jsonl")));
}

#[test]
fn benchmark_failures_still_exit_zero() {
    let d = tempfile::tempdir().unwrap();
    toy_suite(d.path());
    let o = jarvis(d.path(), &["run", "--suite", "s.json", "--mode", "pipeline", "--max-steps", "3", "-o", "r"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("all"));
}

#[test]
fn malformed_instance_names_the_field() {
    let d = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&toy_instance(TaskType::MakeToast).unwrap().to_json()).unwrap();
    v.as_object_mut().unwrap().remove("goal");
    std::fs::write(d.path().join("bad.json"), v.to_string()).unwrap();
    let o = jarvis(d.path(), &["run", "--suite", "bad.json", "-o", "r"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("goal"), "{}", stderr(&o));
    let o = jarvis(d.path(), &["run", "--suite", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let d = tempfile::tempdir().unwrap();
    toy_suite(d.path());
    std::fs::write(d.path().join("bad.toml"), "seed = 1\ncolour = 2\n").unwrap();
    let o = jarvis(d.path(), &["--config", "bad.toml", "run", "--suite", "s.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));

    std::fs::write(
        d.path().join("c.toml"),
        "seed = 4\nsuite = \"s.json\"\noutput = \"from-file\"\n[mode]\noracle_subgoals = true\noracle_perception = true\n",
    )
    .unwrap();
    assert!(jarvis(d.path(), &["--config", "c.toml", "run"]).status.success());
    assert!(jarvis(d.path(), &["--config", "c.toml", "--seed", "9", "run", "-o", "flag"]).status.success());
    let seed_of = |dir: &str| {
        let t = EpisodeTrace::parse(&String::from_utf8(read(d.path().join(dir).join("traces/toy-MakeToast.jsonl"))).unwrap())
            .unwrap()
            .unwrap();
        t.header.config.seed
    };
    assert_eq!(seed_of("from-file"), 4);
    assert_eq!(seed_of("flag"), 9);
}

#[test]
fn unreachable_remote_planner_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    toy_suite(d.path());
    let free = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = free.local_addr().unwrap();
    drop(free);
    let o = Command::new(env!("CARGO_BIN_EXE_jarvis"))
        .current_dir(d.path())
        .env("JARVIS_PLANNER_ENDPOINT", format!("tcp://{addr}"))
        .args(["run", "--suite", "s.json", "--planner", "remote"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unreachable"), "{}", stderr(&o));
}

#[test]
fn generate_is_seeded() {
    let d = tempfile::tempdir().unwrap();
    for f in ["a.json", "b.json"] {
        let o = jarvis(d.path(), &["--seed", "7", "generate", "--count", "3", "--tasks", "MakeToast,CookX", "-o", f]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read(d.path().join("a.json")), read(d.path().join("b.json")));
    let s = Suite::load(&d.path().join("a.json")).unwrap();
    assert_eq!(s.instances.len(), 3);
    assert_eq!(s.instances[1].task, TaskType::CookX);
}

#[test]
fn replay_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    toy_suite(d.path());
    assert!(jarvis(d.path(), &["run", "--suite", "s.json", "--mode", "oracle", "-o", "r"]).status.success());
    let path = d.path().join("r/traces/toy-MakeToast.jsonl");
    let o = jarvis(d.path(), &["replay", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("verified"));

    let mut t = EpisodeTrace::parse(&String::from_utf8(read(&path)).unwrap()).unwrap().unwrap();
    let k = t
        .events
        .iter()
        .position(|e| matches!(e, TraceEvent::Step(s) if s.t == 2))
        .unwrap();
    if let TraceEvent::Step(s) = &mut t.events[k] {
        s.action = Some(match s.action {
            Some(Action::Motion(Motion::TurnLeft)) => Action::Motion(Motion::TurnRight),
            _ => Action::Motion(Motion::TurnLeft),
        });
    }
    std::fs::write(d.path().join("bad.jsonl"), t.to_jsonl()).unwrap();
    let o = jarvis(d.path(), &["replay", "bad.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("step 2"), "{}", stderr(&o));

    std::fs::write(d.path().join("empty.jsonl"), "").unwrap();
    assert!(jarvis(d.path(), &["replay", "empty.jsonl"]).status.success());
}

#[test]
fn rectify_succeeds_with_edits() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("g.txt"), "Place Plate\nSlice Bread\n").unwrap();
    let o = jarvis(d.path(), &["rectify", "g.txt"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(out.contains("PickUp Knife"));
    assert!(!out.contains("Place Plate"));
    assert!(stderr(&o).contains("+ PickUp Knife"));
    assert!(stderr(&o).contains("- Place Plate"));
    let o = jarvis(d.path(), &["rectify", "--held", "Mug", "g.txt", "-o", "r.txt"]);
    assert!(o.status.success());
    assert!(String::from_utf8(read(d.path().join("r.txt"))).unwrap().starts_with("Navigate Plate\nPlace Plate\n"));
}

#[test]
fn scenario_obstacles_are_walls_or_furniture() {
    let d = tempfile::tempdir().unwrap();
    let w = toy_kitchen();
    std::fs::write(d.path().join("k.json"), Scenario::from_state(&w).to_json()).unwrap();
    let o = jarvis(d.path(), &["render-map", "--scenario", "k.json", "-o", "m", "--layer", "obstacle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let map = SemanticMap::new(w.agent.cell);
    let img = read(d.path().join("m/obstacle.pgm"));
    let px = pgm_pixels(&img);
    let mut set = 0;
    for (i, v) in px.iter().enumerate() {
        if *v == 255 {
            set += 1;
            let c = map.patch_cell(Patch::from_index(i));
            assert!(w.is_blocked(c), "obstacle patch in free cell {c:?}");
        } else {
            assert_eq!(*v, 0);
        }
    }
    assert!(set > 0);
    let txt = String::from_utf8(read(d.path().join("m/map.txt"))).unwrap();
    assert_eq!(txt.lines().count(), 60);
    assert!(txt.lines().all(|l| l.chars().count() == 60));
}

#[test]
fn enclosed_goal_leaves_the_rest_at_the_sentinel() {
    let d = tempfile::tempdir().unwrap();
    let mut m = SemanticMap::new(Cell::new(0, 0));
    let g = Patch::new(100, 100);
    for dx in -2..=2 {
        for dy in -2..=2 {
            if i32::max(i32::abs(dx), i32::abs(dy)) == 2 {
                m.obstacle.set(Patch::new(g.x + dx, g.y + dy), true);
            }
        }
    }
    let mut snap = MapSnapshot::from_map(&m);
    snap.layers.insert("Apple".into(), vec![g.index() as u32]);
    std::fs::write(d.path().join("m.json"), serde_json::to_string(&snap).unwrap()).unwrap();
    let o = jarvis(d.path(), &["render-map", "--map", "m.json", "-o", "out", "--field", "Apple"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let img = read(d.path().join("out/field.pgm"));
    let px = pgm_pixels(&img);
    assert_eq!(px[g.index()], 255);
    assert!(px[Patch::new(g.x + 1, g.y).index()] > UNREACHABLE_GRAY);
    assert_eq!(px[Patch::new(10, 10).index()], UNREACHABLE_GRAY);
    assert_eq!(px[Patch::new(g.x + 3, g.y).index()], UNREACHABLE_GRAY);

    let o = jarvis(d.path(), &["render-map", "--map", "m.json", "-o", "out", "--field", "Unicorn"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Unicorn"));
}

#[test]
fn report_reaggregates_traces() {
    let d = tempfile::tempdir().unwrap();
    toy_suite(d.path());
    assert!(jarvis(d.path(), &["run", "--suite", "s.json", "--mode", "oracle", "-o", "r"]).status.success());
    let o = jarvis(d.path(), &["report", "r/traces", "--json", "again.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(d.path().join("again.json")), read(d.path().join("r/report.json")));
    assert_eq!(o.stdout, read(d.path().join("r/report.txt")));
    assert_eq!(jarvis(d.path(), &["report", "nothing"]).status.code(), Some(2));
}
