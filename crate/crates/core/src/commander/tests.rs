use proptest::prelude::*;

use super::*;
use crate::bench::fixtures::toy_kitchen;
use crate::bench::{generate_instance, InstanceKind, RunMode};
use crate::goal::TaskType;
use crate::world::{ClassRegistry, ObjectState, RAY_COUNT};

fn toast_goal() -> (GoalSpec, TaskParams) {
    let p = TaskParams::default_for(TaskType::MakeToast);
    (task_template(TaskType::MakeToast, &p).goal, p)
}

fn set_flag(w: &mut WorldState, class: &str, f: impl Fn(&mut ObjectState)) {
    let id = w.instances_of(class).next().unwrap().id;
    f(&mut w.objects.get_mut(&id).unwrap().state);
}

#[test]
fn progress_check_examples() {
    let (goal, _) = toast_goal();
    let mut w = toy_kitchen();
    assert_eq!(progress_check(&w, &goal), vec!["plate is clean", "bread is toasted"]);
    set_flag(&mut w, "Plate", |s| s.dirty = false);
    assert_eq!(progress_check(&w, &goal), vec!["bread is toasted"]);
    set_flag(&mut w, "Bread", |s| s.toasted = true);
    assert!(progress_check(&w, &goal).is_empty());
}

#[test]
fn search_object_faucet() {
    let w = toy_kitchen();
    let hint = search_object(&w, "Faucet").unwrap();
    assert!([0, 90, 180, 270].contains(&hint.rotation));
    let pose = hint.to_pose().unwrap();
    assert!(!w.is_blocked(pose.cell));
    assert_eq!(pose.cell.offset(pose.heading.delta()), Cell::new(9, 1));
    assert!(search_object(&w, "Lettuce").is_none());
}

#[test]
fn search_object_resolves_to_container() {
    let w = toy_kitchen();
    let pose = search_object(&w, "Egg").unwrap().to_pose().unwrap();
    assert_eq!(pose.cell.offset(pose.heading.delta()), Cell::new(10, 3));
}

fn corridor() -> WorldState {
    WorldState::walled(7, 5, ClassRegistry::kitchen(), AgentPose::new(Cell::new(1, 2), Heading::East))
}

#[test]
fn select_oid_centered_and_occluded() {
    let mut w = corridor();
    w.add_object("Mug", Cell::new(3, 2), None, ObjectState::default());
    let u = select_oid(&w, "Mug", w.agent).unwrap();
    assert!((u - 0.5).abs() <= 1.0 / RAY_COUNT as f64 + 1e-12, "u = {u}");
    w.add_object("Plant", Cell::new(2, 2), None, ObjectState::default());
    assert_eq!(select_oid(&w, "Mug", w.agent), None);
}

#[test]
fn run_center_example() {
    assert!((run_center(54, 72) - 0.7).abs() < 1e-12);
}

#[test]
fn instruct_examples() {
    let (goal, params) = toast_goal();
    let mut w = toy_kitchen();
    set_flag(&mut w, "Plate", |s| s.dirty = false);
    let pending: Vec<Condition> = pending(&w, &goal).into_iter().cloned().collect();

    let full = instruct(CommanderSetting::FullInfo, &pending, &w, &goal, &params);
    assert_eq!(full.kind, InstructionKind::Interact);
    assert_eq!(full.subgoal(), Some(SubGoal::new(SubGoalAction::Slice, "Bread")));
    assert!(full.pose_hint.is_some() && full.point_hint.is_some());

    let bare = instruct(CommanderSetting::NoSegNoGoalLoc, &pending, &w, &goal, &params);
    assert_eq!(bare.subgoal(), full.subgoal());
    assert!(bare.pose_hint.is_none() && bare.point_hint.is_none());

    let seg = instruct(CommanderSetting::NoSegmentation, &pending, &w, &goal, &params);
    assert!(seg.pose_hint.is_some() && seg.point_hint.is_none());

    assert_eq!(instruct(CommanderSetting::FullInfo, &[], &w, &goal, &params).kind, InstructionKind::Done);
}

#[test]
fn already_sliced_bread_is_not_sliced_again() {
    let (goal, params) = toast_goal();
    let mut w = toy_kitchen();
    set_flag(&mut w, "Plate", |s| s.dirty = false);
    set_flag(&mut w, "Bread", |s| s.sliced = true);
    let pending: Vec<Condition> = pending(&w, &goal).into_iter().cloned().collect();
    let i = instruct(CommanderSetting::FullInfo, &pending, &w, &goal, &params);
    assert_eq!(i.subgoal(), Some(SubGoal::new(SubGoalAction::PickUp, "Bread")));
}

#[test]
fn setting_names_parse() {
    for s in CommanderSetting::ALL {
        assert_eq!(format!("{s:?}").parse::<CommanderSetting>(), Ok(s));
    }
    assert!("partial".parse::<CommanderSetting>().is_err());
}

#[test]
fn pose_hint_round_trip() {
    let p = AgentPose::new(Cell::new(12, 21), Heading::North);
    let h = PoseHint::from_pose(p);
    assert_eq!((h.x, h.y, h.rotation), (3.125, 5.375, 270));
    assert_eq!(h.to_pose(), Some(p));
}

fn oracle_tatc(setting: CommanderSetting) -> RunConfig {
    let mut mode = RunMode::oracle();
    mode.commander_setting = Some(setting);
    RunConfig {
        mode,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn session_reaches_done() {
    for (i, task) in [TaskType::MakeToast, TaskType::PutXOnY, TaskType::MakeCoffee].into_iter().enumerate() {
        let inst = generate_instance(11, i, task, InstanceKind::Tfd).unwrap();
        let t = run_tatc(&inst, &oracle_tatc(CommanderSetting::FullInfo), CommanderSetting::FullInfo);
        let last = t.messages().filter_map(|m| match &m.body {
            MessageBody::Instruction(i) => Some(i.kind),
            _ => None,
        });
        assert_eq!(last.last(), Some(InstructionKind::Done), "{}", inst.id);
        assert_eq!(t.metrics.sr, 1.0, "{}", inst.id);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hints_respect_setting(seed in 0u64..1000, task in 0usize..12, s in 0usize..3, drop in 0usize..3) {
        let setting = CommanderSetting::ALL[s];
        let task = TaskType::ALL[task];
        let inst = generate_instance(seed, 0, task, InstanceKind::Tfd).unwrap();
        let w = inst.initial_state().unwrap();
        let pending: Vec<Condition> = inst.goal.conditions.iter().skip(drop).cloned().collect();
        let i = instruct(setting, &pending, &w, &inst.goal, &inst.params);
        prop_assert!(i.respects(setting));
        prop_assert_eq!(i.kind == InstructionKind::Done, pending.is_empty());
    }

    #[test]
    fn traced_instructions_respect_setting(seed in 0u64..1000, s in 0usize..3) {
        let setting = CommanderSetting::ALL[s];
        let inst = generate_instance(seed, 1, TaskType::PutXOnY, InstanceKind::Tfd).unwrap();
        let t = run_tatc(&inst, &oracle_tatc(setting), setting);
        for m in t.messages() {
            prop_assert_eq!(m.setting, setting);
            if let MessageBody::Instruction(i) = &m.body {
                prop_assert!(i.respects(setting));
            }
        }
    }
}
