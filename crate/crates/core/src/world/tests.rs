use proptest::prelude::*;

use super::scenario::Scenario;
use super::*;
use crate::bench::fixtures::toy_kitchen;
use crate::goal::{Condition, GoalSpec, TaskType};
use crate::language::{SubGoal, SubGoalAction};

#[test]
fn action_text_round_trip() {
    for a in [
        Action::Stop,
        Action::Motion(Motion::PanLeft),
        Action::Interact {
            kind: InteractKind::ToggleOn,
            target_u: 0.25,
        },
    ] {
        assert_eq!(a.to_string().parse::<Action>(), Ok(a));
    }
    assert_eq!("Pickup@0.5".parse::<Action>(), Ok(interact_u(InteractKind::Pickup, 0.5)));
    assert!("Pickup@1.5".parse::<Action>().is_err());
    assert!("Jump".parse::<Action>().is_err());
}

fn interact_u(kind: InteractKind, target_u: f64) -> Action {
    Action::Interact { kind, target_u }
}

fn interact(kind: InteractKind, ray: usize) -> Action {
    Action::Interact {
        kind,
        target_u: u_for_ray_index(ray),
    }
}

fn id_of(w: &WorldState, class: &str) -> ObjectId {
    w.instances_of(class).next().unwrap().id
}

#[test]
fn forward_into_wall_is_blocked() {
    let mut w = toy_kitchen();
    w.agent = AgentPose::new(Cell::new(1, 6), Heading::West);
    let (next, ok, err) = step(&w, Action::Motion(Motion::Forward));
    assert!(!ok);
    assert_eq!(err, Some(ActionError::Blocked));
    assert_eq!(next.agent, w.agent);
    assert_eq!(next.step, w.step + 1);
}

#[test]
fn pan_strafes_and_keeps_heading() {
    let w = toy_kitchen();
    let (next, ok, _) = step(&w, Action::Motion(Motion::PanLeft));
    assert!(ok);
    assert_eq!(next.agent, AgentPose::new(Cell::new(6, 5), Heading::East));
    let (next, _, _) = step(&w, Action::Motion(Motion::TurnRight));
    assert_eq!(next.agent, AgentPose::new(Cell::new(6, 6), Heading::South));
}

#[test]
fn island_rays_split_between_knife_and_counter() {
    // Face at x = 2.0 m, agent center x = 1.625 m: the first sample past
    // 0.375 m along a near-axial ray is k = 8. Rays left of center land on
    // the northern half of the face (slot 0, the knife).
    let w = toy_kitchen();
    let hits = w.cast_rays(w.agent);
    let knife = id_of(&w, "Knife");
    let counter = w.root_at(Cell::new(8, 6)).unwrap();
    assert_eq!(hits[40].instance, Some(knife));
    assert_eq!(hits[40].depth_steps, 8);
    assert_eq!(hits[50].instance, Some(counter));
    assert!(hits.iter().all(|h| h.depth_steps <= MAX_DEPTH_STEPS));
}

#[test]
fn pickup_knife_from_island() {
    let w = toy_kitchen();
    let (next, ok, err) = step(&w, interact(InteractKind::Pickup, 40));
    assert!(ok, "{err:?}");
    assert_eq!(next.held, Some(id_of(&w, "Knife")));
    assert_eq!(next.objects[&id_of(&w, "Knife")].parent, None);
    next.validate().unwrap();
}

#[test]
fn hand_side_errors() {
    let w = toy_kitchen();
    let (_, ok, err) = step(&w, interact(InteractKind::Slice, 40));
    assert!(!ok);
    assert_eq!(err, Some(ActionError::KnifeNotInHand));
    let (_, _, err) = step(&w, interact(InteractKind::Place, 50));
    assert_eq!(err, Some(ActionError::NothingHeld));
    let (held, _, _) = step(&w, interact(InteractKind::Pickup, 40));
    let (_, _, err) = step(&held, interact(InteractKind::Pickup, 50));
    assert_eq!(err, Some(ActionError::HandOccupied));
}

#[test]
fn stop_is_a_no_op() {
    let w = toy_kitchen();
    let (next, ok, err) = step(&w, Action::Stop);
    assert!(ok && err.is_none());
    assert_eq!(next, w);
}

#[test]
fn far_targets_and_empty_rays() {
    let mut w = toy_kitchen();
    // face at 1.125 m
    w.agent = AgentPose::new(Cell::new(3, 6), Heading::East);
    let (_, _, err) = step(&w, interact(InteractKind::Pickup, 40));
    assert_eq!(err, Some(ActionError::TooFar));
    // straight at the bare north wall
    w.agent = AgentPose::new(Cell::new(3, 3), Heading::North);
    let (_, _, err) = step(&w, interact(InteractKind::Open, 45));
    assert_eq!(err, Some(ActionError::ObjectNotFound));
}

#[test]
fn wall_depth_is_quantized_face_distance() {
    // Four cells to the wall face: 3.5 cells = 0.875 m, first sample 0.90 m.
    let mut w = toy_kitchen();
    w.agent = AgentPose::new(Cell::new(4, 4), Heading::West);
    w.objects.clear();
    let hits = w.cast_rays(w.agent);
    for h in &hits[44..=45] {
        assert!(h.wall);
        assert_eq!(h.depth_steps, 18);
        assert_eq!(h.instance, None);
    }
}

#[test]
fn slice_replaces_with_configured_count() {
    let mut w = toy_kitchen();
    w = step(&w, interact(InteractKind::Pickup, 40)).0;
    w.agent = AgentPose::new(Cell::new(2, 2), Heading::North);
    let before = w.objects.len();
    let (next, ok, err) = step(&w, interact(InteractKind::Slice, 40));
    assert!(ok, "{err:?}");
    assert_eq!(next.objects.len(), before - 1 + w.rules.slice_count);
    assert_eq!(next.instances_of("Bread").filter(|b| b.state.sliced).count(), 4);
    // slicing a slice fails
    let (_, _, err) = step(&next, interact(InteractKind::Slice, 40));
    assert_eq!(err, Some(ActionError::NotSliceable));
}

#[test]
fn receptacle_capacity_and_invalid_placement() {
    let mut w = toy_kitchen();
    w.rules.receptacle_capacity = 1;
    w = step(&w, interact(InteractKind::Pickup, 40)).0;
    // island now empty; look at the bread counter which already holds bread
    w.agent = AgentPose::new(Cell::new(2, 2), Heading::North);
    let (_, _, err) = step(&w, interact(InteractKind::Place, 50));
    assert_eq!(err, Some(ActionError::ReceptacleFull));
    // faucet is not a receptacle
    w.agent = AgentPose::new(Cell::new(9, 2), Heading::North);
    let (_, _, err) = step(&w, interact(InteractKind::Place, 45));
    assert_eq!(err, Some(ActionError::InvalidPlacement));
}

#[test]
fn closed_fridge_hides_egg_until_opened() {
    let mut w = toy_kitchen();
    let egg = id_of(&w, "Egg");
    let fridge = id_of(&w, "Fridge");
    assert!(!w.is_observable(egg));
    assert_eq!(w.visible_anchor(egg), Some(fridge));
    w.agent = AgentPose::new(Cell::new(9, 3), Heading::East);
    let (open, ok, _) = step(&w, interact(InteractKind::Open, 45));
    assert!(ok);
    assert!(open.is_observable(egg));
    assert!(open.cast_rays(open.agent).iter().any(|h| h.instance == Some(egg)));
    let (_, _, err) = step(&w, interact(InteractKind::ToggleOn, 45));
    assert_eq!(err, Some(ActionError::NotToggleable));
}

#[test]
fn faucet_washes_and_fills_held_mug() {
    let mut w = toy_kitchen();
    w.agent = AgentPose::new(Cell::new(2, 8), Heading::West);
    let (held, ok, err) = step(&w, interact(InteractKind::Pickup, 55));
    assert!(ok, "{err:?}");
    let mut w = held;
    w.agent = AgentPose::new(Cell::new(9, 2), Heading::North);
    w = step(&w, interact(InteractKind::ToggleOn, 45)).0;
    let mug = &w.objects[&id_of(&w, "Mug")];
    assert!(!mug.state.dirty && mug.state.filled);
    w.agent = AgentPose::new(Cell::new(9, 8), Heading::East);
    let (poured, ok, _) = step(&w, interact(InteractKind::Pour, 45));
    assert!(ok);
    assert!(poured.objects[&id_of(&w, "Plant")].state.filled);
}

#[test]
fn goal_fraction() {
    let w = toy_kitchen();
    let toast = GoalSpec {
        task_type: TaskType::MakeToast,
        conditions: vec![
            Condition::flag("Plate", StateFlag::Dirty, false),
            Condition::flag("Bread", StateFlag::Toasted, true),
        ],
    };
    assert_eq!(goal_conditions_met(&w, &toast), 0.0);
    let mut clean = w.clone();
    let plate = id_of(&w, "Plate");
    clean.objects.get_mut(&plate).unwrap().state.dirty = false;
    assert_eq!(goal_conditions_met(&clean, &toast), 0.5);
    let empty = GoalSpec {
        task_type: TaskType::MakeToast,
        conditions: vec![],
    };
    assert_eq!(goal_conditions_met(&w, &empty), 1.0);
    let three = GoalSpec {
        task_type: TaskType::MakeSalad,
        conditions: vec![
            Condition::flag("Bread", StateFlag::Sliced, true),
            Condition::inside("Egg", "Plate"),
            Condition::flag("Plant", StateFlag::Filled, true),
        ],
    };
    assert_eq!(goal_conditions_met(&w, &three), 0.0);
}

#[test]
fn teleport_examples() {
    let w = toy_kitchen();
    let (next, ok, _) = teleport_execute(&w, &SubGoal::new(SubGoalAction::PickUp, "Knife"));
    assert!(ok);
    assert_eq!(next.held, Some(id_of(&w, "Knife")));
    assert_eq!(next.agent.cell.manhattan(Cell::new(8, 6)), 1);

    let (next, ok, _) = teleport_execute(&w, &SubGoal::nav("Fridge"));
    assert!(ok);
    assert_eq!(next.objects, w.objects);
    assert_eq!(next.agent.cell.manhattan(Cell::new(10, 3)), 1);

    let (_, ok, err) = teleport_execute(&w, &SubGoal::new(SubGoalAction::Slice, "Bread"));
    assert!(!ok);
    assert_eq!(err, Some(ActionError::KnifeNotInHand));

    let (_, ok, err) = teleport_execute(&w, &SubGoal::new(SubGoalAction::PickUp, "Spoon"));
    assert!(!ok);
    assert_eq!(err, Some(ActionError::ObjectNotFound));
}

#[test]
fn scenario_round_trip() {
    let w = toy_kitchen();
    let text = Scenario::from_state(&w).to_json();
    let back: Scenario = serde_json::from_str(&text).unwrap();
    let w2 = back.into_state().unwrap();
    assert_eq!(w2.state_hash(), w.state_hash());
    assert_eq!(w2.objects, w.objects);
}

#[test]
fn scenario_rejects_bad_format_and_unknown_fields() {
    let w = toy_kitchen();
    let mut s = Scenario::from_state(&w);
    s.format = "other/9".into();
    assert!(s.into_state().is_err());
    let mut v: serde_json::Value = serde_json::from_str(&Scenario::from_state(&w).to_json()).unwrap();
    v["bogus"] = serde_json::json!(1);
    assert!(serde_json::from_value::<Scenario>(v).is_err());
}

fn arb_action() -> impl Strategy<Value = Action> {
    prop_oneof![
        3 => (0..6usize).prop_map(|i| Action::Motion(Motion::ALL[i])),
        2 => (0..8usize, 0.0..=1.0f64).prop_map(|(k, u)| Action::Interact {
            kind: InteractKind::ALL[k],
            target_u: u,
        }),
        1 => Just(Action::Stop),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_properties(actions in prop::collection::vec(arb_action(), 1..80)) {
        let mut w = toy_kitchen();
        let mut replay = toy_kitchen();
        for a in actions {
            let (next, ok, err) = step(&w, a);
            // failure totality
            prop_assert_eq!(ok, err.is_none());
            // determinism
            let (again, ok2, err2) = step(&w, a);
            prop_assert_eq!(&again, &next);
            prop_assert_eq!((ok, err), (ok2, err2));
            // conservation: only slicing changes the object count
            let sliced_before = w.objects.values().filter(|o| o.state.sliced).count();
            let sliced_after = next.objects.values().filter(|o| o.state.sliced).count();
            if next.objects.len() != w.objects.len() {
                let sliced = matches!(a, Action::Interact { kind: InteractKind::Slice, .. });
                prop_assert!(sliced);
                prop_assert_eq!(next.objects.len(), w.objects.len() + w.rules.slice_count - 1);
            }
            // sliced never unset on surviving instances
            for (id, o) in &w.objects {
                if let Some(n) = next.objects.get(id) {
                    prop_assert!(!o.state.sliced || n.state.sliced);
                }
            }
            prop_assert!(sliced_after >= sliced_before);
            if !ok {
                prop_assert_eq!(&next.objects, &w.objects);
                prop_assert_eq!(next.held, w.held);
            }
            prop_assert!(next.validate().is_ok());
            replay.apply(a);
            prop_assert_eq!(replay.state_hash(), next.state_hash());
            w = next;
        }
    }
}
