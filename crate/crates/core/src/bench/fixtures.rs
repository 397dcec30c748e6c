//! Hand-built scenarios used by tests, examples and the CLI.

use super::expert::demonstrate;
use super::instance::{Instance, InstanceKind, INSTANCE_FORMAT};
use crate::goal::TaskType;
use crate::language::templates::{task_template, utterance, TaskParams};
use crate::language::{Dialogue, Player};
use crate::reasoner_task::rectify;
use crate::world::scenario::Scenario;
use crate::world::{AgentPose, Cell, ClassRegistry, Heading, ObjectState, WorldState};

/// A 12×12 walled kitchen (interior cells 1..=10). The agent starts at
/// (6, 6) facing East, two cells from a counter island holding a knife.
///
/// ```text
///   0123456789AB
/// 0 ############
/// 1 #.C.T.K.SF.#   C counter+bread, T toaster, K coffee machine, S sink, F faucet
/// 2 #..........#
/// 3 #.........R#   R fridge (closed, egg inside)
/// 4 #..........#
/// 5 #C.........#   C counter+dirty plate
/// 6 #.....>.I..#   > agent, I counter island+knife
/// 7 #..........#
/// 8 #C........P#   C counter+dirty mug, P plant
/// 9 #..........#
/// A #M...D....B#   M microwave (closed), D dining table+apple, B stove burner+pot
/// B ############
/// ```
pub fn toy_kitchen() -> WorldState {
    let mut w = WorldState::walled(
        12,
        12,
        ClassRegistry::kitchen(),
        AgentPose::new(Cell::new(6, 6), Heading::East),
    );
    let s = ObjectState::default();
    let dirty = ObjectState {
        dirty: true,
        ..s
    };
    let island = w.add_object("CounterTop", Cell::new(8, 6), None, s);
    w.add_object("Knife", Cell::new(8, 6), Some(island), s);
    let c1 = w.add_object("CounterTop", Cell::new(2, 1), None, s);
    w.add_object("Bread", Cell::new(2, 1), Some(c1), s);
    w.add_object("Toaster", Cell::new(4, 1), None, s);
    w.add_object("CoffeeMachine", Cell::new(6, 1), None, s);
    w.add_object("Sink", Cell::new(8, 1), None, s);
    w.add_object("Faucet", Cell::new(9, 1), None, s);
    let fridge = w.add_object("Fridge", Cell::new(10, 3), None, s);
    w.add_object("Egg", Cell::new(10, 3), Some(fridge), s);
    let c2 = w.add_object("CounterTop", Cell::new(1, 5), None, s);
    w.add_object("Plate", Cell::new(1, 5), Some(c2), dirty);
    let c3 = w.add_object("CounterTop", Cell::new(1, 8), None, s);
    w.add_object("Mug", Cell::new(1, 8), Some(c3), dirty);
    w.add_object("Plant", Cell::new(10, 8), None, s);
    w.add_object("Microwave", Cell::new(1, 10), None, s);
    let table = w.add_object("DiningTable", Cell::new(5, 10), None, s);
    w.add_object("Apple", Cell::new(5, 10), Some(table), s);
    let burner = w.add_object("StoveBurner", Cell::new(10, 10), None, s);
    w.add_object("Pot", Cell::new(10, 10), Some(burner), s);
    w.validate().expect("toy kitchen is valid");
    w
}

/// A TfD instance of `task` in the toy kitchen, with the expert's
/// demonstration as reference. None when the kitchen lacks what the task
/// needs.
pub fn toy_instance(task: TaskType) -> Option<Instance> {
    let world = toy_kitchen();
    let params = TaskParams::default_for(task);
    let tt = task_template(task, &params);
    let (reference, _) = demonstrate(&world, &rectify(&tt.program(), &world.registry)).ok()?;
    let mut dialogue = Dialogue::default();
    dialogue.push(Player::Commander, utterance(task, &params));
    let inst = Instance {
        format: INSTANCE_FORMAT.to_string(),
        id: format!("toy-{}", task.name()),
        kind: InstanceKind::Tfd,
        task,
        params,
        scenario: Scenario::from_state(&world),
        dialogue,
        history: Vec::new(),
        reference,
        goal: tt.goal,
    };
    inst.validate().ok()?;
    Some(inst)
}
