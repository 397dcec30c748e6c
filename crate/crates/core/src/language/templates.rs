//! Task templates shared by the template planner, the Commander and the
//! suite generator: utterances, goal conditions, and the canonical sub-goal
//! fragment that achieves each condition.

use serde::{Deserialize, Serialize};

use super::{spoken_name, SubGoal, SubGoalAction};
use crate::goal::{Condition, GoalSpec, TaskType};
use crate::world::StateFlag;

use SubGoalAction::*;

/// Free parameters of a task type. Unused fields are ignored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskParams {
    pub x: String,
    pub y: String,
    pub n: u32,
}

impl TaskParams {
    pub fn new(x: &str, y: &str, n: u32) -> Self {
        TaskParams {
            x: x.to_string(),
            y: y.to_string(),
            n,
        }
    }

    /// Parameters used when an utterance leaves them unspecified.
    pub fn default_for(task: TaskType) -> Self {
        match task {
            TaskType::CleanX => TaskParams::new("Plate", "", 1),
            TaskType::AllXOnY => TaskParams::new("Fork", "DiningTable", 2),
            TaskType::BoilX => TaskParams::new("Potato", "", 1),
            TaskType::NSlicesOfX => TaskParams::new("Tomato", "", 2),
            TaskType::PutXOnY => TaskParams::new("Apple", "Plate", 1),
            TaskType::CookX => TaskParams::new("Potato", "", 1),
            _ => TaskParams::new("", "", 1),
        }
    }
}

/// Goal conditions plus, for each condition, the interactions achieving it.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskTemplate {
    pub goal: GoalSpec,
    pub fragments: Vec<Vec<SubGoal>>,
}

impl TaskTemplate {
    /// Interaction-only program: the fragments concatenated.
    pub fn interactions(&self) -> Vec<SubGoal> {
        self.fragments.iter().flatten().cloned().collect()
    }

    /// Program with a Navigate before each change of interaction target.
    pub fn program(&self) -> Vec<SubGoal> {
        with_navigation(&self.interactions())
    }
}

fn sg(action: SubGoalAction, target: &str) -> SubGoal {
    SubGoal::new(action, target)
}

fn toggle(target: &str) -> [SubGoal; 2] {
    [sg(ToggleOn, target), sg(ToggleOff, target)]
}

fn wash(x: &str) -> Vec<SubGoal> {
    let mut v = vec![sg(PickUp, x)];
    v.extend(toggle("Faucet"));
    v
}

fn toast_bread(slices: u32) -> Vec<SubGoal> {
    let mut v = vec![sg(Slice, "Bread")];
    for _ in 0..slices {
        v.push(sg(PickUp, "Bread"));
        v.push(sg(Place, "Toaster"));
    }
    v.extend(toggle("Toaster"));
    v
}

fn coffee() -> (Vec<Condition>, Vec<Vec<SubGoal>>) {
    (
        vec![
            Condition::inside("Mug", "CoffeeMachine"),
            Condition::flag("Mug", StateFlag::Filled, true),
        ],
        vec![
            vec![sg(PickUp, "Mug"), sg(Place, "CoffeeMachine")],
            toggle("CoffeeMachine").to_vec(),
        ],
    )
}

fn put_n(x: &str, y: &str, n: u32) -> Vec<SubGoal> {
    (0..n.max(1))
        .flat_map(|_| [sg(PickUp, x), sg(Place, y)])
        .collect()
}

pub fn task_template(task: TaskType, p: &TaskParams) -> TaskTemplate {
    let (x, y, n) = (p.x.as_str(), p.y.as_str(), p.n.max(1));
    let (conditions, fragments): (Vec<Condition>, Vec<Vec<SubGoal>>) = match task {
        TaskType::WaterPlant => (
            vec![Condition::flag("Plant", StateFlag::Filled, true)],
            vec![{
                let mut v = wash("Mug");
                v.push(sg(Pour, "Plant"));
                v
            }],
        ),
        TaskType::MakeCoffee => coffee(),
        TaskType::CleanX => (vec![Condition::flag(x, StateFlag::Dirty, false)], vec![wash(x)]),
        TaskType::AllXOnY => (vec![Condition::inside(x, y).times(n)], vec![put_n(x, y, n)]),
        TaskType::BoilX => (
            vec![
                Condition::flag("Pot", StateFlag::Filled, true),
                Condition::flag(x, StateFlag::Cooked, true),
            ],
            vec![
                {
                    let mut v = wash("Pot");
                    v.push(sg(Place, "StoveBurner"));
                    v
                },
                {
                    let mut v = vec![sg(PickUp, x), sg(Place, "Pot")];
                    v.extend(toggle("StoveBurner"));
                    v
                },
            ],
        ),
        TaskType::MakeToast => (
            vec![
                Condition::flag("Plate", StateFlag::Dirty, false),
                Condition::flag("Bread", StateFlag::Toasted, true),
            ],
            vec![
                {
                    let mut v = wash("Plate");
                    v.push(sg(Place, "CounterTop"));
                    v
                },
                toast_bread(1),
            ],
        ),
        TaskType::NSlicesOfX => (
            vec![
                Condition::flag(x, StateFlag::Sliced, true),
                Condition::inside(x, "Plate").times(n),
            ],
            vec![vec![sg(Slice, x)], put_n(x, "Plate", n)],
        ),
        TaskType::PutXOnY => (vec![Condition::inside(x, y)], vec![put_n(x, y, 1)]),
        TaskType::CookX => (
            vec![Condition::flag(x, StateFlag::Cooked, true)],
            vec![{
                let mut v = vec![
                    sg(PickUp, x),
                    sg(Open, "Microwave"),
                    sg(Place, "Microwave"),
                    sg(Close, "Microwave"),
                ];
                v.extend(toggle("Microwave"));
                v
            }],
        ),
        TaskType::MakeSandwich => (
            vec![
                Condition::flag("Bread", StateFlag::Toasted, true).times(2),
                Condition::flag("Lettuce", StateFlag::Sliced, true),
                Condition::inside("Lettuce", "Plate"),
            ],
            vec![
                toast_bread(2),
                vec![sg(Slice, "Lettuce")],
                put_n("Lettuce", "Plate", 1),
            ],
        ),
        TaskType::MakeSalad => (
            vec![
                Condition::flag("Lettuce", StateFlag::Sliced, true),
                Condition::flag("Tomato", StateFlag::Sliced, true),
                Condition::inside("Lettuce", "Plate"),
                Condition::inside("Tomato", "Plate"),
            ],
            vec![
                vec![sg(Slice, "Lettuce")],
                vec![sg(Slice, "Tomato")],
                put_n("Lettuce", "Plate", 1),
                put_n("Tomato", "Plate", 1),
            ],
        ),
        TaskType::MakeBreakfast => {
            let (mut c, mut f) = coffee();
            c.push(Condition::flag("Bread", StateFlag::Toasted, true));
            f.push(toast_bread(1));
            (c, f)
        }
    };
    TaskTemplate {
        goal: GoalSpec {
            task_type: task,
            conditions,
        },
        fragments,
    }
}

/// Inserts a Navigate before every interaction whose target differs from the
/// previous interaction's target. Existing Navigates are dropped first.
pub fn with_navigation(seq: &[SubGoal]) -> Vec<SubGoal> {
    let mut out = Vec::new();
    let mut last: Option<&str> = None;
    for g in seq.iter().filter(|g| !g.action.is_navigate()) {
        if last != Some(g.target.as_str()) {
            out.push(SubGoal::nav(g.target.clone()));
        }
        out.push(g.clone());
        last = Some(g.target.as_str());
    }
    out
}

fn plural(class: &str) -> String {
    let s = spoken_name(class);
    if s.ends_with('o') || s.ends_with('h') {
        format!("{s}es")
    } else {
        format!("{s}s")
    }
}

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

fn number_word(n: u32) -> String {
    NUMBER_WORDS
        .get(n as usize)
        .map(|w| w.to_string())
        .unwrap_or_else(|| n.to_string())
}

/// The Commander's opening instruction for a task.
pub fn utterance(task: TaskType, p: &TaskParams) -> String {
    let x = spoken_name(&p.x);
    let y = spoken_name(&p.y);
    match task {
        TaskType::WaterPlant => "water the plant".into(),
        TaskType::MakeCoffee => "make a cup of coffee".into(),
        TaskType::CleanX => format!("clean the {x}"),
        TaskType::AllXOnY => format!(
            "put all the {} on the {y}, there are {}",
            plural(&p.x),
            number_word(p.n)
        ),
        TaskType::BoilX => format!("boil a {x}"),
        TaskType::MakeToast => "make a plate of toast".into(),
        TaskType::NSlicesOfX => format!("serve {} slices of {x} on a plate", number_word(p.n)),
        TaskType::PutXOnY => format!("put the {x} on the {y}"),
        TaskType::CookX => format!("cook a {x}"),
        TaskType::MakeSandwich => "make a sandwich".into(),
        TaskType::MakeSalad => "make a salad".into(),
        TaskType::MakeBreakfast => "make breakfast with coffee and toast".into(),
    }
}

/// What the template planner understood from one utterance.
#[derive(Clone, Debug, PartialEq)]
pub enum Parsed {
    Task(TaskType, TaskParams),
    /// A bare "slice the X" request.
    Slice(String),
}

fn normalize(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let words: Vec<&str> = cleaned.split_whitespace().collect();
    format!(" {} ", words.join(" "))
}

/// Class mentions in order of appearance; longer names win overlaps.
fn class_mentions(text: &str, classes: &[&str]) -> Vec<String> {
    let mut forms: Vec<(String, &str)> = classes
        .iter()
        .flat_map(|c| [(format!(" {} ", spoken_name(c)), *c), (format!(" {} ", plural(c)), *c)])
        .collect();
    forms.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
    let mut taken = vec![false; text.len()];
    let mut found: Vec<(usize, String)> = Vec::new();
    for (form, class) in &forms {
        let mut start = 0;
        while let Some(pos) = text[start..].find(form.as_str()) {
            let at = start + pos;
            // inner span excludes the padding spaces
            let span = at + 1..at + form.len() - 1;
            if !taken[span.clone()].iter().any(|t| *t) {
                taken[span].iter_mut().for_each(|t| *t = true);
                found.push((at, class.to_string()));
            }
            start = at + 1;
        }
    }
    found.sort();
    found.into_iter().map(|(_, c)| c).collect()
}

fn count_in(text: &str) -> Option<u32> {
    text.split_whitespace().find_map(|w| {
        NUMBER_WORDS
            .iter()
            .position(|n| *n == w)
            .map(|i| i as u32)
            .or_else(|| w.parse().ok())
    })
}

/// Matches an utterance against the rule table. Rules are tried in a fixed
/// order so that compound tasks claim their keywords first.
pub fn parse_utterance(utterance: &str, classes: &[&str]) -> Option<Parsed> {
    let text = normalize(utterance);
    let has = |k: &str| text.contains(&format!(" {k} "));
    let mentions = class_mentions(&text, classes);
    let first = |skip: usize| mentions.get(skip).cloned();
    let task = |t: TaskType, x: Option<String>, y: Option<String>, n: Option<u32>| {
        let d = TaskParams::default_for(t);
        Some(Parsed::Task(
            t,
            TaskParams {
                x: x.unwrap_or(d.x),
                y: y.unwrap_or(d.y),
                n: n.unwrap_or(d.n),
            },
        ))
    };
    if has("breakfast") {
        return task(TaskType::MakeBreakfast, None, None, None);
    }
    if has("sandwich") {
        return task(TaskType::MakeSandwich, None, None, None);
    }
    if has("salad") {
        return task(TaskType::MakeSalad, None, None, None);
    }
    if has("slices of") {
        let x = mentions.iter().find(|c| c.as_str() != "Plate").cloned();
        return task(TaskType::NSlicesOfX, x, None, count_in(&text));
    }
    if has("toast") {
        return task(TaskType::MakeToast, None, None, None);
    }
    if has("coffee") {
        return task(TaskType::MakeCoffee, None, None, None);
    }
    if has("water the plant") || has("water") {
        return task(TaskType::WaterPlant, None, None, None);
    }
    if has("boil") {
        return task(TaskType::BoilX, first(0), None, None);
    }
    if has("cook") {
        return task(TaskType::CookX, first(0), None, None);
    }
    if has("clean") {
        return task(TaskType::CleanX, first(0), None, None);
    }
    if has("all the") {
        if mentions.len() < 2 {
            return None;
        }
        return task(TaskType::AllXOnY, first(0), first(1), count_in(&text));
    }
    if has("put") {
        if mentions.len() < 2 {
            return None;
        }
        return task(TaskType::PutXOnY, first(0), first(1), None);
    }
    if has("slice") {
        return first(0).map(Parsed::Slice);
    }
    None
}
