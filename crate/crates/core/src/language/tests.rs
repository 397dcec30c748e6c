use proptest::prelude::*;

use super::protocol::{PlannerRequest, PlannerResponse};
use super::*;
use crate::world::{Motion, ClassRegistry};

fn g(a: SubGoalAction, t: &str) -> SubGoal {
    SubGoal::new(a, t)
}

fn com(u: &str) -> Dialogue {
    Dialogue::new(vec![Turn {
        player: Player::Commander,
        utterance: u.into(),
    }])
    .unwrap()
}

#[test]
fn motions_collapse_into_navigate() {
    let h = vec![
        RecordedAction::motion(Motion::Forward),
        RecordedAction::motion(Motion::TurnLeft),
        RecordedAction::interact(InteractKind::Pickup, 0.5, "Cup"),
    ];
    assert_eq!(
        actions_to_subgoals(&h),
        vec![SubGoal::nav("Cup"), g(SubGoalAction::PickUp, "Cup")]
    );
}

#[test]
fn interactions_without_motion_map_directly() {
    let h = vec![
        RecordedAction::interact(InteractKind::Pickup, 0.5, "Cup"),
        RecordedAction::interact(InteractKind::Place, 0.5, "Sink"),
    ];
    assert_eq!(
        actions_to_subgoals(&h),
        vec![g(SubGoalAction::PickUp, "Cup"), g(SubGoalAction::Place, "Sink")]
    );
}

#[test]
fn trailing_motions_dropped() {
    let h = vec![
        RecordedAction::motion(Motion::Forward),
        RecordedAction::motion(Motion::Forward),
    ];
    assert!(actions_to_subgoals(&h).is_empty());
}

#[test]
fn serialize_golden() {
    assert_eq!(serialize(&com("slice bread"), &[]), "<COM> slice bread <HIS>");
    assert_eq!(serialize(&Dialogue::default(), &[]), "<HIS>");
    let s = serialize(&com("slice bread"), &[g(SubGoalAction::PickUp, "Knife")]);
    assert!(s.ends_with("<HIS> PickUp Knife"), "{s}");
}

#[test]
fn dialogue_rejects_empty_and_reserved() {
    let bad = Dialogue::new(vec![Turn {
        player: Player::Follower,
        utterance: "  ".into(),
    }]);
    assert_eq!(bad, Err(LanguageError::EmptyUtterance(0)));
    let bad = Dialogue::new(vec![Turn {
        player: Player::Follower,
        utterance: "hi <HIS>".into(),
    }]);
    assert_eq!(bad, Err(LanguageError::ReservedToken(0)));
}

#[test]
fn subgoal_text_grammar() {
    let seq = parse_subgoals("PickUp Knife\nSlice Bread").unwrap();
    assert_eq!(seq, vec![g(SubGoalAction::PickUp, "Knife"), g(SubGoalAction::Slice, "Bread")]);
    assert_eq!(format_subgoals(&seq), "PickUp Knife Slice Bread");
    assert!(matches!(parse_subgoals("Grab Knife"), Err(LanguageError::UnknownAction(_))));
    assert!(matches!(parse_subgoals("PickUp"), Err(LanguageError::MissingTarget(_))));
}

#[test]
fn spoken_names() {
    assert_eq!(spoken_name("CounterTop"), "counter top");
    assert_eq!(spoken_name("Mug"), "mug");
}

fn template() -> TemplatePlanner {
    let r = ClassRegistry::kitchen();
    TemplatePlanner::new(r.names())
}

#[test]
fn template_water_plant() {
    let p = plan(&com("water the plant"), &[], &PlannerBackend::Template(template())).unwrap();
    use SubGoalAction::*;
    assert_eq!(
        p,
        vec![
            g(Navigate, "Mug"),
            g(PickUp, "Mug"),
            g(Navigate, "Faucet"),
            g(ToggleOn, "Faucet"),
            g(ToggleOff, "Faucet"),
            g(Navigate, "Plant"),
            g(Pour, "Plant"),
        ]
    );
}

#[test]
fn template_history_subtraction() {
    let t = template();
    let d = com("water the plant");
    let full = t.plan(&d, &[]).unwrap();
    assert!(t.plan(&d, &full).unwrap().is_empty());
    let rest = t.plan(&d, &full[..2]).unwrap();
    assert_eq!(rest.first(), Some(&SubGoal::nav("Faucet")));
    assert_eq!(rest.len(), 5);
}

#[test]
fn template_unknown_is_empty() {
    assert!(template().plan(&com("sing a song"), &[]).unwrap().is_empty());
}

#[test]
fn oracle_backend_returns_future() {
    let fut = vec![g(SubGoalAction::Slice, "Bread")];
    let b = PlannerBackend::Oracle(OraclePlanner { future: fut.clone() });
    assert_eq!(plan(&Dialogue::default(), &[], &b).unwrap(), fut);
}

#[test]
fn endpoint_parsing() {
    assert_eq!(
        "tcp://127.0.0.1:9000".parse::<RemoteEndpoint>(),
        Ok(RemoteEndpoint::Tcp("127.0.0.1:9000".into()))
    );
    assert_eq!(
        "cmd: cat".parse::<RemoteEndpoint>(),
        Ok(RemoteEndpoint::Command("cat".into()))
    );
    assert!("http://x".parse::<RemoteEndpoint>().is_err());
}

#[test]
fn remote_over_subprocess() {
    let reply = PlannerResponse {
        subgoals: vec![g(SubGoalAction::PickUp, "Mug")],
    }
    .to_line();
    let cmd = format!("read line; printf '%s\\n' '{}'", reply.trim());
    let p = RemotePlanner::new(RemoteEndpoint::Command(cmd));
    assert_eq!(p.plan(&com("hi"), &[]).unwrap(), vec![g(SubGoalAction::PickUp, "Mug")]);
}

#[test]
fn remote_timeout_and_garbage() {
    let mut p = RemotePlanner::new(RemoteEndpoint::Command("sleep 5".into()));
    p.timeout = std::time::Duration::from_millis(100);
    assert!(matches!(p.plan(&com("hi"), &[]), Err(PlannerError::Timeout(_))));
    let p = RemotePlanner::new(RemoteEndpoint::Command("read l; echo nope".into()));
    assert!(matches!(p.plan(&com("hi"), &[]), Err(PlannerError::Parse(_))));
}

#[test]
fn remote_over_tcp() {
    use std::io::{BufRead, BufReader, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        let (s, _) = listener.accept().unwrap();
        let mut line = String::new();
        BufReader::new(s.try_clone().unwrap()).read_line(&mut line).unwrap();
        let req = PlannerRequest::parse(&line).unwrap();
        let resp = PlannerResponse {
            subgoals: req.history,
        };
        (&s).write_all(resp.to_line().as_bytes()).unwrap();
    });
    let p = RemotePlanner::new(RemoteEndpoint::Tcp(addr.to_string()));
    let hist = vec![g(SubGoalAction::Open, "Fridge")];
    assert_eq!(p.plan(&com("hi"), &hist).unwrap(), hist);
    server.join().unwrap();
}

fn arb_subgoal() -> impl Strategy<Value = SubGoal> {
    let classes = ["Knife", "Bread", "CounterTop", "Mug", "Fridge"];
    (0..SubGoalAction::ALL.len(), 0..classes.len())
        .prop_map(move |(a, c)| SubGoal::new(SubGoalAction::ALL[a], classes[c]))
}

fn arb_dialogue() -> impl Strategy<Value = Dialogue> {
    prop::collection::vec((any::<bool>(), "[a-z]{1,6}( [a-z]{1,6}){0,4}"), 0..5).prop_map(|v| Dialogue {
        turns: v
            .into_iter()
            .map(|(c, u)| Turn {
                player: if c { Player::Commander } else { Player::Follower },
                utterance: u,
            })
            .collect(),
    })
}

fn arb_recorded() -> impl Strategy<Value = RecordedAction> {
    prop_oneof![
        (0..6usize).prop_map(|i| RecordedAction::motion(Motion::ALL[i])),
        (0..8usize, 0..3usize).prop_map(|(k, c)| RecordedAction::interact(
            InteractKind::ALL[k],
            0.5,
            ["Cup", "Sink", "Knife"][c]
        )),
    ]
}

proptest! {
    #[test]
    fn request_response_round_trip(d in arb_dialogue(), h in prop::collection::vec(arb_subgoal(), 0..8)) {
        let req = PlannerRequest { dialogue: d.clone(), history: h.clone() };
        prop_assert_eq!(PlannerRequest::parse(&req.to_line()).unwrap(), req);
        let resp = PlannerResponse { subgoals: h.clone() };
        prop_assert_eq!(PlannerResponse::parse(&resp.to_line()).unwrap(), resp);
        prop_assert_eq!(parse_serialized(&serialize(&d, &h)).unwrap(), (d, h));
    }

    #[test]
    fn subgoal_navigation_shape(h in prop::collection::vec(arb_recorded(), 0..30)) {
        let s = actions_to_subgoals(&h);
        for w in s.windows(2) {
            prop_assert!(!(w[0].action.is_navigate() && w[1].action.is_navigate()));
        }
        prop_assert!(s.last().is_none_or(|g| !g.action.is_navigate()));
        let interactions = h.iter().filter(|r| r.action.is_interaction()).count();
        prop_assert_eq!(s.iter().filter(|g| !g.action.is_navigate()).count(), interactions);
    }

    #[test]
    fn template_deterministic(idx in 0..crate::goal::TaskType::ALL.len(), k in 0usize..10) {
        let t = crate::goal::TaskType::ALL[idx];
        let d = com(&templates::utterance(t, &templates::TaskParams::default_for(t)));
        let p = template();
        let full = p.plan(&d, &[]).unwrap();
        prop_assert_eq!(&full, &p.plan(&d, &[]).unwrap());
        let k = k.min(full.len());
        let rest = p.plan(&d, &full[..k]).unwrap();
        let done: Vec<_> = full[..k].iter().filter(|g| !g.action.is_navigate()).cloned().collect();
        let left: Vec<_> = rest.iter().filter(|g| !g.action.is_navigate()).cloned().collect();
        let all: Vec<_> = full.iter().filter(|g| !g.action.is_navigate()).cloned().collect();
        prop_assert_eq!([done, left].concat(), all);
    }
}
