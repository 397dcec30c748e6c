use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::goal::{GoalSpec, TaskType};
use crate::world::WorldState;

pub fn metric_gc(final_state: &WorldState, goal: &GoalSpec) -> f64 {
    final_state.goal_conditions_met(goal)
}

/// 1 when every goal condition holds, else 0.
pub fn metric_sr(final_state: &WorldState, goal: &GoalSpec) -> f64 {
    if metric_gc(final_state, goal) >= 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Trajectory-length weighting of `m`: m·ref / max(ref, pred).
pub fn metric_tlw(m: f64, ref_len: usize, pred_len: usize) -> f64 {
    assert!(ref_len >= 1, "reference length must be at least 1");
    m * ref_len as f64 / ref_len.max(pred_len) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stop,
    FailureLimit,
    StepLimit,
    PlannerError,
}

/// Scores of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub sr: f64,
    pub gc: f64,
    pub tlw_sr: f64,
    pub tlw_gc: f64,
    pub ref_len: usize,
    pub pred_len: usize,
    pub steps: usize,
    pub failures: u32,
    pub termination: Termination,
}

impl EpisodeMetrics {
    pub fn score(final_state: &WorldState, goal: &GoalSpec, ref_len: usize, pred_len: usize) -> Self {
        let (sr, gc) = (metric_sr(final_state, goal), metric_gc(final_state, goal));
        let r = ref_len.max(1);
        EpisodeMetrics {
            sr,
            gc,
            tlw_sr: metric_tlw(sr, r, pred_len),
            tlw_gc: metric_tlw(gc, r, pred_len),
            ref_len,
            pred_len,
            steps: pred_len,
            failures: 0,
            termination: Termination::Stop,
        }
    }
}

/// Means over a group of episodes. `weighted` uses reference-length
/// weights |A_R| / Σ|A_R|; `plain` is the unweighted mean.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub sr: f64,
    pub gc: f64,
    pub tlw_sr: f64,
    pub tlw_gc: f64,
    pub plain: Means,
    pub weighted: Means,
    pub mean_steps: f64,
    pub max_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Means {
    pub sr: f64,
    pub gc: f64,
    pub tlw_sr: f64,
    pub tlw_gc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub overall: Summary,
    pub per_task: BTreeMap<TaskType, Summary>,
}

fn means(rows: &[&EpisodeMetrics], weight: impl Fn(&EpisodeMetrics) -> f64) -> Means {
    let total: f64 = rows.iter().map(|r| weight(r)).sum();
    if total <= 0.0 {
        return Means::default();
    }
    let avg = |f: fn(&EpisodeMetrics) -> f64| rows.iter().map(|r| weight(r) * f(r)).sum::<f64>() / total;
    Means {
        sr: avg(|r| r.sr),
        gc: avg(|r| r.gc),
        tlw_sr: avg(|r| r.tlw_sr),
        tlw_gc: avg(|r| r.tlw_gc),
    }
}

fn summarize(rows: &[&EpisodeMetrics]) -> Summary {
    let plain = means(rows, |_| 1.0);
    let weighted = means(rows, |r| r.ref_len.max(1) as f64);
    Summary {
        episodes: rows.len(),
        sr: plain.sr,
        gc: plain.gc,
        tlw_sr: weighted.tlw_sr,
        tlw_gc: weighted.tlw_gc,
        mean_steps: if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(|r| r.steps as f64).sum::<f64>() / rows.len() as f64
        },
        max_steps: rows.iter().map(|r| r.steps).max().unwrap_or(0),
        plain,
        weighted,
    }
}

/// Headline numbers: plain means for SR and GC, reference-weighted means
/// for the TLW metrics. Both conventions are kept in `plain`/`weighted`.
pub fn aggregate(rows: &[(TaskType, EpisodeMetrics)]) -> Report {
    assert!(!rows.is_empty(), "aggregate needs at least one episode");
    let all: Vec<&EpisodeMetrics> = rows.iter().map(|(_, m)| m).collect();
    let mut groups: BTreeMap<TaskType, Vec<&EpisodeMetrics>> = BTreeMap::new();
    for (t, m) in rows {
        groups.entry(*t).or_default().push(m);
    }
    Report {
        overall: summarize(&all),
        per_task: groups.into_iter().map(|(t, g)| (t, summarize(&g))).collect(),
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "task", "n", "SR", "GC", "TLW-SR", "TLW-GC", "steps"
        );
        let mut row = |name: &str, s: &Summary| {
            let _ = writeln!(
                out,
                "{:<14} {:>5} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.1}",
                name, s.episodes, s.sr, s.gc, s.tlw_sr, s.tlw_gc, s.mean_steps
            );
        };
        for (t, s) in &self.per_task {
            row(t.name(), s);
        }
        row("all", &self.overall);
        out
    }
}
