//! Benchmark harness: instance formats, the suite generator, the episode
//! runner and the metric suite.

pub mod expert;
pub mod fixtures;
pub mod generator;
pub mod instance;
pub mod metrics;
pub mod runner;
pub mod trace;

pub use expert::{demonstrate, ExpertError};
pub use generator::{generate_instance, generate_suite, generate_with, GenerationError, KindMix, SuiteSpec};
pub use instance::{held_after, Instance, InstanceError, InstanceKind, Suite, INSTANCE_FORMAT, SUITE_FORMAT};
pub use metrics::{aggregate, metric_gc, metric_sr, metric_tlw, EpisodeMetrics, Report, Summary, Termination};
pub use runner::{run_episode, run_suite, run_with_agent, Agent, Exploration, Limits, RunConfig, RunMode};
pub use trace::{replay, EpisodeTrace, StepRecord, TraceError, TRACE_FORMAT};
