//! Household-task engine: a 2-D grid simulator, egocentric perception and
//! semantic mapping, sub-goal planning, symbolic plan repair, FMM
//! navigation, a rule-based Commander and a benchmark harness.

pub mod bench;
pub mod cli;
pub mod commander;
pub mod goal;
pub mod language;
pub mod perception;
pub mod reasoner_action;
pub mod reasoner_task;
pub mod world;
