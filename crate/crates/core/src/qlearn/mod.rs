//! Tabular Q-learning with per-pair learning-rate schedules.
//!
//! The rate applied to an update of `(s, a)` is `beta_n` where `n` is the
//! number of updates `(s, a)` has received, this one included. Runs are
//! checked against the exact solver at regular checkpoints.

mod report;
mod run;
mod schedule;

use thiserror::Error;

pub use report::{convergence_report, ConvergenceSummary};
pub use run::{
    q_learning_run, q_learning_sweep, q_learning_sweep_with, q_update, Checkpoint,
    ConvergenceTrace, QLearnConfig, QLearnOutcome, StartRule, VisitCounter, DEFAULT_EPSILON,
    DEFAULT_RESTART_PROB,
};
pub use schedule::{
    classify_schedule, Condition, LearningRateSchedule, ScheduleVerdict, TableTail,
    HEURISTIC_MARGIN, HEURISTIC_MIN_LEN,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QLearnError {
    #[error("learning rate {rate} at visit {n} is negative")]
    NegativeRate { n: u64, rate: f64 },
    #[error("learning rate {rate} at visit {n} is not below 1")]
    RateAtLeastOne { n: u64, rate: f64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid Q-learning configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "oracle was solved on a {oracle_states}x{oracle_actions} MDP, run uses {states}x{actions}"
    )]
    OracleMismatch {
        oracle_states: usize,
        oracle_actions: usize,
        states: usize,
        actions: usize,
    },
    #[error("convergence report needs at least 10 checkpoints, trace has {0}")]
    TooFewCheckpoints(usize),
}
