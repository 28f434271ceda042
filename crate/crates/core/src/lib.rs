//! Tabular Markov-decision-process laboratory.
//!
//! * [`mdp`]: finite discounted MDPs, policies, sampling and exact policy
//!   evaluation, plus the JSON file format.
//! * [`solver`]: value and policy iteration, and a randomized check that the
//!   optimal deterministic stationary policy dominates stochastic ones.
//! * [`qlearn`]: tabular Q-learning with per-pair learning-rate schedules and
//!   a Robbins–Monro classifier.
//! * [`pg`]: softmax policy gradients under the average-reward criterion,
//!   checked against finite differences.
//! * [`hierarchy`]: weighted multilevel rewards with utility filters, and
//!   argmax divergence between reward definitions.
//! * [`cli`]: the `mdplab` command line.
//!
//! Data-parallel loops (policy sampling, seed sweeps, finite differences,
//! weight sweeps) run on rayon when the default `parallel` feature is on and
//! sequentially otherwise; results are identical either way.

pub mod cli;
pub mod fixtures;
pub mod hierarchy;
pub mod linalg;
pub mod mdp;
pub mod output;
pub mod par;
pub mod pg;
pub mod qlearn;
pub mod random;
pub mod solver;
