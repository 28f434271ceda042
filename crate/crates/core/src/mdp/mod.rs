//! Finite discounted MDPs: the world model every other module works over.
//!
//! States and actions are identified by strings in the public formats and by
//! their position in the declared ordering everywhere else. Transition rows
//! and rewards are stored densely, indexed `[state][action][successor]` and
//! `[state][action]` respectively.

mod eval;
mod format;
mod policy;

use rand::Rng;
use thiserror::Error;

pub use eval::{policy_chain, policy_evaluate, DIRECT_SOLVE_MAX_STATES, EVAL_TOLERANCE};
pub use format::{MdpDocument, RewardEntry};
pub use policy::{argmax_lowest, argmax_set, Policy, QTable, ValueFunction};

/// Absolute tolerance on transition row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("transition row ({state}, {action}) sums to {sum}, expected 1 within 1e-9")]
    RowSum {
        state: String,
        action: String,
        sum: f64,
    },
    #[error(
        "transition probability {value} for ({state}, {action}) -> {target} is outside [0, 1]"
    )]
    ProbabilityRange {
        state: String,
        action: String,
        target: String,
        value: f64,
    },
    #[error("gamma {0} is outside [0, 1)")]
    GammaRange(f64),
    #[error("missing {what} for ({state}, {action})")]
    MissingEntry {
        what: &'static str,
        state: String,
        action: String,
    },
    #[error("reward for ({state}, {action}) is not finite: {value}")]
    NonFiniteReward {
        state: String,
        action: String,
        value: f64,
    },
    #[error("reward for ({state}, {action}) depends on the successor state; only R(s, a) rewards are supported")]
    SuccessorReward { state: String, action: String },
    #[error("unknown state '{0}'")]
    UnknownState(String),
    #[error("unknown action '{0}'")]
    UnknownAction(String),
    #[error("duplicate {kind} identifier '{name}'")]
    Duplicate { kind: &'static str, name: String },
    #[error("{0} list is empty")]
    Empty(&'static str),
    #[error("{what} has {got} entries, expected {expected}")]
    Shape {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("malformed MDP document: {0}")]
    Parse(String),
}

/// One observed transition `(s, a, r, s')`, by index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next: usize,
}

/// A validated finite MDP with `R(s, a)` rewards and discount `0 <= gamma < 1`.
///
/// Immutable once built; share freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    states: Vec<String>,
    actions: Vec<String>,
    gamma: f64,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    reward_bound: f64,
}

impl Mdp {
    /// Builds and validates an MDP from dense tables.
    ///
    /// `transitions` is `|S|·|A|·|S|` long, `rewards` is `|S|·|A|` long.
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        gamma: f64,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self, MdpError> {
        check_identifiers(&states, "state")?;
        check_identifiers(&actions, "action")?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(MdpError::GammaRange(gamma));
        }
        let (ns, na) = (states.len(), actions.len());
        if transitions.len() != ns * na * ns {
            return Err(MdpError::Shape {
                what: "transition table",
                got: transitions.len(),
                expected: ns * na * ns,
            });
        }
        if rewards.len() != ns * na {
            return Err(MdpError::Shape {
                what: "reward table",
                got: rewards.len(),
                expected: ns * na,
            });
        }
        for s in 0..ns {
            for a in 0..na {
                let row = &transitions[(s * na + a) * ns..(s * na + a + 1) * ns];
                for (t, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(MdpError::ProbabilityRange {
                            state: states[s].clone(),
                            action: actions[a].clone(),
                            target: states[t].clone(),
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(MdpError::RowSum {
                        state: states[s].clone(),
                        action: actions[a].clone(),
                        sum,
                    });
                }
                let r = rewards[s * na + a];
                if !r.is_finite() {
                    return Err(MdpError::NonFiniteReward {
                        state: states[s].clone(),
                        action: actions[a].clone(),
                        value: r,
                    });
                }
            }
        }
        let reward_bound = rewards.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        Ok(Self {
            states,
            actions,
            gamma,
            transitions,
            rewards,
            reward_bound,
        })
    }

    /// Parses and validates an MDP JSON document.
    pub fn from_json(text: &str) -> Result<Self, MdpError> {
        validate_mdp(MdpDocument::from_json(text)?)
    }

    /// Same dynamics and discount, different reward table.
    pub fn with_rewards(&self, rewards: Vec<f64>) -> Result<Self, MdpError> {
        Self::new(
            self.states.clone(),
            self.actions.clone(),
            self.gamma,
            self.transitions.clone(),
            rewards,
        )
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `M = max |R(s, a)|`.
    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    /// `M / (1 - gamma)`, the bound on any discounted value.
    pub fn value_bound(&self) -> f64 {
        self.reward_bound / (1.0 - self.gamma)
    }

    pub fn state_index(&self, name: &str) -> Result<usize, MdpError> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| MdpError::UnknownState(name.to_owned()))
    }

    pub fn action_index(&self, name: &str) -> Result<usize, MdpError> {
        self.actions
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| MdpError::UnknownAction(name.to_owned()))
    }

    /// Distribution over successors of `(s, a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let ns = self.n_states();
        let start = (s * self.n_actions() + a) * ns;
        &self.transitions[start..start + ns]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions() + a]
    }

    /// Row-major `[state][action]` reward table.
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// `R(s, a) + gamma * sum_s' P(s'|s, a) v(s')`.
    pub fn backup(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        let future: f64 = self
            .transition_row(s, a)
            .iter()
            .zip(v)
            .map(|(p, x)| p * x)
            .sum();
        self.reward(s, a) + self.gamma * future
    }

    /// Samples one transition from `(s, a)` by index.
    ///
    /// Consumes exactly one `f64` from `rng`; the successor is picked by
    /// inverse CDF over the declared state ordering.
    pub fn step_index<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Transition {
        let u: f64 = rng.random();
        Transition {
            state: s,
            action: a,
            reward: self.reward(s, a),
            next: sample_inverse_cdf(self.transition_row(s, a), u),
        }
    }

    /// Samples one transition from named state and action.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &str,
        action: &str,
        rng: &mut R,
    ) -> Result<(f64, String), MdpError> {
        let s = self.state_index(state)?;
        let a = self.action_index(action)?;
        let t = self.step_index(s, a, rng);
        Ok((t.reward, self.states[t.next].clone()))
    }

    pub fn to_document(&self) -> MdpDocument {
        MdpDocument::from_mdp(self)
    }

    pub fn to_json(&self) -> String {
        self.to_document().to_json()
    }
}

/// Validates a parsed document into an [`Mdp`], computing the reward bound.
pub fn validate_mdp(doc: MdpDocument) -> Result<Mdp, MdpError> {
    doc.into_mdp()
}

/// Picks the first index whose cumulative mass exceeds `u`.
///
/// Falls back to the last positive-probability entry when rounding leaves
/// `u` above the accumulated total.
pub fn sample_inverse_cdf(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

fn check_identifiers(names: &[String], kind: &'static str) -> Result<(), MdpError> {
    if names.is_empty() {
        return Err(MdpError::Empty(kind));
    }
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(MdpError::Duplicate {
                kind,
                name: n.clone(),
            });
        }
    }
    Ok(())
}
