use super::{Mdp, MdpError, ROW_SUM_TOLERANCE};

/// A stationary policy, either a state → action map or a state → action
/// distribution map.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic {
        n_actions: usize,
        actions: Vec<usize>,
    },
    /// Row-major `[state][action]` probabilities.
    Stochastic { n_actions: usize, probs: Vec<f64> },
}

impl Policy {
    pub fn deterministic(n_actions: usize, actions: Vec<usize>) -> Result<Self, MdpError> {
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(MdpError::InvalidPolicy(format!(
                "action index {a} out of range for {n_actions} actions"
            )));
        }
        Ok(Self::Deterministic { n_actions, actions })
    }

    pub fn stochastic(n_actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if n_actions == 0 || !probs.len().is_multiple_of(n_actions) {
            return Err(MdpError::InvalidPolicy(format!(
                "{} probabilities do not form rows of {n_actions}",
                probs.len()
            )));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(MdpError::InvalidPolicy(format!(
                    "row {s} has an entry outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(MdpError::InvalidPolicy(format!("row {s} sums to {sum}")));
            }
        }
        Ok(Self::Stochastic { n_actions, probs })
    }

    /// Uniform distribution over actions at every state.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::Stochastic {
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Self::Deterministic { n_actions, .. } | Self::Stochastic { n_actions, .. } => {
                *n_actions
            }
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            Self::Deterministic { actions, .. } => actions.len(),
            Self::Stochastic { n_actions, probs } => probs.len() / n_actions,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Deterministic { .. })
    }

    /// Action chosen at `s`, for deterministic policies.
    pub fn action(&self, s: usize) -> Option<usize> {
        match self {
            Self::Deterministic { actions, .. } => Some(actions[s]),
            Self::Stochastic { .. } => None,
        }
    }

    /// `pi(a | s)`.
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        match self {
            Self::Deterministic { actions, .. } => f64::from(u8::from(actions[s] == a)),
            Self::Stochastic { n_actions, probs } => probs[s * n_actions + a],
        }
    }

    pub(crate) fn check_against(&self, mdp: &Mdp) -> Result<(), MdpError> {
        if self.n_states() != mdp.n_states() || self.n_actions() != mdp.n_actions() {
            return Err(MdpError::InvalidPolicy(format!(
                "policy is {}x{}, MDP is {}x{}",
                self.n_states(),
                self.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// State values, indexed by state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        sup_distance(&self.0, &other.0)
    }

    pub fn get(&self, s: usize) -> f64 {
        self.0[s]
    }
}

/// Action values, row-major `[state][action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_actions: usize, values: Vec<f64>) -> Self {
        assert!(n_actions > 0 && values.len().is_multiple_of(n_actions));
        Self { n_actions, values }
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self::new(n_actions, vec![value; n_states * n_actions])
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action at `s`, lowest index on ties.
    pub fn greedy(&self, s: usize) -> usize {
        argmax_lowest(self.row(s))
    }

    pub fn greedy_policy(&self) -> Policy {
        Policy::Deterministic {
            n_actions: self.n_actions,
            actions: (0..self.n_states()).map(|s| self.greedy(s)).collect(),
        }
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        sup_distance(&self.values, &other.values)
    }
}

/// Index of the maximum; the lowest index wins ties.
pub fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Every index within `tol` of the row maximum, ascending.
pub fn argmax_set(row: &[f64], tol: f64) -> Vec<usize> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.iter()
        .enumerate()
        .filter(|(_, &x)| x >= max - tol)
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
