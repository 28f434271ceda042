use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::PgError;
use crate::mdp::{argmax_lowest, Policy};

/// Softmax logits `theta[s][a]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    n_actions: usize,
    theta: Vec<f64>,
}

impl PolicyParams {
    pub fn new(n_actions: usize, theta: Vec<f64>) -> Result<Self, PgError> {
        if n_actions == 0 || theta.is_empty() || !theta.len().is_multiple_of(n_actions) {
            return Err(PgError::Shape(format!(
                "{} logits do not form rows of {n_actions}",
                theta.len()
            )));
        }
        Ok(Self { n_actions, theta })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            theta: vec![0.0; n_states * n_actions],
        }
    }

    /// Independent `N(0, stddev^2)` logits, drawn in row-major order.
    pub fn gaussian<R: Rng + ?Sized>(
        rng: &mut R,
        n_states: usize,
        n_actions: usize,
        stddev: f64,
    ) -> Self {
        let normal = Normal::new(0.0, stddev).expect("stddev must be finite and non-negative");
        Self {
            n_actions,
            theta: (0..n_states * n_actions)
                .map(|_| normal.sample(rng))
                .collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.theta.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.theta[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.theta[s * self.n_actions + a]
    }

    /// Copy with `theta[i] += delta` (flat index).
    pub fn perturbed(&self, i: usize, delta: f64) -> Self {
        let mut p = self.clone();
        p.theta[i] += delta;
        p
    }

    /// `theta + step * direction`.
    pub fn stepped(&self, step: f64, direction: &[f64]) -> Self {
        let mut p = self.clone();
        for (t, d) in p.theta.iter_mut().zip(direction) {
            *t += step * d;
        }
        p
    }

    /// Most probable action per state (lowest index on ties).
    pub fn greedy_policy(&self) -> Policy {
        Policy::Deterministic {
            n_actions: self.n_actions,
            actions: (0..self.n_states())
                .map(|s| argmax_lowest(self.row(s)))
                .collect(),
        }
    }
}

/// `pi(a|s) = exp(theta[s][a]) / sum_b exp(theta[s][b])`, computed with the
/// row maximum subtracted.
pub fn softmax_policy(theta: &PolicyParams) -> Result<Policy, PgError> {
    if let Some(i) = theta.theta.iter().position(|t| !t.is_finite()) {
        return Err(PgError::NonFiniteTheta {
            state: i / theta.n_actions,
            action: i % theta.n_actions,
        });
    }
    let probs = theta
        .theta
        .chunks(theta.n_actions)
        .flat_map(softmax_row)
        .collect();
    Ok(Policy::Stochastic {
        n_actions: theta.n_actions,
        probs,
    })
}

fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|t| (t - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `d/d theta[s][b] ln pi(a|s) = [a == b] - pi(b|s)` for one softmax row.
pub fn log_policy_gradient(pi_row: &[f64], a: usize) -> Vec<f64> {
    pi_row
        .iter()
        .enumerate()
        .map(|(b, &p)| f64::from(u8::from(a == b)) - p)
        .collect()
}
