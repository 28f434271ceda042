use std::collections::VecDeque;

use super::PgError;
use crate::mdp::{policy_chain, Mdp, Policy};

/// ℓ1 change between successive damped iterates at which power iteration stops.
pub const STATIONARY_TOLERANCE: f64 = 1e-12;

pub const MAX_POWER_ITERATIONS: usize = 10_000_000;

/// Long-run state occupancy `mu` of a policy-induced chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution(pub Vec<f64>);

impl StationaryDistribution {
    pub fn get(&self, s: usize) -> f64 {
        self.0[s]
    }

    /// `||mu P - mu||_1` for a row-major chain.
    pub fn stationarity_residual(&self, p: &[f64]) -> f64 {
        let n = self.0.len();
        (0..n)
            .map(|t| {
                let flow: f64 = (0..n).map(|s| self.0[s] * p[s * n + t]).sum();
                (flow - self.0[t]).abs()
            })
            .sum()
    }
}

/// Strong connectivity of the positive-probability graph of `p`.
pub fn is_irreducible(n: usize, p: &[f64]) -> bool {
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let w = if forward { p[u * n + v] } else { p[v * n + u] };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    n > 0 && reach(true) && reach(false)
}

/// Stationary distribution of an irreducible row-major chain.
///
/// Power iteration on the half-lazy chain `(P + I) / 2` from the uniform
/// distribution. Laziness leaves the fixed point unchanged and removes
/// periodic oscillation.
pub fn chain_stationary(n: usize, p: &[f64]) -> Result<StationaryDistribution, PgError> {
    if !is_irreducible(n, p) {
        return Err(PgError::ReducibleChain);
    }
    let mut mu = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_POWER_ITERATIONS {
        next.fill(0.0);
        for (s, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (t, x) in next.iter_mut().enumerate() {
                *x += m * p[s * n + t];
            }
        }
        let mut change = 0.0;
        for (x, &m) in next.iter_mut().zip(&mu) {
            *x = 0.5 * (*x + m);
            change += (*x - m).abs();
        }
        std::mem::swap(&mut mu, &mut next);
        if change < STATIONARY_TOLERANCE {
            let total: f64 = mu.iter().sum();
            mu.iter_mut().for_each(|x| *x /= total);
            return Ok(StationaryDistribution(mu));
        }
    }
    Err(PgError::PowerIterationStalled(MAX_POWER_ITERATIONS))
}

/// Stationary distribution of the chain `mdp` follows under `pi`.
pub fn stationary_distribution(mdp: &Mdp, pi: &Policy) -> Result<StationaryDistribution, PgError> {
    pi.check_against(mdp)?;
    let (p, _) = policy_chain(mdp, pi);
    chain_stationary(mdp.n_states(), &p)
}
