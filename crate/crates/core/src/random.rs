//! Seeded randomness and random-MDP generation.
//!
//! Every stochastic routine in the crate draws from [`LabRng`], ChaCha with
//! 8 rounds (`rand_chacha::ChaCha8Rng`) seeded from a `u64` via
//! `SeedableRng::seed_from_u64`. Runs are reproducible within this
//! implementation; other implementations are not expected to match bit for
//! bit.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::mdp::Mdp;

pub type LabRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> LabRng {
    LabRng::seed_from_u64(seed)
}

/// Draws a point from the flat Dirichlet on the `n`-simplex.
pub fn flat_dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    } else {
        w.fill(1.0 / n as f64);
    }
    w
}

/// Shape of a generated MDP.
#[derive(Debug, Clone)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Successors per transition row; `None` means full support.
    pub support: Option<usize>,
    pub reward_low: f64,
    pub reward_high: f64,
}

impl RandomMdpSpec {
    pub fn new(n_states: usize, n_actions: usize, gamma: f64) -> Self {
        Self {
            n_states,
            n_actions,
            gamma,
            support: None,
            reward_low: -1.0,
            reward_high: 1.0,
        }
    }

    pub fn with_support(mut self, k: usize) -> Self {
        self.support = Some(k);
        self
    }
}

/// Random MDP with flat-Dirichlet transition rows and uniform rewards.
pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, spec: &RandomMdpSpec) -> Mdp {
    let (ns, na) = (spec.n_states, spec.n_actions);
    let k = spec.support.unwrap_or(ns).clamp(1, ns);
    let mut transitions = vec![0.0; ns * na * ns];
    for row in transitions.chunks_mut(ns) {
        let targets = sample(rng, ns, k);
        let weights = flat_dirichlet(rng, k);
        for (t, w) in targets.iter().zip(weights) {
            row[t] = w;
        }
    }
    let rewards = random_rewards(rng, ns * na, spec.reward_low, spec.reward_high);
    Mdp::new(
        (0..ns).map(|i| format!("s{i}")).collect(),
        (0..na).map(|i| format!("a{i}")).collect(),
        spec.gamma,
        transitions,
        rewards,
    )
    .expect("generated MDPs are valid")
}

pub fn random_rewards<R: Rng + ?Sized>(rng: &mut R, n: usize, low: f64, high: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(low..high)).collect()
}
