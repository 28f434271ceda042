//! Exact dynamic programming: `V*`, `Q*` and an optimal deterministic
//! stationary policy.
//!
//! These routines are the ground truth that the learning modules are
//! checked against. All argmax operations break ties toward the lowest
//! action index.

use rand::Rng;
use thiserror::Error;

use crate::mdp::{policy_evaluate, Mdp, Policy, QTable, ValueFunction};
use crate::par::Exec;
use crate::random::flat_dirichlet;

/// Slack allowed when checking `V_pi <= V*` for sampled policies.
pub const OPTIMALITY_SLACK: f64 = 1e-7;

/// Actions within this much of the row maximum count as optimal when
/// comparing argmax sets.
pub const ARGMAX_TOLERANCE: f64 = 1e-7;

/// Upper bound on value-iteration sweeps; reached only when the requested
/// precision is below floating-point resolution.
pub const MAX_VALUE_ITERATIONS: usize = 1_000_000;

const MAX_POLICY_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("trial count must be at least 1")]
    NoTrials,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub v_star: ValueFunction,
    pub q_star: QTable,
    /// Always [`Policy::Deterministic`].
    pub pi_star: Policy,
    pub iterations: usize,
    /// `||T V* - V*||_inf`.
    pub residual: f64,
}

/// One application of the Bellman optimality operator `T`.
pub fn bellman_optimality_backup(mdp: &Mdp, v: &[f64]) -> Vec<f64> {
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| mdp.backup(s, a, v))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// `Q(s, a) = R(s, a) + gamma * sum_s' P(s'|s, a) v(s')`.
pub fn q_from_values(mdp: &Mdp, v: &[f64]) -> QTable {
    let values = (0..mdp.n_states())
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| mdp.backup(s, a, v))
        .collect();
    QTable::new(mdp.n_actions(), values)
}

/// `||T v - v||_inf`.
pub fn bellman_residual(mdp: &Mdp, v: &[f64]) -> f64 {
    bellman_optimality_backup(mdp, v)
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn finish(mdp: &Mdp, v: Vec<f64>, iterations: usize) -> SolveResult {
    let q_star = q_from_values(mdp, &v);
    let v_star: Vec<f64> = (0..mdp.n_states()).map(|s| q_star.max(s)).collect();
    let residual = bellman_residual(mdp, &v_star);
    SolveResult {
        pi_star: q_star.greedy_policy(),
        v_star: ValueFunction(v_star),
        q_star,
        iterations,
        residual,
    }
}

/// Value iteration from `V = 0`.
///
/// Stops once a sweep changes `V` by less than `epsilon (1 - gamma) / (2 gamma)`
/// in sup-norm, which puts the returned `V*` within `epsilon` of the optimum.
/// With `gamma = 0` a single sweep is exact.
pub fn value_iteration(mdp: &Mdp, epsilon: f64) -> Result<SolveResult, SolverError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SolverError::InvalidEpsilon(epsilon));
    }
    let gamma = mdp.gamma();
    let mut v = vec![0.0; mdp.n_states()];
    if gamma == 0.0 {
        v = bellman_optimality_backup(mdp, &v);
        return Ok(finish(mdp, v, 1));
    }
    let threshold = epsilon * (1.0 - gamma) / (2.0 * gamma);
    let mut iterations = 0;
    loop {
        let next = bellman_optimality_backup(mdp, &v);
        iterations += 1;
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta < threshold || delta == 0.0 || iterations >= MAX_VALUE_ITERATIONS {
            break;
        }
    }
    Ok(finish(mdp, v, iterations))
}

/// Greedy action at every state with a relative tie band, lowest index
/// inside the band.
fn improve(q: &QTable) -> Vec<usize> {
    (0..q.n_states())
        .map(|s| {
            let row = q.row(s);
            let max = q.max(s);
            let band = 1e-12 * (1.0 + max.abs());
            row.iter().position(|&x| x >= max - band).unwrap_or(0)
        })
        .collect()
}

/// Howard policy iteration starting from the lowest-index action everywhere.
///
/// Each round evaluates the current policy exactly and switches to its
/// greedy improvement; stops when the improvement leaves the policy
/// unchanged. `iterations` counts evaluations.
pub fn policy_iteration(mdp: &Mdp) -> SolveResult {
    let na = mdp.n_actions();
    let mut actions = vec![0usize; mdp.n_states()];
    let mut iterations = 0;
    loop {
        let pi = Policy::Deterministic {
            n_actions: na,
            actions: actions.clone(),
        };
        let v = policy_evaluate(mdp, &pi).expect("policy built over this MDP");
        iterations += 1;
        let q = q_from_values(mdp, &v.0);
        let next = improve(&q);
        if next == actions || iterations >= MAX_POLICY_ITERATIONS {
            let residual = bellman_residual(mdp, &v.0);
            return SolveResult {
                v_star: v,
                q_star: q,
                pi_star: pi,
                iterations,
                residual,
            };
        }
        actions = next;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub trial: usize,
    pub state: usize,
    pub policy_value: f64,
    pub optimal_value: f64,
}

/// Outcome of checking that a deterministic stationary policy dominates
/// randomly drawn stochastic policies.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub deterministic: bool,
    pub trials: usize,
    pub slack: f64,
    /// Largest `V_pi(s) - V*(s)` seen over all trials and states.
    pub max_excess: f64,
    pub violations: Vec<Violation>,
    pub solution: SolveResult,
}

impl OptimalityReport {
    pub fn passed(&self) -> bool {
        self.deterministic && self.violations.is_empty()
    }
}

/// Solves by policy iteration, then draws `trials` stochastic policies (each
/// row from a flat Dirichlet, states in order, trials in order) and checks
/// `V_pi(s) <= V*(s) + 1e-7` everywhere.
pub fn verify_theorem1<R: Rng + ?Sized>(
    mdp: &Mdp,
    trials: usize,
    rng: &mut R,
) -> Result<OptimalityReport, SolverError> {
    verify_theorem1_with(Exec::default(), mdp, trials, rng)
}

pub fn verify_theorem1_with<R: Rng + ?Sized>(
    exec: Exec,
    mdp: &Mdp,
    trials: usize,
    rng: &mut R,
) -> Result<OptimalityReport, SolverError> {
    if trials == 0 {
        return Err(SolverError::NoTrials);
    }
    let solution = policy_iteration(mdp);
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let policies: Vec<Policy> = (0..trials)
        .map(|_| {
            let probs = (0..ns).flat_map(|_| flat_dirichlet(rng, na)).collect();
            Policy::Stochastic {
                n_actions: na,
                probs,
            }
        })
        .collect();
    let values = exec.map(&policies, |pi| {
        policy_evaluate(mdp, pi).expect("policy built over this MDP")
    });

    let (max_excess, violations) = find_violations(&solution.v_star, &values);
    Ok(OptimalityReport {
        deterministic: solution.pi_star.is_deterministic(),
        trials,
        slack: OPTIMALITY_SLACK,
        max_excess,
        violations,
        solution,
    })
}

fn find_violations(v_star: &ValueFunction, values: &[ValueFunction]) -> (f64, Vec<Violation>) {
    let mut violations = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for (trial, v) in values.iter().enumerate() {
        for (state, (&value, &optimal)) in v.0.iter().zip(&v_star.0).enumerate() {
            let excess = value - optimal;
            max_excess = max_excess.max(excess);
            if excess > OPTIMALITY_SLACK {
                violations.push(Violation {
                    trial,
                    state,
                    policy_value: value,
                    optimal_value: optimal,
                });
            }
        }
    }
    (max_excess, violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::run_example;
    use crate::random::{random_mdp, seeded_rng, RandomMdpSpec};

    fn assert_run_example(r: &SolveResult, tol: f64) {
        let v = &r.v_star;
        assert!((v.get(0) - 1.0).abs() < tol && (v.get(1) - 2.0).abs() < tol);
        let q = &r.q_star;
        for (s, a, want) in [(0, 0, 0.5), (0, 1, 1.0), (1, 0, 2.0), (1, 1, 0.5)] {
            assert!(
                (q.get(s, a) - want).abs() < tol,
                "Q({s},{a}) = {}",
                q.get(s, a)
            );
        }
        assert_eq!(r.pi_star, Policy::deterministic(2, vec![1, 0]).unwrap());
    }

    #[test]
    fn run_example_closed_form() {
        assert_run_example(&value_iteration(&run_example(), 1e-10).unwrap(), 1e-9);
        assert_run_example(&policy_iteration(&run_example()), 1e-12);
    }

    #[test]
    fn zero_rewards_pick_lowest_action() {
        let m = run_example().with_rewards(vec![0.0; 4]).unwrap();
        for r in [value_iteration(&m, 1e-8).unwrap(), policy_iteration(&m)] {
            assert!(r.v_star.0.iter().all(|&x| x == 0.0));
            assert_eq!(r.pi_star.action(0), Some(0));
            assert_eq!(r.pi_star.action(1), Some(0));
        }
    }

    #[test]
    fn single_state_single_action_converges_in_one_round() {
        let m = Mdp::new(
            vec!["s".into()],
            vec!["a".into()],
            0.9,
            vec![1.0],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(policy_iteration(&m).iterations, 1);
    }

    #[test]
    fn duplicate_actions_tie_low() {
        let m = Mdp::new(
            vec!["x".into(), "y".into()],
            vec!["a".into(), "b".into()],
            0.8,
            vec![0.3, 0.7, 0.3, 0.7, 0.6, 0.4, 0.6, 0.4],
            vec![1.0, 1.0, -2.0, -2.0],
        )
        .unwrap();
        let r = policy_iteration(&m);
        assert_eq!(r.pi_star, Policy::deterministic(2, vec![0, 0]).unwrap());
        let r = value_iteration(&m, 1e-8).unwrap();
        assert_eq!(r.pi_star, Policy::deterministic(2, vec![0, 0]).unwrap());
    }

    #[test]
    fn gamma_zero_is_myopic() {
        let m = Mdp::new(
            vec!["x".into()],
            vec!["a".into(), "b".into()],
            0.0,
            vec![1.0, 1.0],
            vec![0.2, 0.7],
        )
        .unwrap();
        let r = value_iteration(&m, 1e-8).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.v_star.get(0), 0.7);
        assert_eq!(r.pi_star.action(0), Some(1));
    }

    #[test]
    fn rejects_bad_epsilon() {
        let m = run_example();
        for eps in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(value_iteration(&m, eps).is_err());
        }
    }

    #[test]
    fn value_and_policy_iteration_agree_seed_7() {
        let mut rng = seeded_rng(7);
        let m = random_mdp(&mut rng, &RandomMdpSpec::new(10, 3, 0.9));
        let vi = value_iteration(&m, 1e-8).unwrap();
        let pi = policy_iteration(&m);
        assert!(vi.v_star.sup_distance(&pi.v_star) < 1e-6);
        assert!(vi.residual < 1e-8 && pi.residual < 1e-9);
    }

    #[test]
    fn verify_run_example_and_zero_case() {
        let mut rng = seeded_rng(0);
        let r = verify_theorem1(&run_example(), 1000, &mut rng).unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());

        let m = run_example().with_rewards(vec![0.0; 4]).unwrap();
        let r = verify_theorem1(&m, 50, &mut rng).unwrap();
        assert!(r.passed());
        assert_eq!(r.max_excess, 0.0);
    }

    #[test]
    fn verify_random_seed_3() {
        let mut rng = seeded_rng(3);
        let m = random_mdp(&mut rng, &RandomMdpSpec::new(15, 4, 0.9));
        let r = verify_theorem1(&m, 500, &mut rng).unwrap();
        assert!(r.passed());
        assert!(r.max_excess <= 1e-7);
    }

    #[test]
    fn verify_report_independent_of_execution() {
        let m = random_mdp(&mut seeded_rng(4), &RandomMdpSpec::new(8, 3, 0.95));
        let a = verify_theorem1_with(Exec::Sequential, &m, 64, &mut seeded_rng(1)).unwrap();
        let b = verify_theorem1_with(Exec::Parallel, &m, 64, &mut seeded_rng(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn planted_violation_is_reported() {
        let v_star = ValueFunction(vec![1.0, 2.0]);
        let values = [
            ValueFunction(vec![1.0, 2.0 + 5e-8]),
            ValueFunction(vec![1.0 + 1e-6, 0.0]),
        ];
        let (max_excess, violations) = find_violations(&v_star, &values);
        assert!((max_excess - 1e-6).abs() < 1e-15);
        assert_eq!(violations.len(), 1);
        assert_eq!((violations[0].trial, violations[0].state), (1, 0));
        assert!(verify_theorem1(&run_example(), 0, &mut seeded_rng(0)).is_err());
    }
}
