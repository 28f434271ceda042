use super::{Mdp, MdpError, Policy, ValueFunction};
use crate::linalg::solve_dense;

/// Largest state count solved directly; bigger MDPs fall back to iteration.
pub const DIRECT_SOLVE_MAX_STATES: usize = 512;

/// Sup-norm change at which iterative evaluation stops.
pub const EVAL_TOLERANCE: f64 = 1e-12;

/// Policy-induced chain `P_pi` (row-major `n × n`) and reward vector `r_pi`.
pub fn policy_chain(mdp: &Mdp, pi: &Policy) -> (Vec<f64>, Vec<f64>) {
    let ns = mdp.n_states();
    let mut p = vec![0.0; ns * ns];
    let mut r = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..mdp.n_actions() {
            let w = pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            r[s] += w * mdp.reward(s, a);
            for (t, &q) in mdp.transition_row(s, a).iter().enumerate() {
                p[s * ns + t] += w * q;
            }
        }
    }
    (p, r)
}

/// Discounted value of `pi`: the fixed point of `V = r_pi + gamma P_pi V`.
pub fn policy_evaluate(mdp: &Mdp, pi: &Policy) -> Result<ValueFunction, MdpError> {
    pi.check_against(mdp)?;
    let (p, r) = policy_chain(mdp, pi);
    let ns = mdp.n_states();
    let gamma = mdp.gamma();
    if ns <= DIRECT_SOLVE_MAX_STATES {
        let mut a: Vec<f64> = p.iter().map(|x| -gamma * x).collect();
        for s in 0..ns {
            a[s * ns + s] += 1.0;
        }
        if let Some(v) = solve_dense(ns, &a, &r) {
            return Ok(ValueFunction(v));
        }
    }
    Ok(ValueFunction(iterate_expectation(&p, &r, gamma)))
}

fn iterate_expectation(p: &[f64], r: &[f64], gamma: f64) -> Vec<f64> {
    let ns = r.len();
    let mut v = vec![0.0; ns];
    loop {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                let row = &p[s * ns..(s + 1) * ns];
                r[s] + gamma * row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        let delta = super::policy::sup_distance(&next, &v);
        v = next;
        if delta < EVAL_TOLERANCE {
            return v;
        }
    }
}
