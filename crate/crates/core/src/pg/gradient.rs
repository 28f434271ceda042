use serde::Serialize;

use super::{chain_stationary, softmax_policy, PgError, PolicyParams, StationaryDistribution};
use crate::linalg::solve_dense;
use crate::mdp::{policy_chain, Mdp, Policy, QTable};
use crate::par::Exec;

/// Central-difference step used by default.
pub const FD_STEP: f64 = 1e-5;
/// Floor on the denominator of relative gradient errors.
pub const REL_DIFF_FLOOR: f64 = 1e-8;

/// Average reward and differential action values of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageRewardEval {
    pub mu: StationaryDistribution,
    /// `J = sum_s mu(s) sum_a pi(a|s) R(s, a)`.
    pub j: f64,
    /// Differential `Q`, normalised so that `sum_s mu(s) V(s) = 0`.
    pub q: QTable,
}

/// Solves the average-reward Poisson equation
/// `Q(s,a) = R(s,a) - J + sum_s' P(s'|s,a) V(s')`, `V(s) = sum_a pi(a|s) Q(s,a)`,
/// with `sum_s mu(s) V(s) = 0`.
///
/// The normalisation is folded into the system as `(I - P_pi + 1 mu^T) V = r_pi - J`,
/// which is nonsingular for an irreducible chain.
pub fn differential_q(
    mdp: &Mdp,
    pi: &Policy,
    mu: &StationaryDistribution,
) -> Result<(QTable, f64), PgError> {
    pi.check_against(mdp)?;
    let ns = mdp.n_states();
    if mu.0.len() != ns {
        return Err(PgError::Shape(format!(
            "stationary distribution has {} entries, MDP has {ns} states",
            mu.0.len()
        )));
    }
    let (p, r) = policy_chain(mdp, pi);
    let j: f64 = mu.0.iter().zip(&r).map(|(m, x)| m * x).sum();
    let mut a = vec![0.0; ns * ns];
    for s in 0..ns {
        for t in 0..ns {
            a[s * ns + t] = f64::from(u8::from(s == t)) - p[s * ns + t] + mu.get(t);
        }
    }
    let b: Vec<f64> = r.iter().map(|x| x - j).collect();
    let v = solve_dense(ns, &a, &b).ok_or(PgError::SingularSystem)?;
    let q = (0..ns)
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| {
            let future: f64 = mdp
                .transition_row(s, a)
                .iter()
                .zip(&v)
                .map(|(p, x)| p * x)
                .sum();
            mdp.reward(s, a) - j + future
        })
        .collect();
    Ok((QTable::new(mdp.n_actions(), q), j))
}

/// `mu`, `J` and differential `Q` under the softmax policy of `theta`.
pub fn evaluate_softmax(mdp: &Mdp, theta: &PolicyParams) -> Result<AverageRewardEval, PgError> {
    check_shape(mdp, theta)?;
    let pi = softmax_policy(theta)?;
    let (p, _) = policy_chain(mdp, &pi);
    let mu = chain_stationary(mdp.n_states(), &p)?;
    let (q, j) = differential_q(mdp, &pi, &mu)?;
    Ok(AverageRewardEval { mu, j, q })
}

/// `J(theta)` alone.
pub fn average_reward(mdp: &Mdp, theta: &PolicyParams) -> Result<f64, PgError> {
    check_shape(mdp, theta)?;
    let pi = softmax_policy(theta)?;
    let (p, r) = policy_chain(mdp, &pi);
    let mu = chain_stationary(mdp.n_states(), &p)?;
    Ok(mu.0.iter().zip(&r).map(|(m, x)| m * x).sum())
}

/// Exact `grad J = E_{s~mu, a~pi}[grad ln pi(a|s) Q(s,a)]` for softmax logits:
/// `grad[s][a] = mu(s) pi(a|s) (Q(s,a) - sum_b pi(b|s) Q(s,b))`.
pub fn policy_gradient_analytic(mdp: &Mdp, theta: &PolicyParams) -> Result<Vec<f64>, PgError> {
    let eval = evaluate_softmax(mdp, theta)?;
    Ok(gradient_from_eval(mdp, theta, &eval))
}

fn gradient_from_eval(mdp: &Mdp, theta: &PolicyParams, eval: &AverageRewardEval) -> Vec<f64> {
    let pi = softmax_policy(theta).expect("already evaluated");
    let na = mdp.n_actions();
    let mut grad = vec![0.0; mdp.n_states() * na];
    for s in 0..mdp.n_states() {
        let baseline: f64 = (0..na).map(|b| pi.prob(s, b) * eval.q.get(s, b)).sum();
        for a in 0..na {
            grad[s * na + a] = eval.mu.get(s) * pi.prob(s, a) * (eval.q.get(s, a) - baseline);
        }
    }
    grad
}

fn check_shape(mdp: &Mdp, theta: &PolicyParams) -> Result<(), PgError> {
    if theta.n_states() != mdp.n_states() || theta.n_actions() != mdp.n_actions() {
        return Err(PgError::Shape(format!(
            "theta is {}x{}, MDP is {}x{}",
            theta.n_states(),
            theta.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// Analytic gradient against central finite differences of `J`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_abs_diff: f64,
    /// `max |analytic - numeric| / max(1e-8, |numeric|)`.
    pub max_rel_diff: f64,
}

pub fn gradient_check(mdp: &Mdp, theta: &PolicyParams, h: f64) -> Result<GradientReport, PgError> {
    gradient_check_with(Exec::default(), mdp, theta, h)
}

pub fn gradient_check_with(
    exec: Exec,
    mdp: &Mdp,
    theta: &PolicyParams,
    h: f64,
) -> Result<GradientReport, PgError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(PgError::InvalidArgument(format!(
            "finite-difference step {h}"
        )));
    }
    let analytic = policy_gradient_analytic(mdp, theta)?;
    let n = theta.values().len();
    let objectives = exec
        .map_range(2 * n, |k| {
            let delta = if k % 2 == 0 { h } else { -h };
            average_reward(mdp, &theta.perturbed(k / 2, delta))
        })
        .into_iter()
        .collect::<Result<Vec<f64>, PgError>>()?;
    let numeric: Vec<f64> = objectives
        .chunks(2)
        .map(|pair| (pair[0] - pair[1]) / (2.0 * h))
        .collect();
    let (mut max_abs_diff, mut max_rel_diff) = (0.0_f64, 0.0_f64);
    for (a, n) in analytic.iter().zip(&numeric) {
        let d = (a - n).abs();
        max_abs_diff = max_abs_diff.max(d);
        max_rel_diff = max_rel_diff.max(d / n.abs().max(REL_DIFF_FLOOR));
    }
    Ok(GradientReport {
        analytic,
        numeric,
        max_abs_diff,
        max_rel_diff,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentRun {
    pub theta: PolicyParams,
    /// `J(theta_k)` before the `k`-th update.
    pub j_trace: Vec<f64>,
    /// `||grad J(theta_k)||_2` before the `k`-th update.
    pub grad_norms: Vec<f64>,
}

/// Gradient ascent stopped by a failed evaluation; `partial` holds
/// everything recorded before the failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("gradient ascent aborted after {} iterations: {source}", partial.j_trace.len())]
pub struct AscentAborted {
    pub source: PgError,
    pub partial: Box<AscentRun>,
}

/// `theta_{k+1} = theta_k + step_size * grad J(theta_k)` for `iters` steps.
pub fn gradient_ascent(
    mdp: &Mdp,
    theta0: &PolicyParams,
    step_size: f64,
    iters: usize,
) -> Result<AscentRun, AscentAborted> {
    let mut run = AscentRun {
        theta: theta0.clone(),
        j_trace: Vec::with_capacity(iters),
        grad_norms: Vec::with_capacity(iters),
    };
    let invalid = if !(step_size > 0.0 && step_size.is_finite()) {
        Some(format!("step size {step_size}"))
    } else if iters == 0 {
        Some("iteration count must be at least 1".to_owned())
    } else {
        None
    };
    if let Some(msg) = invalid {
        return Err(AscentAborted {
            source: PgError::InvalidArgument(msg),
            partial: Box::new(run),
        });
    }
    for _ in 0..iters {
        let eval = match evaluate_softmax(mdp, &run.theta) {
            Ok(e) => e,
            Err(source) => {
                return Err(AscentAborted {
                    source,
                    partial: Box::new(run),
                })
            }
        };
        let grad = gradient_from_eval(mdp, &run.theta, &eval);
        run.j_trace.push(eval.j);
        run.grad_norms
            .push(grad.iter().map(|g| g * g).sum::<f64>().sqrt());
        run.theta = run.theta.stepped(step_size, &grad);
    }
    Ok(run)
}
