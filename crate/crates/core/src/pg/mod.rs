//! Softmax policy gradients under the average-reward criterion.
//!
//! `J(theta)` is the long-run reward rate of the softmax policy, `mu` its
//! stationary distribution and `Q` the differential action value. The
//! analytic gradient is an exact expectation over `mu` and `pi`; no sampling.

mod gradient;
mod params;
mod stationary;

use thiserror::Error;

use crate::mdp::MdpError;

pub use gradient::{
    average_reward, differential_q, evaluate_softmax, gradient_ascent, gradient_check,
    gradient_check_with, policy_gradient_analytic, AscentAborted, AscentRun, AverageRewardEval,
    GradientReport, FD_STEP, REL_DIFF_FLOOR,
};
pub use params::{log_policy_gradient, softmax_policy, PolicyParams};
pub use stationary::{
    chain_stationary, is_irreducible, stationary_distribution, StationaryDistribution,
    MAX_POWER_ITERATIONS, STATIONARY_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PgError {
    #[error("logit for state {state}, action {action} is not finite")]
    NonFiniteTheta { state: usize, action: usize },
    #[error("policy-induced chain is reducible; no unique stationary distribution")]
    ReducibleChain,
    #[error("differential value system is singular")]
    SingularSystem,
    #[error("power iteration did not settle within {0} iterations")]
    PowerIterationStalled(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}
