//! Small MDPs and hierarchies shipped with the crate.

use crate::hierarchy::{RewardHierarchy, RewardTable};
use crate::mdp::{Mdp, MdpDocument};

pub const RUN_EXAMPLE_JSON: &str = include_str!("../fixtures/runexample.json");
pub const RUN_EXAMPLE_REWARD_A_JSON: &str = include_str!("../fixtures/runexample_reward_a.json");
pub const RUN_EXAMPLE_REWARD_B_JSON: &str = include_str!("../fixtures/runexample_reward_b.json");
pub const EGOISM_DYNAMICS_JSON: &str = include_str!("../fixtures/egoism_dynamics.json");
pub const EGOISM_HIERARCHY_JSON: &str = include_str!("../fixtures/egoism_hierarchy.json");

/// Two states, `stay` self-loops and `go` switches; only `(s1, stay)` pays 1.
/// `gamma = 0.5`.
pub fn run_example() -> Mdp {
    Mdp::from_json(RUN_EXAMPLE_JSON).expect("fixture is valid")
}

/// Reward tables A (pays at `(s1, stay)`) and B (pays at `(s0, stay)`) over
/// the run-example dynamics.
pub fn run_example_rewards() -> (RewardTable, RewardTable) {
    let m = run_example();
    (
        RewardTable::from_json(&m, RUN_EXAMPLE_REWARD_A_JSON).expect("fixture is valid"),
        RewardTable::from_json(&m, RUN_EXAMPLE_REWARD_B_JSON).expect("fixture is valid"),
    )
}

/// Dynamics where the individual and humanity levels prefer different actions.
pub fn egoism_dynamics() -> Mdp {
    MdpDocument::from_json(EGOISM_DYNAMICS_JSON)
        .and_then(MdpDocument::into_dynamics)
        .expect("fixture is valid")
}

pub fn egoism_hierarchy() -> RewardHierarchy {
    RewardHierarchy::from_json(&egoism_dynamics(), EGOISM_HIERARCHY_JSON).expect("fixture is valid")
}

/// One state, two actions; `a0` pays 1 and `a1` pays 0, so the best average
/// reward is 1.
pub fn two_arm_bandit() -> Mdp {
    Mdp::new(
        vec!["s".into()],
        vec!["a0".into(), "a1".into()],
        0.5,
        vec![1.0, 1.0],
        vec![1.0, 0.0],
    )
    .expect("fixture is valid")
}
