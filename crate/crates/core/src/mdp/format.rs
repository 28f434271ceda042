use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Mdp, MdpError};

/// A reward cell as written in the file. Only scalars are accepted; the
/// nested form is recognised so that `R(s, a, s')` files get a clear error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardEntry {
    Scalar(f64),
    PerSuccessor(IndexMap<String, serde_json::Value>),
}

/// On-disk MDP layout.
///
/// ```json
/// { "states": ["s0","s1"], "actions": ["stay","go"], "gamma": 0.5,
///   "transitions": {"s0": {"stay": {"s0": 1.0}, "go": {"s1": 1.0}}, ...},
///   "rewards": {"s0": {"stay": 0.0, "go": 0.0}, ...} }
/// ```
///
/// Omitted transition targets have probability 0. `rewards` may be left out
/// only when the file describes dynamics alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub gamma: f64,
    pub transitions: IndexMap<String, IndexMap<String, IndexMap<String, f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<IndexMap<String, IndexMap<String, RewardEntry>>>,
}

impl MdpDocument {
    pub fn from_json(text: &str) -> Result<Self, MdpError> {
        serde_json::from_str(text).map_err(|e| MdpError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("MDP documents always serialize")
    }

    pub(super) fn from_mdp(mdp: &Mdp) -> Self {
        let mut transitions = IndexMap::new();
        let mut rewards = IndexMap::new();
        for (s, sname) in mdp.states().iter().enumerate() {
            let mut trow = IndexMap::new();
            let mut rrow = IndexMap::new();
            for (a, aname) in mdp.actions().iter().enumerate() {
                let targets: IndexMap<String, f64> = mdp
                    .transition_row(s, a)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(t, &p)| (mdp.states()[t].clone(), p))
                    .collect();
                trow.insert(aname.clone(), targets);
                rrow.insert(aname.clone(), RewardEntry::Scalar(mdp.reward(s, a)));
            }
            transitions.insert(sname.clone(), trow);
            rewards.insert(sname.clone(), rrow);
        }
        Self {
            states: mdp.states().to_vec(),
            actions: mdp.actions().to_vec(),
            gamma: mdp.gamma(),
            transitions,
            rewards: Some(rewards),
        }
    }

    /// Validates the document into a complete MDP; rewards are required.
    pub fn into_mdp(self) -> Result<Mdp, MdpError> {
        self.build(true)
    }

    /// Validates dynamics only. Any `rewards` block is ignored and the
    /// resulting MDP carries an all-zero reward table.
    pub fn into_dynamics(self) -> Result<Mdp, MdpError> {
        self.build(false)
    }

    fn build(self, with_rewards: bool) -> Result<Mdp, MdpError> {
        let ns = self.states.len();
        let na = self.actions.len();
        let state_idx = |name: &str| {
            self.states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| MdpError::UnknownState(name.to_owned()))
        };
        let action_idx = |name: &str| {
            self.actions
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| MdpError::UnknownAction(name.to_owned()))
        };

        let mut transitions = vec![0.0; ns * na * ns];
        let mut seen = vec![false; ns * na];
        for (sname, row) in &self.transitions {
            let s = state_idx(sname)?;
            for (aname, targets) in row {
                let a = action_idx(aname)?;
                seen[s * na + a] = true;
                for (tname, &p) in targets {
                    let t = state_idx(tname)?;
                    transitions[(s * na + a) * ns + t] = p;
                }
            }
        }
        if let Some(i) = seen.iter().position(|&x| !x) {
            return Err(MdpError::MissingEntry {
                what: "transition row",
                state: self.states[i / na].clone(),
                action: self.actions[i % na].clone(),
            });
        }

        let mut rewards = vec![0.0; ns * na];
        if with_rewards {
            let table = self
                .rewards
                .as_ref()
                .ok_or_else(|| MdpError::MissingEntry {
                    what: "reward",
                    state: self.states.first().cloned().unwrap_or_default(),
                    action: self.actions.first().cloned().unwrap_or_default(),
                })?;
            let mut seen = vec![false; ns * na];
            for (sname, row) in table {
                let s = state_idx(sname)?;
                for (aname, entry) in row {
                    let a = action_idx(aname)?;
                    match entry {
                        RewardEntry::Scalar(r) => rewards[s * na + a] = *r,
                        RewardEntry::PerSuccessor(_) => {
                            return Err(MdpError::SuccessorReward {
                                state: sname.clone(),
                                action: aname.clone(),
                            })
                        }
                    }
                    seen[s * na + a] = true;
                }
            }
            if let Some(i) = seen.iter().position(|&x| !x) {
                return Err(MdpError::MissingEntry {
                    what: "reward",
                    state: self.states[i / na].clone(),
                    action: self.actions[i % na].clone(),
                });
            }
        }

        Mdp::new(self.states, self.actions, self.gamma, transitions, rewards)
    }
}
