//! Multilevel reward composition and argmax-divergence analysis.
//!
//! A hierarchy stacks per-level reward tables (individual, group, humanity,
//! ...) over shared dynamics. Each level may pass its rewards through a
//! monotone piecewise-linear utility filter before the weighted sum. Two
//! reward definitions are compared by whether their optimal action sets
//! overlap, state by state.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{argmax_set, Mdp, MdpError};
use crate::par::Exec;
use crate::solver::{value_iteration, SolveResult, ARGMAX_TOLERANCE};

/// Precision of the value iteration behind every comparison.
pub const COMPARE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HierarchyError {
    #[error("reward grid mismatch: {0}")]
    GridMismatch(String),
    #[error("utility filter is not monotone: {0}")]
    NonMonotoneFilter(String),
    #[error("invalid utility filter: {0}")]
    InvalidFilter(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("level weights sum to zero")]
    ZeroTotalWeight,
    #[error("composed reward for ({state}, {action}) is not finite")]
    NonFiniteComposition { state: usize, action: usize },
    #[error("unknown level '{0}'")]
    UnknownLevel(String),
    #[error("weight grid is empty")]
    EmptyGrid,
    #[error("malformed hierarchy document: {0}")]
    Parse(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// A full `[state][action]` reward table over a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

type RewardMap = IndexMap<String, IndexMap<String, f64>>;

impl RewardTable {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        values: Vec<f64>,
    ) -> Result<Self, HierarchyError> {
        if values.len() != n_states * n_actions {
            return Err(HierarchyError::GridMismatch(format!(
                "{} entries for a {n_states}x{n_actions} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HierarchyError::GridMismatch(
                "reward table has a non-finite entry".into(),
            ));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    /// The reward table an MDP already carries.
    pub fn of(mdp: &Mdp) -> Self {
        Self {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            values: mdp.rewards().to_vec(),
        }
    }

    /// Reads `{state: {action: reward}}`, which must cover the grid of `dynamics`.
    pub fn from_json(dynamics: &Mdp, text: &str) -> Result<Self, HierarchyError> {
        let map: RewardMap =
            serde_json::from_str(text).map_err(|e| HierarchyError::Parse(e.to_string()))?;
        Self::from_map(dynamics, &map)
    }

    fn from_map(dynamics: &Mdp, map: &RewardMap) -> Result<Self, HierarchyError> {
        let (ns, na) = (dynamics.n_states(), dynamics.n_actions());
        let mut values = vec![f64::NAN; ns * na];
        for (sname, row) in map {
            let s = dynamics
                .state_index(sname)
                .map_err(|_| HierarchyError::GridMismatch(format!("unknown state '{sname}'")))?;
            for (aname, &r) in row {
                let a = dynamics.action_index(aname).map_err(|_| {
                    HierarchyError::GridMismatch(format!("unknown action '{aname}'"))
                })?;
                values[s * na + a] = r;
            }
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(HierarchyError::GridMismatch(format!(
                "no reward for ({}, {})",
                dynamics.states()[i / na],
                dynamics.actions()[i % na]
            )));
        }
        Self::new(ns, na, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    /// `scale * R + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        Self {
            values: self.values.iter().map(|r| scale * r + shift).collect(),
            ..self.clone()
        }
    }

    fn check_grid(&self, dynamics: &Mdp) -> Result<(), HierarchyError> {
        if self.n_states != dynamics.n_states() || self.n_actions != dynamics.n_actions() {
            return Err(HierarchyError::GridMismatch(format!(
                "table is {}x{}, dynamics are {}x{}",
                self.n_states,
                self.n_actions,
                dynamics.n_states(),
                dynamics.n_actions()
            )));
        }
        Ok(())
    }
}

/// Monotone piecewise-linear map through `(input, output)` knots, extended
/// linearly past both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityFilter {
    knots: Vec<(f64, f64)>,
}

impl UtilityFilter {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, HierarchyError> {
        if knots.len() < 2 {
            return Err(HierarchyError::InvalidFilter(format!(
                "{} knot(s); at least 2 are needed",
                knots.len()
            )));
        }
        if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(HierarchyError::InvalidFilter("non-finite knot".into()));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(HierarchyError::NonMonotoneFilter(format!(
                    "inputs {} and {} are not strictly increasing",
                    w[0].0, w[1].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(HierarchyError::NonMonotoneFilter(format!(
                    "output drops from {} to {}",
                    w[0].1, w[1].1
                )));
            }
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn apply(&self, x: f64) -> f64 {
        let k = &self.knots;
        // segment index: the last one whose left knot is <= x, clamped to the ends
        let i = k[1..k.len() - 1]
            .iter()
            .take_while(|(kx, _)| *kx <= x)
            .count();
        let ((x0, y0), (x1, y1)) = (k[i], k[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardLevel {
    pub name: String,
    pub table: RewardTable,
    pub weight: f64,
    pub filter: Option<UtilityFilter>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardHierarchy {
    levels: Vec<RewardLevel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelDocument {
    name: String,
    weight: f64,
    rewards: RewardMap,
    #[serde(default)]
    filter: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HierarchyDocument {
    levels: Vec<LevelDocument>,
}

impl RewardHierarchy {
    pub fn new(levels: Vec<RewardLevel>) -> Result<Self, HierarchyError> {
        let first = levels
            .first()
            .ok_or_else(|| HierarchyError::GridMismatch("hierarchy has no levels".into()))?;
        let (ns, na) = (first.table.n_states, first.table.n_actions);
        for l in &levels {
            if (l.table.n_states, l.table.n_actions) != (ns, na) {
                return Err(HierarchyError::GridMismatch(format!(
                    "level '{}' is {}x{}, level '{}' is {ns}x{na}",
                    l.name, l.table.n_states, l.table.n_actions, first.name
                )));
            }
            if !(l.weight >= 0.0 && l.weight.is_finite()) {
                return Err(HierarchyError::InvalidWeight(format!(
                    "level '{}' has weight {}",
                    l.name, l.weight
                )));
            }
        }
        if levels.iter().map(|l| l.weight).sum::<f64>() <= 0.0 {
            return Err(HierarchyError::ZeroTotalWeight);
        }
        Ok(Self { levels })
    }

    /// Reads the hierarchy JSON format against the grid of `dynamics`.
    pub fn from_json(dynamics: &Mdp, text: &str) -> Result<Self, HierarchyError> {
        let doc: HierarchyDocument =
            serde_json::from_str(text).map_err(|e| HierarchyError::Parse(e.to_string()))?;
        let levels = doc
            .levels
            .into_iter()
            .map(|l| {
                Ok(RewardLevel {
                    table: RewardTable::from_map(dynamics, &l.rewards)?,
                    filter: l.filter.map(UtilityFilter::new).transpose()?,
                    name: l.name,
                    weight: l.weight,
                })
            })
            .collect::<Result<Vec<_>, HierarchyError>>()?;
        Self::new(levels)
    }

    pub fn levels(&self) -> &[RewardLevel] {
        &self.levels
    }

    pub fn level_index(&self, name: &str) -> Result<usize, HierarchyError> {
        self.levels
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| HierarchyError::UnknownLevel(name.to_owned()))
    }

    /// Same hierarchy with one level re-weighted.
    pub fn with_weight(&self, level: usize, weight: f64) -> Result<Self, HierarchyError> {
        if level >= self.levels.len() {
            return Err(HierarchyError::UnknownLevel(format!("#{level}")));
        }
        let mut levels = self.levels.clone();
        levels[level].weight = weight;
        Self::new(levels)
    }
}

/// `R(s, a) = sum_l weight_l * filter_l(table_l(s, a))`, identity where no
/// filter is given.
pub fn compose_reward(hierarchy: &RewardHierarchy) -> Result<RewardTable, HierarchyError> {
    let first = &hierarchy.levels[0].table;
    let (ns, na) = (first.n_states, first.n_actions);
    let mut values = vec![0.0; ns * na];
    for level in &hierarchy.levels {
        for (out, &r) in values.iter_mut().zip(&level.table.values) {
            let u = level.filter.as_ref().map_or(r, |f| f.apply(r));
            *out += level.weight * u;
        }
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(HierarchyError::NonFiniteComposition {
            state: i / na,
            action: i % na,
        });
    }
    RewardTable::new(ns, na, values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateDivergence {
    #[serde(rename = "argmax_set_A")]
    pub argmax_set_a: Vec<String>,
    #[serde(rename = "argmax_set_B")]
    pub argmax_set_b: Vec<String>,
    pub disjoint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub per_state: IndexMap<String, StateDivergence>,
    /// Fraction of states whose optimal action sets are disjoint.
    pub divergence: f64,
    /// Sup-norm gap between the two `V*`, each min-max normalised to
    /// `[0, 1]`. Informational only.
    pub value_gap: f64,
}

struct Optimum {
    solution: SolveResult,
    argmax: Vec<Vec<usize>>,
}

fn optimum(dynamics: &Mdp, rewards: &RewardTable) -> Result<Optimum, HierarchyError> {
    rewards.check_grid(dynamics)?;
    let mdp = dynamics.with_rewards(rewards.values.clone())?;
    let solution = value_iteration(&mdp, COMPARE_EPSILON).expect("positive epsilon");
    let argmax = (0..mdp.n_states())
        .map(|s| argmax_set(solution.q_star.row(s), ARGMAX_TOLERANCE))
        .collect();
    Ok(Optimum { solution, argmax })
}

fn normalised(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    v.iter()
        .map(|x| if range > 0.0 { (x - lo) / range } else { 0.0 })
        .collect()
}

fn divergence_between(dynamics: &Mdp, a: &Optimum, b: &Optimum) -> DivergenceReport {
    let names = |set: &[usize]| set.iter().map(|&i| dynamics.actions()[i].clone()).collect();
    let mut per_state = IndexMap::new();
    let mut disjoint_count = 0;
    for (s, sname) in dynamics.states().iter().enumerate() {
        let disjoint = !a.argmax[s].iter().any(|x| b.argmax[s].contains(x));
        disjoint_count += usize::from(disjoint);
        per_state.insert(
            sname.clone(),
            StateDivergence {
                argmax_set_a: names(&a.argmax[s]),
                argmax_set_b: names(&b.argmax[s]),
                disjoint,
            },
        );
    }
    let (va, vb) = (
        normalised(&a.solution.v_star.0),
        normalised(&b.solution.v_star.0),
    );
    let value_gap = va
        .iter()
        .zip(&vb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    DivergenceReport {
        per_state,
        divergence: disjoint_count as f64 / dynamics.n_states() as f64,
        value_gap,
    }
}

/// Solves the dynamics under both reward tables and compares optimal action
/// sets (actions within 1e-7 of the best count as optimal).
pub fn compare_policies(
    dynamics: &Mdp,
    reward_a: &RewardTable,
    reward_b: &RewardTable,
) -> Result<DivergenceReport, HierarchyError> {
    let a = optimum(dynamics, reward_a)?;
    let b = optimum(dynamics, reward_b)?;
    Ok(divergence_between(dynamics, &a, &b))
}

/// For each weight in `grid`, re-weights `level`, recomposes, and reports the
/// divergence from the composition with that level's weight at 0.
pub fn sweep_weights(
    dynamics: &Mdp,
    hierarchy: &RewardHierarchy,
    level: usize,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, HierarchyError> {
    sweep_weights_with(Exec::default(), dynamics, hierarchy, level, grid)
}

pub fn sweep_weights_with(
    exec: Exec,
    dynamics: &Mdp,
    hierarchy: &RewardHierarchy,
    level: usize,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, HierarchyError> {
    if grid.is_empty() {
        return Err(HierarchyError::EmptyGrid);
    }
    let baseline = optimum(
        dynamics,
        &compose_reward(&hierarchy.with_weight(level, 0.0)?)?,
    )?;
    exec.map(grid, |&w| {
        let table = compose_reward(&hierarchy.with_weight(level, w)?)?;
        let other = optimum(dynamics, &table)?;
        Ok((
            w,
            divergence_between(dynamics, &baseline, &other).divergence,
        ))
    })
    .into_iter()
    .collect()
}
