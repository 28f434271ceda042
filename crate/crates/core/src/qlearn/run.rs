use rand::Rng;

use super::{LearningRateSchedule, QLearnError};
use crate::mdp::{argmax_lowest, argmax_set, Mdp, QTable, Transition};
use crate::par::Exec;
use crate::random::seeded_rng;
use crate::solver::{SolveResult, ARGMAX_TOLERANCE};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_RESTART_PROB: f64 = 0.1;

/// Where the behaviour trajectory starts and whether it is reset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartRule {
    /// Start at this state index and never reset.
    Fixed(usize),
    /// Start at a uniformly random state; before each step, with probability
    /// `prob`, jump to a uniformly random state.
    UniformRestart { prob: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearnConfig {
    pub schedule: LearningRateSchedule,
    /// ε of the ε-greedy behaviour policy.
    pub epsilon: f64,
    pub steps: u64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub q_init: f64,
    pub start: StartRule,
}

impl QLearnConfig {
    /// Defaults: ε = 0.1, 100 checkpoints, `Q = 0`, uniform restarts with
    /// probability 0.1.
    pub fn new(schedule: LearningRateSchedule, steps: u64, seed: u64) -> Self {
        Self {
            schedule,
            epsilon: DEFAULT_EPSILON,
            steps,
            seed,
            checkpoint_every: (steps / 100).max(1),
            q_init: 0.0,
            start: StartRule::UniformRestart {
                prob: DEFAULT_RESTART_PROB,
            },
        }
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<(), QLearnError> {
        self.schedule.validate()?;
        let bad = |msg: String| Err(QLearnError::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint interval must be at least 1".into());
        }
        if !self.q_init.is_finite() {
            return bad(format!("initial Q value {} is not finite", self.q_init));
        }
        match self.start {
            StartRule::Fixed(s) if s >= mdp.n_states() => {
                bad(format!("start state {s} out of range"))
            }
            StartRule::UniformRestart { prob } if !(0.0..=1.0).contains(&prob) => {
                bad(format!("restart probability {prob} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

/// Updates applied per `(state, action)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounter {
    n_actions: usize,
    counts: Vec<u64>,
}

impl VisitCounter {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            counts: vec![0; n_states * n_actions],
        }
    }

    /// Records one more visit and returns the new count.
    pub fn bump(&mut self, s: usize, a: usize) -> u64 {
        let c = &mut self.counts[s * self.n_actions + a];
        *c += 1;
        *c
    }

    pub fn get(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.n_actions + a]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn min(&self) -> u64 {
        self.counts.iter().copied().min().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    /// `||Q - Q*||_inf`.
    pub supnorm_error: f64,
    /// Per state: does the greedy set of `Q` meet the argmax set of `Q*`?
    pub greedy_match: Vec<bool>,
}

impl Checkpoint {
    pub fn all_match(&self) -> bool {
        self.greedy_match.iter().all(|&m| m)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub checkpoints: Vec<Checkpoint>,
}

impl ConvergenceTrace {
    pub fn final_error(&self) -> Option<f64> {
        self.checkpoints.last().map(|c| c.supnorm_error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearnOutcome {
    pub trace: ConvergenceTrace,
    pub q: QTable,
    pub visits: VisitCounter,
}

/// `Q(s, a) += alpha (r + gamma max_a' Q(s', a') - Q(s, a))`.
pub fn q_update(q: &mut QTable, t: &Transition, alpha: f64, gamma: f64) {
    let old = q.get(t.state, t.action);
    let target = t.reward + gamma * q.max(t.next);
    q.set(t.state, t.action, old + alpha * (target - old));
}

fn checkpoint(step: u64, q: &QTable, oracle: &SolveResult) -> Checkpoint {
    let greedy_match = (0..q.n_states())
        .map(|s| {
            let learned = argmax_set(q.row(s), 0.0);
            let optimal = argmax_set(oracle.q_star.row(s), ARGMAX_TOLERANCE);
            learned.iter().any(|a| optimal.contains(a))
        })
        .collect();
    Checkpoint {
        step,
        supnorm_error: q.sup_distance(&oracle.q_star),
        greedy_match,
    }
}

/// Runs ε-greedy Q-learning for `config.steps` environment steps.
///
/// Random draws per step, in order: with uniform restarts, one `f64` for the
/// restart decision and, on restart, one state index; one `f64` for
/// exploration and, when exploring, one action index; one `f64` for the
/// successor. A uniform-restart run first draws its start state.
pub fn q_learning_run(
    mdp: &Mdp,
    config: &QLearnConfig,
    oracle: &SolveResult,
) -> Result<QLearnOutcome, QLearnError> {
    config.validate(mdp)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if oracle.q_star.n_states() != ns || oracle.q_star.n_actions() != na {
        return Err(QLearnError::OracleMismatch {
            oracle_states: oracle.q_star.n_states(),
            oracle_actions: oracle.q_star.n_actions(),
            states: ns,
            actions: na,
        });
    }

    let mut rng = seeded_rng(config.seed);
    let mut q = QTable::filled(ns, na, config.q_init);
    let mut visits = VisitCounter::new(ns, na);
    let mut trace = ConvergenceTrace::default();

    let mut state = match config.start {
        StartRule::Fixed(s) => s,
        StartRule::UniformRestart { .. } => rng.random_range(0..ns),
    };
    for step in 1..=config.steps {
        if let StartRule::UniformRestart { prob } = config.start {
            if rng.random::<f64>() < prob {
                state = rng.random_range(0..ns);
            }
        }
        let action = if rng.random::<f64>() < config.epsilon {
            rng.random_range(0..na)
        } else {
            argmax_lowest(q.row(state))
        };
        let t = mdp.step_index(state, action, &mut rng);
        let n = visits.bump(state, action);
        q_update(&mut q, &t, config.schedule.rate(n), mdp.gamma());
        state = t.next;

        if step % config.checkpoint_every == 0 || step == config.steps {
            trace.checkpoints.push(checkpoint(step, &q, oracle));
        }
    }
    Ok(QLearnOutcome { trace, q, visits })
}

/// Independent runs, one per seed, returned in seed order.
pub fn q_learning_sweep(
    mdp: &Mdp,
    config: &QLearnConfig,
    seeds: &[u64],
    oracle: &SolveResult,
) -> Result<Vec<QLearnOutcome>, QLearnError> {
    q_learning_sweep_with(Exec::default(), mdp, config, seeds, oracle)
}

pub fn q_learning_sweep_with(
    exec: Exec,
    mdp: &Mdp,
    config: &QLearnConfig,
    seeds: &[u64],
    oracle: &SolveResult,
) -> Result<Vec<QLearnOutcome>, QLearnError> {
    exec.map(seeds, |&seed| {
        let cfg = QLearnConfig {
            seed,
            ..config.clone()
        };
        q_learning_run(mdp, &cfg, oracle)
    })
    .into_iter()
    .collect()
}
