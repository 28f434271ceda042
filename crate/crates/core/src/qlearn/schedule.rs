use serde::{Serialize, Serializer};

use super::QLearnError;

/// Learning-rate rule indexed by the per-pair visit count `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum LearningRateSchedule {
    /// `beta_n = n^(-p)`.
    HarmonicPower { p: f64 },
    /// `beta_n = c`.
    Constant { c: f64 },
    /// `beta_n = rates[n - 1]`; past the end the last rate is held.
    Table { rates: Vec<f64>, tail: TableTail },
}

/// What a table promises about rates past its last entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableTail {
    /// Nothing is promised; classification falls back to a heuristic.
    Unspecified,
    /// The last rate repeats forever.
    HoldLast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Pass,
    Fail,
    Unknown,
}

/// Robbins–Monro verdict: (i) `sum beta = inf`, (ii) `sum beta^2 < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduleVerdict {
    pub condition_i: Condition,
    pub condition_ii: Condition,
    /// `None` means unknown.
    #[serde(serialize_with = "bool_or_unknown")]
    pub rm_valid: Option<bool>,
}

fn bool_or_unknown<S: Serializer>(v: &Option<bool>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(b) => s.serialize_bool(*b),
        None => s.serialize_str("unknown"),
    }
}

impl ScheduleVerdict {
    fn new(condition_i: Condition, condition_ii: Condition) -> Self {
        use Condition::*;
        let rm_valid = match (condition_i, condition_ii) {
            (Pass, Pass) => Some(true),
            (Fail, _) | (_, Fail) => Some(false),
            _ => None,
        };
        Self {
            condition_i,
            condition_ii,
            rm_valid,
        }
    }
}

/// Minimum table length for the decay-exponent heuristic.
pub const HEURISTIC_MIN_LEN: usize = 16;
/// Distance the fitted exponent must keep from a boundary (1/2 or 1).
pub const HEURISTIC_MARGIN: f64 = 0.1;

impl LearningRateSchedule {
    /// `beta_n` for visit count `n >= 1`.
    pub fn rate(&self, n: u64) -> f64 {
        let n = n.max(1);
        match self {
            Self::HarmonicPower { p } => (n as f64).powf(-p),
            Self::Constant { c } => *c,
            Self::Table { rates, .. } => {
                let i = usize::try_from(n - 1).unwrap_or(usize::MAX);
                rates.get(i).or(rates.last()).copied().unwrap_or(0.0)
            }
        }
    }

    /// Checks `0 <= beta_n < 1` for every `n >= 2`. `beta_1 = 1` is allowed:
    /// the first update then overwrites the initial value, which is what the
    /// `1/n` schedule does.
    pub fn validate(&self) -> Result<(), QLearnError> {
        match self {
            Self::HarmonicPower { p } => {
                if !p.is_finite() {
                    return Err(QLearnError::InvalidSchedule(format!("exponent p = {p}")));
                }
                if *p <= 0.0 {
                    return Err(QLearnError::RateAtLeastOne {
                        n: 2,
                        rate: 2f64.powf(-p),
                    });
                }
            }
            Self::Constant { c } => check_rate(1, *c, false)?,
            Self::Table { rates, tail } => {
                if rates.is_empty() {
                    return Err(QLearnError::InvalidSchedule("empty rate table".into()));
                }
                for (i, &r) in rates.iter().enumerate() {
                    check_rate(i as u64 + 1, r, i == 0)?;
                }
                // a held tail repeats the last rate from visit len + 1 on
                if *tail == TableTail::HoldLast {
                    check_rate(rates.len() as u64 + 1, rates[rates.len() - 1], false)?;
                }
            }
        }
        Ok(())
    }
}

fn check_rate(n: u64, rate: f64, one_allowed: bool) -> Result<(), QLearnError> {
    if !rate.is_finite() {
        return Err(QLearnError::InvalidSchedule(format!(
            "rate {rate} at visit {n}"
        )));
    }
    if rate < 0.0 {
        return Err(QLearnError::NegativeRate { n, rate });
    }
    if rate > 1.0 || (rate == 1.0 && !one_allowed) {
        return Err(QLearnError::RateAtLeastOne { n, rate });
    }
    Ok(())
}

/// Classifies a schedule against the two Robbins–Monro series conditions.
///
/// Harmonic powers and constants are decided analytically. A table with a
/// held tail is a constant in the limit. A table without a tail promise is
/// judged by the decay exponent fitted (log-log least squares) to the second
/// half of its entries; the verdict is `unknown` when the table is too short,
/// the tail hits zero, or the exponent lands within `HEURISTIC_MARGIN` of a
/// boundary.
pub fn classify_schedule(schedule: &LearningRateSchedule) -> Result<ScheduleVerdict, QLearnError> {
    use Condition::*;
    schedule.validate()?;
    let verdict = match schedule {
        LearningRateSchedule::HarmonicPower { p } => {
            ScheduleVerdict::new(pass_if(*p <= 1.0), pass_if(*p > 0.5))
        }
        LearningRateSchedule::Constant { c } => constant_verdict(*c),
        LearningRateSchedule::Table {
            rates,
            tail: TableTail::HoldLast,
        } => constant_verdict(*rates.last().expect("validated non-empty")),
        LearningRateSchedule::Table {
            rates,
            tail: TableTail::Unspecified,
        } => match fitted_decay_exponent(rates) {
            None => ScheduleVerdict::new(Unknown, Unknown),
            Some(p) => {
                let cond_i = if p < 1.0 - HEURISTIC_MARGIN {
                    Pass
                } else if p > 1.0 + HEURISTIC_MARGIN {
                    Fail
                } else {
                    Unknown
                };
                let cond_ii = if p > 0.5 + HEURISTIC_MARGIN {
                    Pass
                } else if p < 0.5 - HEURISTIC_MARGIN {
                    Fail
                } else {
                    Unknown
                };
                ScheduleVerdict::new(cond_i, cond_ii)
            }
        },
    };
    Ok(verdict)
}

fn pass_if(b: bool) -> Condition {
    if b {
        Condition::Pass
    } else {
        Condition::Fail
    }
}

fn constant_verdict(c: f64) -> ScheduleVerdict {
    if c > 0.0 {
        ScheduleVerdict::new(Condition::Pass, Condition::Fail)
    } else {
        ScheduleVerdict::new(Condition::Fail, Condition::Pass)
    }
}

/// `p` such that `beta_n ~ C n^(-p)` over the second half of the table.
fn fitted_decay_exponent(rates: &[f64]) -> Option<f64> {
    if rates.len() < HEURISTIC_MIN_LEN {
        return None;
    }
    let start = rates.len() / 2;
    let points: Vec<(f64, f64)> = rates[start..]
        .iter()
        .enumerate()
        .map(|(i, &r)| (((start + i + 1) as f64).ln(), r))
        .collect();
    if points.iter().any(|&(_, r)| r <= 0.0) {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}
