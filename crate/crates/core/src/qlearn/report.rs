use serde::Serialize;

use super::{ConvergenceTrace, QLearnError};

/// Finite-run summary of a convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub first_decile_median_err: f64,
    pub last_decile_median_err: f64,
    pub final_err: f64,
    pub greedy_policy_matched: bool,
}

/// Medians over the first and last `max(1, n / 10)` checkpoints.
pub fn convergence_report(trace: &ConvergenceTrace) -> Result<ConvergenceSummary, QLearnError> {
    let n = trace.checkpoints.len();
    if n < 10 {
        return Err(QLearnError::TooFewCheckpoints(n));
    }
    let k = (n / 10).max(1);
    let errors: Vec<f64> = trace.checkpoints.iter().map(|c| c.supnorm_error).collect();
    let last = &trace.checkpoints[n - 1];
    Ok(ConvergenceSummary {
        first_decile_median_err: median(&errors[..k]),
        last_decile_median_err: median(&errors[n - k..]),
        final_err: last.supnorm_error,
        greedy_policy_matched: last.all_match(),
    })
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlearn::Checkpoint;

    fn trace(errors: &[f64]) -> ConvergenceTrace {
        ConvergenceTrace {
            checkpoints: errors
                .iter()
                .enumerate()
                .map(|(i, &e)| Checkpoint {
                    step: (i as u64 + 1) * 10,
                    supnorm_error: e,
                    greedy_match: vec![true, e < 0.5],
                })
                .collect(),
        }
    }

    #[test]
    fn decreasing_trace() {
        let errors: Vec<f64> = (0..100).map(|i| 1.0 - i as f64 * (0.995 / 99.0)).collect();
        let r = convergence_report(&trace(&errors)).unwrap();
        assert!(r.last_decile_median_err < r.first_decile_median_err);
        assert!((r.final_err - 0.005).abs() < 1e-12);
        assert!(r.greedy_policy_matched);
    }

    #[test]
    fn constant_trace() {
        let r = convergence_report(&trace(&[0.7; 20])).unwrap();
        assert_eq!(r.first_decile_median_err, r.last_decile_median_err);
        assert!(!r.greedy_policy_matched);
    }

    #[test]
    fn too_few() {
        assert_eq!(
            convergence_report(&trace(&[0.1; 9])),
            Err(QLearnError::TooFewCheckpoints(9))
        );
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
