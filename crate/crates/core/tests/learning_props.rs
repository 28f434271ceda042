use mdp_lab::fixtures::run_example;
use mdp_lab::mdp::{policy_chain, Mdp};
use mdp_lab::output::{csv_bytes, QLEARN_HEADER};
use mdp_lab::pg::{
    differential_q, gradient_check, softmax_policy, stationary_distribution, PolicyParams, FD_STEP,
};
use mdp_lab::qlearn::{
    classify_schedule, q_learning_run, Checkpoint, LearningRateSchedule, QLearnConfig, StartRule,
};
use mdp_lab::random::{random_mdp, seeded_rng, RandomMdpSpec};
use mdp_lab::solver::policy_iteration;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Full-support dynamics, so every softmax policy gives an irreducible,
/// aperiodic chain.
fn ergodic_mdp(seed: u64, ns: usize, na: usize) -> Mdp {
    random_mdp(&mut seeded_rng(seed), &RandomMdpSpec::new(ns, na, 0.9))
}

/// Solves `mu (I - P) = 0`, `sum mu = 1` by replacing one balance equation
/// with the normalisation.
fn stationary_by_linear_solve(n: usize, p: &[f64]) -> Vec<f64> {
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = f64::from(u8::from(i == j)) - p[j * n + i];
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).unwrap().iter().copied().collect()
}

#[test]
fn stationary_distribution_matches_linear_solve() {
    let mdp = ergodic_mdp(5, 8, 3);
    let theta = PolicyParams::gaussian(&mut seeded_rng(6), 8, 3, 1.0);
    let pi = softmax_policy(&theta).unwrap();
    let (p, _) = policy_chain(&mdp, &pi);
    let mu = stationary_distribution(&mdp, &pi).unwrap();
    let oracle = stationary_by_linear_solve(8, &p);
    for (x, y) in mu.0.iter().zip(&oracle) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}

#[test]
fn differential_values_match_truncated_series() {
    // V = sum_t (P^t r - J), which converges for an aperiodic irreducible chain
    // and already satisfies mu . V = 0.
    let mdp = ergodic_mdp(21, 6, 3);
    let theta = PolicyParams::gaussian(&mut seeded_rng(22), 6, 3, 0.7);
    let pi = softmax_policy(&theta).unwrap();
    let (p, r) = policy_chain(&mdp, &pi);
    let mu = stationary_by_linear_solve(6, &p);
    let j: f64 = mu.iter().zip(&r).map(|(m, x)| m * x).sum();

    let mut term: Vec<f64> = r.iter().map(|x| x - j).collect();
    let mut v = vec![0.0; 6];
    for _ in 0..10_000 {
        for (acc, t) in v.iter_mut().zip(&term) {
            *acc += t;
        }
        term = (0..6)
            .map(|s| (0..6).map(|t| p[s * 6 + t] * term[t]).sum())
            .collect();
    }

    let dist = stationary_distribution(&mdp, &pi).unwrap();
    let (q, j_lib) = differential_q(&mdp, &pi, &dist).unwrap();
    assert!((j - j_lib).abs() < 1e-12);
    for s in 0..6 {
        for a in 0..3 {
            let future: f64 = mdp
                .transition_row(s, a)
                .iter()
                .zip(&v)
                .map(|(p, x)| p * x)
                .sum();
            let expected = mdp.reward(s, a) - j + future;
            assert!(
                (q.get(s, a) - expected).abs() < 1e-9,
                "({s},{a}): {} vs {expected}",
                q.get(s, a)
            );
        }
    }
}

#[test]
fn constant_rate_leaves_noise_on_stochastic_rewards() {
    // On deterministic dynamics a constant rate contracts to the exact fixed
    // point; with random transitions it keeps a noise floor that 1/n removes.
    let mdp = random_mdp(&mut seeded_rng(31), &RandomMdpSpec::new(2, 2, 0.5));
    let oracle = policy_iteration(&mdp);
    let final_error = |schedule: LearningRateSchedule, seed: u64| {
        let config = QLearnConfig {
            epsilon: 0.2,
            ..QLearnConfig::new(schedule, 200_000, seed)
        };
        q_learning_run(&mdp, &config, &oracle)
            .unwrap()
            .trace
            .final_error()
            .unwrap()
    };
    let mut harmonic: Vec<f64> = (1..=10)
        .map(|s| final_error(LearningRateSchedule::HarmonicPower { p: 1.0 }, s))
        .collect();
    let mut constant: Vec<f64> = (1..=10)
        .map(|s| final_error(LearningRateSchedule::Constant { c: 0.5 }, s))
        .collect();
    harmonic.sort_by(f64::total_cmp);
    constant.sort_by(f64::total_cmp);
    let (mh, mc) = (harmonic[5], constant[5]);
    assert!(
        mc >= 5.0 * mh,
        "constant median {mc} vs harmonic median {mh}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_gradient_matches_finite_differences(
        seed in any::<u64>(),
        ns in 1usize..=6,
        na in 1usize..=4,
        stddev in 0.0f64..2.0,
    ) {
        let mdp = ergodic_mdp(seed, ns, na);
        let theta = PolicyParams::gaussian(&mut seeded_rng(seed ^ 0xABCD), ns, na, stddev);
        let report = gradient_check(&mdp, &theta, FD_STEP).unwrap();
        prop_assert!(report.max_abs_diff < 1e-8, "{}", report.max_abs_diff);
    }

    #[test]
    fn q_values_stay_within_the_return_bound(seed in any::<u64>(), q_init in -1.0f64..1.0) {
        let mdp = random_mdp(&mut seeded_rng(seed), &RandomMdpSpec::new(5, 3, 0.9).with_support(2));
        let oracle = policy_iteration(&mdp);
        let config = QLearnConfig {
            q_init,
            ..QLearnConfig::new(LearningRateSchedule::HarmonicPower { p: 0.7 }, 5_000, seed)
        };
        let out = q_learning_run(&mdp, &config, &oracle).unwrap();
        let bound = mdp.value_bound().max(q_init.abs());
        for &q in out.q.values() {
            prop_assert!(q.abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn uniform_restarts_visit_every_pair(seed in any::<u64>()) {
        // A fixed start in an absorbing corner would strand the agent; restarts
        // and exploration reach everything.
        let mdp = random_mdp(&mut seeded_rng(seed), &RandomMdpSpec::new(6, 3, 0.9).with_support(1));
        let oracle = policy_iteration(&mdp);
        let config = QLearnConfig {
            start: StartRule::UniformRestart { prob: 0.1 },
            ..QLearnConfig::new(LearningRateSchedule::HarmonicPower { p: 1.0 }, 20_000, seed)
        };
        let out = q_learning_run(&mdp, &config, &oracle).unwrap();
        prop_assert!(out.visits.min() > 0);
        prop_assert_eq!(out.visits.total(), 20_000);
    }

    #[test]
    fn harmonic_classification_matches_closed_form(p in 0.01f64..4.0) {
        let v = classify_schedule(&LearningRateSchedule::HarmonicPower { p }).unwrap();
        prop_assert_eq!(v.rm_valid, Some(p > 0.5 && p <= 1.0));
    }

    #[test]
    fn checkpoint_csv_round_trips(
        rows in prop::collection::vec((any::<u64>(), any::<f64>().prop_filter("finite", |x| x.is_finite()), any::<bool>()), 0..40)
    ) {
        let checkpoints: Vec<Checkpoint> = rows
            .iter()
            .map(|&(step, err, ok)| Checkpoint { step, supnorm_error: err, greedy_match: vec![ok] })
            .collect();
        let bytes = csv_bytes(&checkpoints, &QLEARN_HEADER).unwrap();
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        prop_assert_eq!(reader.headers().unwrap(), &csv::StringRecord::from(QLEARN_HEADER.to_vec()));
        let parsed: Vec<(u64, f64, bool)> = reader
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap())
            })
            .collect();
        prop_assert_eq!(parsed.len(), rows.len());
        for (got, want) in parsed.iter().zip(&rows) {
            prop_assert_eq!(got.0, want.0);
            prop_assert_eq!(got.1.to_bits(), want.1.to_bits());
            prop_assert_eq!(got.2, want.2);
        }
    }
}

#[test]
fn run_example_ascent_finds_the_optimal_policy() {
    let mdp = run_example();
    let run = mdp_lab::pg::gradient_ascent(&mdp, &PolicyParams::zeros(2, 2), 0.1, 2000).unwrap();
    let greedy = run.theta.greedy_policy();
    let best = policy_iteration(&mdp).pi_star;
    assert_eq!(greedy, best);
    for w in run.j_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-10);
    }
}
