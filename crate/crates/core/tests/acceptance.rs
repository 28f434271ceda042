//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::Path;
use std::process::Command;

use rand::Rng;

use mdp_lab::fixtures::{
    egoism_dynamics, egoism_hierarchy, run_example, run_example_rewards, two_arm_bandit,
};
use mdp_lab::hierarchy::{compare_policies, sweep_weights, RewardTable};
use mdp_lab::mdp::{policy_evaluate, Mdp};
use mdp_lab::pg::{
    average_reward, gradient_ascent, gradient_check, is_irreducible, log_policy_gradient,
    softmax_policy, PolicyParams, FD_STEP,
};
use mdp_lab::qlearn::{
    classify_schedule, q_learning_sweep, LearningRateSchedule, QLearnConfig, StartRule,
    DEFAULT_RESTART_PROB,
};
use mdp_lab::random::{random_mdp, seeded_rng, RandomMdpSpec};
use mdp_lab::solver::{
    bellman_optimality_backup, policy_iteration, value_iteration, verify_theorem1,
};

const GAMMAS: [f64; 3] = [0.5, 0.9, 0.95];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// The hundred discounted MDPs shared by criteria 1 and 2.
fn discounted_suite() -> Vec<Mdp> {
    let mut rng = seeded_rng(20_240_101);
    (0..100)
        .map(|i| {
            let ns = rng.random_range(1..=20);
            let na = rng.random_range(1..=5);
            random_mdp(&mut rng, &RandomMdpSpec::new(ns, na, GAMMAS[i % 3]))
        })
        .collect()
}

fn criterion_1(suite: &[Mdp]) -> Outcome {
    let mut worst_eval = 0.0_f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut nondeterministic = 0;
    for (i, mdp) in suite.iter().enumerate() {
        let pi = policy_iteration(mdp);
        if !pi.pi_star.is_deterministic() {
            nondeterministic += 1;
        }
        let v_pi = policy_evaluate(mdp, &pi.pi_star).unwrap();
        let v_star = value_iteration(mdp, 1e-10).unwrap().v_star;
        worst_eval = worst_eval.max(v_pi.sup_distance(&v_star));
        let report = verify_theorem1(mdp, 200, &mut seeded_rng(1000 + i as u64)).unwrap();
        violations += report.violations.len();
        worst_excess = worst_excess.max(report.max_excess);
    }
    outcome(
        nondeterministic == 0 && worst_eval < 1e-7 && violations == 0,
        format!(
            "100 MDPs: nondeterministic={nondeterministic} max|V_pi - V*|={worst_eval:.3e} \
             violations={violations} max excess={worst_excess:.3e}"
        ),
    )
}

fn criterion_2(suite: &[Mdp]) -> Outcome {
    let mut contraction_failures = 0;
    let mut worst_max_q = 0.0_f64;
    let mut worst_agreement = 0.0_f64;
    let mut rng = seeded_rng(77);
    for mdp in suite {
        let n = mdp.n_states();
        for _ in 0..100 {
            let scale = rng.random_range(0.1..10.0);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
            let lhs = sup(
                &bellman_optimality_backup(mdp, &v),
                &bellman_optimality_backup(mdp, &w),
            );
            if lhs > mdp.gamma() * sup(&v, &w) + 1e-12 {
                contraction_failures += 1;
            }
        }
        let vi = value_iteration(mdp, 1e-8).unwrap();
        for s in 0..n {
            worst_max_q = worst_max_q.max((vi.v_star.get(s) - vi.q_star.max(s)).abs());
        }
        let pi = policy_iteration(mdp);
        worst_agreement = worst_agreement.max(vi.v_star.sup_distance(&pi.v_star));
    }
    outcome(
        contraction_failures == 0 && worst_max_q < 1e-9 && worst_agreement < 1e-6,
        format!(
            "contraction failures={contraction_failures}/10000 max|V*-maxQ*|={worst_max_q:.3e} \
             max|VI-PI|={worst_agreement:.3e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut wrong = Vec::new();
    for p in [0.4, 0.5, 0.6, 0.75, 1.0, 1.5, 2.0] {
        let expected = p > 0.5 && p <= 1.0;
        let v = classify_schedule(&LearningRateSchedule::HarmonicPower { p }).unwrap();
        if v.rm_valid != Some(expected) {
            wrong.push(format!("p={p}"));
        }
    }
    for c in [1e-6, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.999_999] {
        let v = classify_schedule(&LearningRateSchedule::Constant { c }).unwrap();
        if v.condition_ii != mdp_lab::qlearn::Condition::Fail || v.rm_valid != Some(false) {
            wrong.push(format!("c={c}"));
        }
    }
    outcome(
        wrong.is_empty(),
        format!("harmonic grid and constants misclassified: {wrong:?}"),
    )
}

fn q_protocol(schedule: LearningRateSchedule) -> Vec<(f64, bool)> {
    let mdp = run_example();
    let oracle = policy_iteration(&mdp);
    let config = QLearnConfig {
        epsilon: 0.2,
        start: StartRule::UniformRestart {
            prob: DEFAULT_RESTART_PROB,
        },
        ..QLearnConfig::new(schedule, 200_000, 0)
    };
    let seeds: Vec<u64> = (1..=20).collect();
    q_learning_sweep(&mdp, &config, &seeds, &oracle)
        .unwrap()
        .into_iter()
        .map(|o| {
            let last = o.trace.checkpoints.last().unwrap();
            (last.supnorm_error, last.all_match())
        })
        .collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn criterion_4a(harmonic: &[(f64, bool)]) -> Outcome {
    let passing: Vec<&(f64, bool)> = harmonic.iter().filter(|(e, _)| *e < 0.01).collect();
    let greedy_ok = passing.iter().all(|(_, m)| *m);
    outcome(
        passing.len() >= 18 && greedy_ok,
        format!(
            "beta_n=1/n: {}/20 seeds below 0.01, greedy match in all passing={greedy_ok}, median={:.3e}",
            passing.len(),
            median(harmonic.iter().map(|r| r.0).collect())
        ),
    )
}

fn criterion_4b(harmonic: &[(f64, bool)], constant: &[(f64, bool)]) -> Outcome {
    let mh = median(harmonic.iter().map(|r| r.0).collect());
    let mc = median(constant.iter().map(|r| r.0).collect());
    outcome(
        mc >= 5.0 * mh,
        format!(
            "median final error constant c=0.5: {mc:.3e}, 1/n: {mh:.3e}, ratio {:.3e} (need >= 5)",
            mc / mh
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = seeded_rng(5150);
    let mut worst_rel = 0.0_f64;
    let mut worst_score = 0.0_f64;
    let mut reducible = 0;
    for _ in 0..20 {
        let ns = rng.random_range(2..=10);
        let na = rng.random_range(2..=4);
        let mdp = random_mdp(&mut rng, &RandomMdpSpec::new(ns, na, 0.9));
        let theta = PolicyParams::gaussian(&mut rng, ns, na, 0.5);
        let pi = softmax_policy(&theta).unwrap();
        let (p, _) = mdp_lab::mdp::policy_chain(&mdp, &pi);
        if !is_irreducible(ns, &p) {
            reducible += 1;
            continue;
        }
        worst_rel = worst_rel.max(gradient_check(&mdp, &theta, FD_STEP).unwrap().max_rel_diff);
        for s in 0..ns {
            let row: Vec<f64> = (0..na).map(|a| pi.prob(s, a)).collect();
            let mut total = vec![0.0; na];
            for a in 0..na {
                for (t, g) in total.iter_mut().zip(log_policy_gradient(&row, a)) {
                    *t += row[a] * g;
                }
            }
            worst_score = worst_score.max(total.iter().fold(0.0, |m, x| m.max(x.abs())));
        }
    }
    let bandit = two_arm_bandit();
    let run = gradient_ascent(&bandit, &PolicyParams::zeros(1, 2), 0.5, 200).unwrap();
    let j = average_reward(&bandit, &run.theta).unwrap();
    outcome(
        reducible == 0 && worst_rel < 1e-5 && worst_score < 1e-12 && j > 0.95,
        format!(
            "20 MDPs: reducible={reducible} max rel FD error={worst_rel:.3e} \
             max score sum={worst_score:.3e}; bandit J after 200 steps={j:.6}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = seeded_rng(606);
    let mut affine_divergence = 0.0_f64;
    for _ in 0..20 {
        let ns = rng.random_range(2..=12);
        let na = rng.random_range(2..=4);
        let dynamics = random_mdp(&mut rng, &RandomMdpSpec::new(ns, na, 0.9));
        let a = RewardTable::of(&dynamics);
        let b = a.affine(2.0, 5.0);
        affine_divergence =
            affine_divergence.max(compare_policies(&dynamics, &a, &b).unwrap().divergence);
    }

    let (ra, rb) = run_example_rewards();
    let run_example_div = compare_policies(&run_example(), &ra, &rb)
        .unwrap()
        .divergence;

    let dynamics = egoism_dynamics();
    let hierarchy = egoism_hierarchy();
    let level = hierarchy.level_index("humanity").unwrap();
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 100.0).collect();
    let sweep = sweep_weights(&dynamics, &hierarchy, level, &grid).unwrap();
    let monotone = sweep.windows(2).all(|w| w[1].1 >= w[0].1);
    let first_one = sweep.iter().find(|(_, d)| *d == 1.0).map(|(w, _)| *w);
    let last_zero = sweep.iter().rev().find(|(_, d)| *d == 0.0).map(|(w, _)| *w);
    let sweep_ok = sweep[0].1 == 0.0
        && sweep.last().unwrap().1 == 1.0
        && monotone
        && last_zero.is_some_and(|w| (w - 0.22).abs() < 1e-9)
        && first_one.is_some_and(|w| (w - 0.57).abs() < 1e-9);
    outcome(
        affine_divergence == 0.0 && run_example_div == 1.0 && sweep_ok,
        format!(
            "affine max divergence={affine_divergence} run-example divergence={run_example_div} \
             sweep monotone={monotone} last 0 at w={last_zero:?} first 1 at w={first_one:?}"
        ),
    )
}

fn run_cli(args: &[&str], dir: &Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_mdplab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_7() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let f = |name: &str| fixtures.join(name).display().to_string();
    let dir = tempfile::tempdir().unwrap();
    let (re, ra, rb) = (
        f("runexample.json"),
        f("runexample_reward_a.json"),
        f("runexample_reward_b.json"),
    );
    let (ed, eh) = (f("egoism_dynamics.json"), f("egoism_hierarchy.json"));
    let invocations: Vec<(Vec<&str>, Option<&str>)> = vec![
        (vec!["solve", "--mdp", &re], None),
        (
            vec![
                "--seed",
                "11",
                "qlearn",
                "--mdp",
                &re,
                "--family",
                "harmonic",
                "--p",
                "1",
                "--epsilon",
                "0.2",
                "--steps",
                "20000",
                "--out",
                "q.csv",
            ],
            Some("q.csv"),
        ),
        (
            vec![
                "--seed", "4", "pg", "--mdp", &re, "--init", "gaussian", "--iters", "50",
                "--check", "--out", "pg.csv",
            ],
            Some("pg.csv"),
        ),
        (
            vec![
                "compare",
                "--dynamics",
                &re,
                "--reward-a",
                &ra,
                "--reward-b",
                &rb,
            ],
            None,
        ),
        (
            vec![
                "sweep",
                "--dynamics",
                &ed,
                "--hierarchy",
                &eh,
                "--level",
                "humanity",
                "--grid",
                "0,0.25,0.5,1",
                "--out",
                "s.csv",
            ],
            Some("s.csv"),
        ),
    ];
    let mut mismatches = Vec::new();
    let mut failures = Vec::new();
    for (args, file) in &invocations {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let (code, stdout) = run_cli(args, dir.path());
            if code != 0 {
                failures.push(args[..3].join(" "));
            }
            let file_bytes = file.map(|p| std::fs::read(dir.path().join(p)).unwrap_or_default());
            outputs.push((stdout, file_bytes));
        }
        if outputs[0] != outputs[1] {
            mismatches.push(args[..3].join(" "));
        }
    }
    outcome(
        mismatches.is_empty() && failures.is_empty(),
        format!(
            "{} invocations run twice: nonzero exits {failures:?}, differing outputs {mismatches:?}",
            invocations.len()
        ),
    )
}

fn main() {
    let suite = discounted_suite();
    let harmonic = q_protocol(LearningRateSchedule::HarmonicPower { p: 1.0 });
    let constant = q_protocol(LearningRateSchedule::Constant { c: 0.5 });

    let results = [
        (
            "1  deterministic optimal policy exists",
            criterion_1(&suite),
        ),
        (
            "2  Bellman contraction and VI/PI agreement",
            criterion_2(&suite),
        ),
        ("3  Robbins-Monro classification", criterion_3()),
        ("4a Q-learning converges under 1/n", criterion_4a(&harmonic)),
        (
            "4b constant rate has >=5x larger median error",
            criterion_4b(&harmonic, &constant),
        ),
        ("5  softmax policy gradient", criterion_5()),
        ("6  argmax divergence", criterion_6()),
        ("7  byte-identical CLI reruns", criterion_7()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {name}: {}", r.detail);
        failed += usize::from(!r.passed);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
