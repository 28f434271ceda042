//! `mdplab` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 schedule not
//! Robbins–Monro valid, 4 schedule classification unknown, 5 a theorem
//! hypothesis fails on the given input (for example a reducible chain).
//!
//! Seed consumption: `qlearn` seeds its run with `--seed` directly. `pg`
//! draws the Gaussian initial logits (row-major) from a stream seeded with
//! `--seed` and nothing else. `solve`, `compare`, `sweep` and
//! `check-schedule` are deterministic and ignore the seed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::hierarchy::{
    compare_policies, sweep_weights, HierarchyError, RewardHierarchy, RewardTable,
};
use crate::mdp::{Mdp, MdpDocument, MdpError};
use crate::output::{
    csv_bytes, write_atomic, CsvRecord, OutputError, PG_HEADER, QLEARN_HEADER, SWEEP_HEADER,
};
use crate::pg::{
    evaluate_softmax, gradient_ascent, gradient_check, PgError, PolicyParams, FD_STEP,
};
use crate::qlearn::{
    classify_schedule, convergence_report, q_learning_run, LearningRateSchedule, QLearnConfig,
    QLearnError, StartRule, TableTail, DEFAULT_EPSILON, DEFAULT_RESTART_PROB,
};
use crate::random::seeded_rng;
use crate::solver::{policy_iteration, value_iteration, SolveResult, SolverError};

/// Standard deviation of `--init gaussian` logits.
pub const GAUSSIAN_INIT_STDDEV: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "mdplab", version, about = "Tabular MDP laboratory")]
struct Cli {
    /// Seed for every stochastic subcommand.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact V*, Q* and an optimal deterministic policy, as JSON.
    Solve(SolveArgs),
    /// Q-learning convergence trace against the exact solution, as CSV.
    Qlearn(QlearnArgs),
    /// Softmax policy-gradient ascent on the average reward, as CSV.
    Pg(PgArgs),
    /// Argmax divergence between two reward tables over shared dynamics.
    Compare(CompareArgs),
    /// Divergence as one hierarchy level's weight varies, as CSV.
    Sweep(SweepArgs),
    /// Robbins–Monro classification of a learning-rate schedule.
    CheckSchedule(ScheduleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Value,
    Policy,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Method::Value)]
    method: Method,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Harmonic,
    Constant,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tail {
    Unspecified,
    HoldLast,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Exponent of the harmonic family, beta_n = n^-p.
    #[arg(long)]
    p: Option<f64>,
    /// Rate of the constant family.
    #[arg(long)]
    c: Option<f64>,
    /// Comma-separated rates for the table family.
    #[arg(long, value_delimiter = ',')]
    rates: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Tail::Unspecified)]
    tail: Tail,
}

#[derive(Debug, Args)]
struct QlearnArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long)]
    steps: u64,
    /// Defaults to steps / 100.
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    q_init: f64,
    /// `uniform` for uniform random restarts, or a state name to start
    /// there and never reset.
    #[arg(long, default_value = "uniform")]
    start: String,
    #[arg(long, default_value_t = DEFAULT_RESTART_PROB)]
    restart_prob: f64,
    /// Write the CSV here; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Init {
    Zeros,
    Gaussian,
}

#[derive(Debug, Args)]
struct PgArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long, value_enum, default_value_t = Init::Zeros)]
    init: Init,
    #[arg(long, default_value_t = 0.1)]
    step_size: f64,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Emit a final JSON summary with a finite-difference gradient check.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = FD_STEP)]
    h: f64,
    /// Write the CSV here; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the `--check` JSON here; stdout otherwise.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// MDP file; its rewards, if any, are ignored.
    #[arg(long)]
    dynamics: PathBuf,
    #[arg(long)]
    reward_a: PathBuf,
    #[arg(long)]
    reward_b: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    dynamics: PathBuf,
    #[arg(long)]
    hierarchy: PathBuf,
    /// Level name, or its zero-based position.
    #[arg(long)]
    level: String,
    /// Comma-separated weights.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Hypothesis(String),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) | CliError::Output(_) => 2,
            CliError::Hypothesis(_) => 5,
        }
    }
}

impl From<MdpError> for CliError {
    fn from(e: MdpError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<QLearnError> for CliError {
    fn from(e: QLearnError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<HierarchyError> for CliError {
    fn from(e: HierarchyError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PgError> for CliError {
    fn from(e: PgError) -> Self {
        match e {
            PgError::ReducibleChain
            | PgError::SingularSystem
            | PgError::PowerIterationStalled(_) => CliError::Hypothesis(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Errors go to `stderr` as one `error: ...` line.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            // clap spreads one error over several lines; keep the part
            // before the usage hint.
            let text = e.to_string();
            let msg = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.is_empty() && !l.starts_with("Usage:"))
                .collect::<Vec<_>>()
                .join(" ");
            let msg = msg.strip_prefix("error: ").unwrap_or(&msg);
            return report(stderr, &CliError::Usage(msg.to_owned()));
        }
    };
    match dispatch(cli, stdout) {
        Ok(code) => code,
        Err(e) => report(stderr, &e),
    }
}

fn report(stderr: &mut dyn Write, e: &CliError) -> i32 {
    let msg = e.to_string().replace(['\n', '\r'], " ");
    let _ = writeln!(stderr, "error: {msg}");
    e.exit_code()
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve(a) => solve(a, stdout),
        Command::Qlearn(a) => qlearn(a, cli.seed, stdout),
        Command::Pg(a) => pg(a, cli.seed, stdout),
        Command::Compare(a) => compare(a, stdout),
        Command::Sweep(a) => sweep(a, stdout),
        Command::CheckSchedule(a) => check_schedule(a, stdout),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read '{}': {e}", path.display())))
}

fn load_mdp(path: &Path) -> Result<Mdp, CliError> {
    Mdp::from_json(&read(path)?).map_err(|e| CliError::Input(format!("'{}': {e}", path.display())))
}

fn load_dynamics(path: &Path) -> Result<Mdp, CliError> {
    MdpDocument::from_json(&read(path)?)
        .and_then(MdpDocument::into_dynamics)
        .map_err(|e| CliError::Input(format!("'{}': {e}", path.display())))
}

fn emit(stdout: &mut dyn Write, out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, bytes)?,
        None => stdout.write_all(bytes).map_err(|source| OutputError::Io {
            path: "<stdout>".into(),
            source,
        })?,
    }
    Ok(())
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s.into_bytes()
}

fn by_state<T: Into<Value>>(mdp: &Mdp, f: impl Fn(usize) -> T) -> Value {
    let map: Map<String, Value> = mdp
        .states()
        .iter()
        .enumerate()
        .map(|(s, name)| (name.clone(), f(s).into()))
        .collect();
    Value::Object(map)
}

fn by_state_action(mdp: &Mdp, f: impl Fn(usize, usize) -> f64) -> Value {
    by_state(mdp, |s| {
        let row: Map<String, Value> = mdp
            .actions()
            .iter()
            .enumerate()
            .map(|(a, name)| (name.clone(), json!(f(s, a))))
            .collect();
        Value::Object(row)
    })
}

/// SolveResult in its JSON layout.
pub fn solve_result_json(mdp: &Mdp, r: &SolveResult) -> Value {
    json!({
        "v_star": by_state(mdp, |s| r.v_star.get(s)),
        "q_star": by_state_action(mdp, |s, a| r.q_star.get(s, a)),
        "pi_star": by_state(mdp, |s| mdp.actions()[r.pi_star.action(s).expect("deterministic")].clone()),
        "iterations": r.iterations,
        "residual": r.residual,
    })
}

fn solve(a: SolveArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mdp = load_mdp(&a.mdp)?;
    let result = match a.method {
        Method::Value => value_iteration(&mdp, a.epsilon)?,
        Method::Policy => policy_iteration(&mdp),
    };
    emit(
        stdout,
        a.out.as_deref(),
        &json_bytes(&solve_result_json(&mdp, &result)),
    )?;
    Ok(0)
}

fn schedule(a: &ScheduleArgs) -> Result<LearningRateSchedule, CliError> {
    let missing = |flag: &str| CliError::Usage(format!("--family requires {flag}"));
    Ok(match a.family {
        Family::Harmonic => LearningRateSchedule::HarmonicPower {
            p: a.p.ok_or_else(|| missing("--p"))?,
        },
        Family::Constant => LearningRateSchedule::Constant {
            c: a.c.ok_or_else(|| missing("--c"))?,
        },
        Family::Table => {
            if a.rates.is_empty() {
                return Err(missing("--rates"));
            }
            LearningRateSchedule::Table {
                rates: a.rates.clone(),
                tail: match a.tail {
                    Tail::Unspecified => TableTail::Unspecified,
                    Tail::HoldLast => TableTail::HoldLast,
                },
            }
        }
    })
}

fn qlearn(a: QlearnArgs, seed: u64, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let schedule = schedule(&a.schedule)?;
    let mdp = load_mdp(&a.mdp)?;
    let start = if a.start == "uniform" {
        StartRule::UniformRestart {
            prob: a.restart_prob,
        }
    } else {
        StartRule::Fixed(mdp.state_index(&a.start)?)
    };
    let config = QLearnConfig {
        epsilon: a.epsilon,
        checkpoint_every: a.checkpoint_every.unwrap_or((a.steps / 100).max(1)),
        q_init: a.q_init,
        start,
        ..QLearnConfig::new(schedule, a.steps, seed)
    };
    let oracle = policy_iteration(&mdp);
    let outcome = q_learning_run(&mdp, &config, &oracle)?;
    let bytes = csv_bytes(&outcome.trace.checkpoints, &QLEARN_HEADER)?;
    emit(stdout, a.out.as_deref(), &bytes)?;
    if a.out.is_some() {
        if let Ok(summary) = convergence_report(&outcome.trace) {
            let v = serde_json::to_value(summary).expect("summary serializes");
            emit(stdout, None, &json_bytes(&v))?;
        }
    }
    Ok(0)
}

struct PgRow {
    iter: usize,
    j: f64,
    grad_norm: f64,
}

impl CsvRecord for PgRow {
    fn fields(&self) -> Vec<String> {
        use crate::output::format_f64;
        vec![
            self.iter.to_string(),
            format_f64(self.j),
            format_f64(self.grad_norm),
        ]
    }
}

fn pg(a: PgArgs, seed: u64, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mdp = load_mdp(&a.mdp)?;
    let theta0 = match a.init {
        Init::Zeros => PolicyParams::zeros(mdp.n_states(), mdp.n_actions()),
        Init::Gaussian => PolicyParams::gaussian(
            &mut seeded_rng(seed),
            mdp.n_states(),
            mdp.n_actions(),
            GAUSSIAN_INIT_STDDEV,
        ),
    };
    let run = gradient_ascent(&mdp, &theta0, a.step_size, a.iters)
        .map_err(|e| CliError::from(e.source))?;
    let rows: Vec<PgRow> = run
        .j_trace
        .iter()
        .zip(&run.grad_norms)
        .enumerate()
        .map(|(iter, (&j, &grad_norm))| PgRow { iter, j, grad_norm })
        .collect();
    let csv = csv_bytes(&rows, &PG_HEADER)?;

    let summary = if a.check {
        let eval = evaluate_softmax(&mdp, &run.theta)?;
        let check = gradient_check(&mdp, &run.theta, a.h)?;
        Some(json!({
            "theta": by_state_action(&mdp, |s, a| run.theta.get(s, a)),
            "mu": by_state(&mdp, |s| eval.mu.get(s)),
            "J": eval.j,
            "gradient_check": {
                "h": a.h,
                "max_abs_diff": check.max_abs_diff,
                "max_rel_diff": check.max_rel_diff,
            },
        }))
    } else {
        None
    };
    emit(stdout, a.out.as_deref(), &csv)?;
    if let Some(v) = summary {
        emit(stdout, a.summary.as_deref(), &json_bytes(&v))?;
    }
    Ok(0)
}

fn compare(a: CompareArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let dynamics = load_dynamics(&a.dynamics)?;
    let ra = RewardTable::from_json(&dynamics, &read(&a.reward_a)?)?;
    let rb = RewardTable::from_json(&dynamics, &read(&a.reward_b)?)?;
    let report = compare_policies(&dynamics, &ra, &rb)?;
    let v = serde_json::to_value(report).expect("report serializes");
    emit(stdout, a.out.as_deref(), &json_bytes(&v))?;
    Ok(0)
}

fn sweep(a: SweepArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let dynamics = load_dynamics(&a.dynamics)?;
    let hierarchy = RewardHierarchy::from_json(&dynamics, &read(&a.hierarchy)?)?;
    let level = match hierarchy.level_index(&a.level) {
        Ok(i) => i,
        Err(e) => a
            .level
            .parse::<usize>()
            .ok()
            .filter(|&i| i < hierarchy.levels().len())
            .ok_or(e)?,
    };
    if let Some(w) = a.grid.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(CliError::Input(format!(
            "grid weight {w} must be finite and non-negative"
        )));
    }
    let rows = sweep_weights(&dynamics, &hierarchy, level, &a.grid)?;
    emit(stdout, a.out.as_deref(), &csv_bytes(&rows, &SWEEP_HEADER)?)?;
    Ok(0)
}

fn check_schedule(a: ScheduleArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let verdict = classify_schedule(&schedule(&a)?)?;
    let v = serde_json::to_value(verdict).expect("verdict serializes");
    emit(stdout, None, &json_bytes(&v))?;
    Ok(match verdict.rm_valid {
        Some(true) => 0,
        Some(false) => 3,
        None => 4,
    })
}
