//! `mla`: generate benchmark models, solve them with value iteration or
//! magnifying-lens abstraction, compare the two, and check structure.
//!
//! Exit codes: 0 success, 1 other errors, 2 invalid input, 3 solver did not
//! converge (a report with `status = no_convergence` is still written),
//! 4 engines disagree.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mla_core::discounted::{mla_discounted, DiscountedConfig, DiscountedSolution};
use mla_core::game::{parse_game, serialize_game, value_iteration_discounted, GameError, GameGraph};
use mla_core::longrun::{
    check_uniform_value, concrete_longrun, mec_decomposition, mla_longrun, solve_mdp_longrun, LongRunConfig,
};
use mla_core::models::{ModelKind, ModelParams};
use mla_core::report::RunReport;
use mla_core::MlaError;

#[derive(Parser)]
#[command(name = "mla", version, about = "Magnifying-lens abstraction for stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a benchmark model in the game file format.
    Generate {
        #[command(flatten)]
        model: ModelArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a game file and append a report line.
    Solve {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Engine::Mla)]
        engine: Engine,
        #[command(flatten)]
        solver: SolverArgs,
        /// Report file (JSON lines, appended); stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Include the per-region bounds in the report.
        #[arg(long)]
        dump: bool,
    },
    /// Generate a model, solve it with several engines and cross-check.
    Bench {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "vi,mla")]
        engines: Vec<Engine>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Structural checks on a game file.
    Check {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = What::Validate)]
        what: What,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    model: String,
    /// Model parameter as key=value; repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = Objective::Discounted)]
    objective: Objective,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_abs: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps_float: f64,
    /// Relative value iteration steps per divergence probe.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Fraction of regions split per long-run refinement.
    #[arg(long, default_value_t = 0.1)]
    ratio: f64,
    #[arg(long)]
    init_depth: Option<u32>,
    /// Outer refinement rounds (discounted) or bisection probes (average).
    #[arg(long)]
    max_rounds: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Vi,
    Mla,
}

impl Engine {
    fn name(self) -> &'static str {
        match self {
            Engine::Vi => "vi",
            Engine::Mla => "mla",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Objective {
    Discounted,
    Average,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum What {
    Validate,
    UniformValue,
    Mec,
}

enum Failure {
    Invalid(String),
    NoConvergence(String),
    CrossCheck(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<MlaError> for Failure {
    fn from(e: MlaError) -> Self {
        let message = e.to_string();
        match e {
            MlaError::Game(GameError::Invalid(_) | GameError::Parse { .. } | GameError::Schema(_)) => {
                Failure::Invalid(message)
            }
            MlaError::Game(GameError::NoConvergence { .. })
            | MlaError::GlobalNoConvergence { .. }
            | MlaError::RegionNoConvergence { .. }
            | MlaError::RoundLimitExceeded(_)
            | MlaError::ProbeBudgetExceeded { .. } => Failure::NoConvergence(message),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<GameError> for Failure {
    fn from(e: GameError) -> Self {
        MlaError::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("invalid input: {m}");
            ExitCode::from(2)
        }
        Err(Failure::NoConvergence(m)) => {
            eprintln!("solver did not converge: {m}");
            ExitCode::from(3)
        }
        Err(Failure::CrossCheck(m)) => {
            eprintln!("cross-check failed: {m}");
            ExitCode::from(4)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate { model, out } => {
            let graph = model_params(&model)?.build()?.generate()?;
            let text = serialize_game(&graph);
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Solve {
            input,
            engine,
            solver,
            report,
            dump,
        } => {
            let graph = load(&input)?;
            let (row, failure) = solve(&graph, engine, &solver, dump)?;
            emit(report.as_deref(), &[row])?;
            failure.map_or(Ok(()), Err)
        }
        Command::Bench {
            model,
            engines,
            solver,
            report,
        } => bench(&model, &engines, &solver, report.as_deref()),
        Command::Check { input, what } => check(&input, what),
    }
}

fn model_params(args: &ModelArgs) -> anyhow::Result<ModelParams> {
    let kind: ModelKind = args.model.parse()?;
    let mut params = ModelParams::new(kind).with_seed(args.seed);
    for p in &args.params {
        params.push_assignment(p)?;
    }
    Ok(params)
}

fn load(path: &Path) -> Result<GameGraph, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Other)?;
    Ok(parse_game(&text)?)
}

fn threads() -> usize {
    std::env::var("MLA_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

fn discounted_config(args: &SolverArgs) -> DiscountedConfig {
    let mut c = DiscountedConfig {
        beta: args.beta,
        eps_abs: args.eps_abs,
        eps_float: args.eps_float,
        initial_depth: args.init_depth,
        threads: threads(),
        ..DiscountedConfig::default()
    };
    if let Some(r) = args.max_rounds {
        c.max_outer_rounds = r;
    }
    c
}

fn longrun_config(args: &SolverArgs) -> LongRunConfig {
    let mut c = LongRunConfig {
        eps_abs: args.eps_abs,
        k: args.k,
        ratio: args.ratio,
        initial_depth: args.init_depth,
        ..LongRunConfig::default()
    };
    if let Some(r) = args.max_rounds {
        c.max_bisection_steps = r;
    }
    c
}

/// Per-state value interval an engine certifies.
enum Answer {
    Values { lo: Vec<f64>, hi: Vec<f64> },
    Interval { lo: f64, hi: f64 },
    None,
}

/// Runs one engine. A solver that does not converge still yields a row,
/// together with the failure to report afterwards.
fn solve(
    graph: &GameGraph,
    engine: Engine,
    args: &SolverArgs,
    dump: bool,
) -> Result<(RunReport, Option<Failure>), Failure> {
    let (row, _) = solve_with_answer(graph, engine, args, dump)?;
    Ok(row)
}

fn solve_with_answer(
    graph: &GameGraph,
    engine: Engine,
    args: &SolverArgs,
    dump: bool,
) -> Result<((RunReport, Option<Failure>), Answer), Failure> {
    let objective = match args.objective {
        Objective::Discounted => "discounted",
        Objective::Average => "average",
    };
    let outcome = match (args.objective, engine) {
        (Objective::Discounted, Engine::Vi) => {
            let config = discounted_config(args);
            config.validate()?;
            let start = Instant::now();
            value_iteration_discounted(graph, config.beta, config.eps_float, config.max_global_sweeps)
                .map_err(MlaError::from)
                .map(|(values, sweeps)| {
                    let err = config.slack();
                    let mut row = RunReport::discounted_vi(graph, sweeps, start.elapsed());
                    row.bounds_gap_max = Some(2.0 * err);
                    let answer = Answer::Values {
                        lo: values.iter().map(|v| v - err).collect(),
                        hi: values.iter().map(|v| v + err).collect(),
                    };
                    (row, answer)
                })
        }
        (Objective::Discounted, Engine::Mla) => {
            let config = discounted_config(args);
            mla_discounted(graph, &config).map(|sol| {
                let row = RunReport::discounted_mla(graph, &sol, dump);
                (row, discounted_answer(graph, &sol, config.slack()))
            })
        }
        (Objective::Average, Engine::Vi) => concrete_longrun(graph, &longrun_config(args)).map(|r| {
            let answer = Answer::Interval { lo: r.c_lo, hi: r.c_hi };
            (RunReport::average(graph, "vi", &r), answer)
        }),
        (Objective::Average, Engine::Mla) if graph.is_mdp() => {
            solve_mdp_longrun(graph, &longrun_config(args)).map(|r| {
                let answer = Answer::Values {
                    lo: r.lower.clone(),
                    hi: r.upper.clone(),
                };
                (RunReport::average_mdp(graph, &r), answer)
            })
        }
        (Objective::Average, Engine::Mla) => mla_longrun(graph, &longrun_config(args)).map(|r| {
            let answer = Answer::Interval { lo: r.c_lo, hi: r.c_hi };
            (RunReport::average(graph, "mla", &r), answer)
        }),
    };
    match outcome {
        Ok((row, answer)) => Ok(((row, None), answer)),
        Err(e) => match Failure::from(e) {
            Failure::NoConvergence(m) => {
                let row = RunReport::new(graph, objective, engine.name()).with_status("no_convergence");
                Ok(((row, Some(Failure::NoConvergence(m))), Answer::None))
            }
            other => Err(other),
        },
    }
}

/// State bounds widened by the solver's floating-point slack.
fn discounted_answer(graph: &GameGraph, sol: &DiscountedSolution, slack: f64) -> Answer {
    let (lo, hi) = (0..graph.num_states())
        .map(|s| {
            let (l, h) = sol.state_bounds(s);
            (l - slack, h + slack)
        })
        .unzip();
    Answer::Values { lo, hi }
}

const CROSS_CHECK_SAMPLE: usize = 10_000;

/// Whether two engines' answers share a point at every checked state.
fn agree(a: &Answer, b: &Answer, states: usize) -> Result<(), String> {
    let tol = 1e-9;
    let stride = states.div_ceil(CROSS_CHECK_SAMPLE).max(1);
    let at = |ans: &Answer, s: usize| match ans {
        Answer::Values { lo, hi } => Some((lo[s], hi[s])),
        Answer::Interval { lo, hi } => Some((*lo, *hi)),
        Answer::None => None,
    };
    for s in (0..states).step_by(stride) {
        if let (Some((l1, h1)), Some((l2, h2))) = (at(a, s), at(b, s)) {
            if l1 > h2 + tol || l2 > h1 + tol {
                return Err(format!("state {s}: [{l1}, {h1}] and [{l2}, {h2}] are disjoint"));
            }
        }
    }
    Ok(())
}

fn bench(model: &ModelArgs, engines: &[Engine], args: &SolverArgs, report: Option<&Path>) -> Result<(), Failure> {
    let params = model_params(model)?;
    let graph = params.build()?.generate()?;
    let mut rows = Vec::new();
    let mut answers = Vec::new();
    let mut failure = None;
    for &engine in engines {
        let ((row, f), answer) = solve_with_answer(&graph, engine, args, false)?;
        rows.push(row);
        answers.push(answer);
        failure = failure.or(f);
    }
    let mut disagreement = None;
    for i in 0..answers.len() {
        for j in i + 1..answers.len() {
            if let Err(m) = agree(&answers[i], &answers[j], graph.num_states()) {
                disagreement.get_or_insert(m);
            }
        }
    }
    if disagreement.is_some() {
        for row in &mut rows {
            row.status = "cross_check_failed".into();
        }
    }
    emit(report, &rows)?;
    match (disagreement, failure) {
        (Some(m), _) => Err(Failure::CrossCheck(m)),
        (None, Some(f)) => Err(f),
        (None, None) => Ok(()),
    }
}

fn emit(path: Option<&Path>, rows: &[RunReport]) -> anyhow::Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&row.to_json_line());
        text.push('\n');
    }
    match path {
        Some(path) => OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check(input: &Path, what: What) -> Result<(), Failure> {
    let graph = match load(input) {
        Ok(g) => g,
        Err(Failure::Invalid(m)) if what == What::Validate => {
            println!("invalid");
            return Err(Failure::Invalid(m));
        }
        Err(e) => return Err(e),
    };
    match what {
        What::Validate => {
            println!("valid: {} states, {} transitions", graph.num_states(), graph.num_transitions());
        }
        What::UniformValue => match check_uniform_value(&graph) {
            (true, Some(t)) => println!("uniform value: yes (every state reaches state {t} for both players)"),
            _ => println!("uniform value: not established"),
        },
        What::Mec => {
            let mecs = mec_decomposition(&graph).map_err(|e| match e {
                MlaError::NotAnMdp => Failure::Other(anyhow!("mec decomposition needs an MDP")),
                other => other.into(),
            })?;
            println!("{} maximal end components", mecs.len());
            for mec in &mecs {
                let states: Vec<String> = mec.states.iter().map(|s| s.to_string()).collect();
                println!("{}", states.join(" "));
            }
        }
    }
    Ok(())
}
