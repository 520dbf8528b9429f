//! `relay-mtl`: run, validate, and monitor relay-agent synthesis scenarios.
//!
//! Exit codes: 0 on success with a satisfied (or weakly satisfied) mission,
//! 2 when planning is infeasible or a run aborts or a monitored trace
//! violates its formula, 3 for invalid configuration or arguments, 4 when
//! the simulation itself diverges.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use relay_mtl_core::milp::{parse_lp, solution_text, solve, Backend, SolveStatus, SolverConfig};
use relay_mtl_core::mtl::Formula;
use relay_mtl_core::par;
use relay_mtl_core::runtime::RuntimeError;
use relay_mtl_core::scenario::{
    emit_outputs, load_scenario, run_scenario, trace_from_csv, Scenario, ScenarioError,
};
use relay_mtl_core::sim::SimError;

const EXIT_UNSATISFIED: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "relay-mtl", version, about = "Relay-agent control synthesis under MTL constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write trajectories, metrics, and plot data.
    Run {
        /// Scenario JSON file (see the scenarios/ directory).
        #[arg(long)]
        scenario: PathBuf,
        /// Override the seed stored in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// `builtin` or `external:<cmd>` where <cmd> contains {in} and
        /// {out} placeholders; overrides RELAY_MTL_SOLVER.
        #[arg(long)]
        solver: Option<String>,
        /// Output directory for the artifact bundle.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Shrink all coordinates by 10 and the horizon to 10 steps.
        #[arg(long)]
        desk_scale: bool,
        /// Run a seed range, e.g. `seeds=0..9` (inclusive), one output
        /// directory per seed, in parallel workers.
        #[arg(long, value_name = "RANGE")]
        sweep: Option<String>,
    },
    /// Check a scenario file and print its feasibility report.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Re-evaluate a serialized formula against a trajectories.csv file.
    Monitor {
        #[arg(long)]
        trace: PathBuf,
        /// formula.json as written by `run`.
        #[arg(long)]
        formula: PathBuf,
    },
    /// Solve one LP/MILP file and write the solution file; this implements
    /// the external-backend protocol, so `--solver
    /// "external:relay-mtl solve-lp {in} {out}"` round-trips through it.
    SolveLp { input: PathBuf, output: PathBuf },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, seed, solver, out, desk_scale, sweep } => {
            run_cmd(&scenario, seed, solver.as_deref(), &out, desk_scale, sweep.as_deref())
        }
        Command::Validate { scenario } => validate_cmd(&scenario),
        Command::Monitor { trace, formula } => monitor_cmd(&trace, &formula),
        Command::SolveLp { input, output } => solve_lp_cmd(&input, &output),
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn scenario_exit_code(err: &ScenarioError) -> u8 {
    match err {
        ScenarioError::Runtime(RuntimeError::Sim(SimError::Diverged { .. })) => EXIT_DIVERGED,
        ScenarioError::Runtime(_) => EXIT_UNSATISFIED,
        _ => EXIT_CONFIG,
    }
}

fn parse_backend(text: &str) -> Result<Backend, String> {
    if text == "builtin" {
        return Ok(Backend::Builtin);
    }
    match text.strip_prefix("external:") {
        Some(cmd) if !cmd.trim().is_empty() => Ok(Backend::External(cmd.to_string())),
        _ => Err(format!("solver must be `builtin` or `external:<cmd>`, got `{text}`")),
    }
}

/// Pick the backend: flag first, then the RELAY_MTL_SOLVER environment
/// variable, otherwise keep the scenario default.
fn resolve_backend(flag: Option<&str>) -> Result<Option<Backend>, String> {
    if let Some(text) = flag {
        return parse_backend(text).map(Some);
    }
    match std::env::var("RELAY_MTL_SOLVER") {
        Ok(text) => parse_backend(&text).map(Some),
        Err(_) => Ok(None),
    }
}

fn parse_sweep(text: &str) -> Result<std::ops::RangeInclusive<u64>, String> {
    let range = text
        .strip_prefix("seeds=")
        .ok_or_else(|| format!("sweep must look like `seeds=a..b`, got `{text}`"))?;
    let (a, b) = range
        .split_once("..")
        .ok_or_else(|| format!("sweep range must look like `a..b`, got `{range}`"))?;
    let lo: u64 = a.trim().parse().map_err(|_| format!("bad sweep start `{a}`"))?;
    let hi: u64 = b.trim().parse().map_err(|_| format!("bad sweep end `{b}`"))?;
    if lo > hi {
        return Err(format!("empty sweep range {lo}..{hi}"));
    }
    Ok(lo..=hi)
}

fn run_cmd(
    scenario: &Path,
    seed: Option<u64>,
    solver: Option<&str>,
    out: &Path,
    desk_scale: bool,
    sweep: Option<&str>,
) -> ExitCode {
    let mut sc = match load_scenario(scenario, desk_scale) {
        Ok(sc) => sc,
        Err(e) => return fail(scenario_exit_code(&e), e),
    };
    match resolve_backend(solver) {
        Ok(Some(backend)) => sc.mission.solver.backend = backend,
        Ok(None) => {}
        Err(msg) => return fail(EXIT_CONFIG, msg),
    }
    if let Some(seed) = seed {
        sc.seed = seed;
    }

    let Some(sweep) = sweep else {
        return run_once(&sc, out);
    };
    let seeds = match parse_sweep(sweep) {
        Ok(range) => range,
        Err(msg) => return fail(EXIT_CONFIG, msg),
    };

    // Independent runs, one artifact directory per seed.
    let results = par::run_keyed(seeds, |seed| {
        let mut job = sc.clone();
        job.seed = seed;
        let dir = out.join(format!("seed-{seed}"));
        run_scenario(&job, &dir)
    });
    let mut worst = ExitCode::SUCCESS;
    for (seed, result) in results {
        match result {
            Ok(bundle) => println!("{}", bundle.summary),
            Err(e) => {
                eprintln!("seed {seed} failed: {e}");
                worst = ExitCode::from(scenario_exit_code(&e));
            }
        }
    }
    worst
}

fn run_once(sc: &Scenario, out: &Path) -> ExitCode {
    match run_scenario(sc, out) {
        Ok(bundle) => {
            println!("{}", bundle.summary);
            match bundle.summary.verdict {
                Some("violated") => ExitCode::from(EXIT_UNSATISFIED),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            // Aborted runs still leave their partial log behind for
            // inspection.
            let partial = match &e {
                ScenarioError::Runtime(RuntimeError::Infeasible { snapshot, .. })
                | ScenarioError::Runtime(RuntimeError::SolverLimit { snapshot, .. })
                | ScenarioError::Runtime(RuntimeError::StepLimit { snapshot, .. }) => {
                    Some(snapshot.as_ref().clone())
                }
                _ => None,
            };
            if let Some(log) = partial {
                if let Ok(bundle) = emit_outputs(sc, &log, out) {
                    eprintln!("partial log written to {}", bundle.dir.display());
                }
            }
            fail(scenario_exit_code(&e), e)
        }
    }
}

fn validate_cmd(scenario: &Path) -> ExitCode {
    match load_scenario(scenario, false) {
        Ok(sc) => {
            let report = serde_json::to_string_pretty(&sc.report)
                .expect("feasibility reports serialize");
            println!("{report}");
            println!(
                "{}: valid; {} explorers, horizon {}, service cadence {:?}",
                sc.name,
                sc.explorer_names.len(),
                sc.mission.horizon,
                sc.dwell_steps()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn monitor_cmd(trace: &Path, formula: &Path) -> ExitCode {
    let csv = match std::fs::read_to_string(trace) {
        Ok(text) => text,
        Err(e) => return fail(EXIT_CONFIG, format!("cannot read {}: {e}", trace.display())),
    };
    let trace = match trace_from_csv(&csv) {
        Ok(trace) => trace,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let formula: Formula = match std::fs::read_to_string(formula)
        .map_err(|e| format!("cannot read {}: {e}", formula.display()))
        .and_then(|text| serde_json::from_str(&text).map_err(|e| format!("bad formula file: {e}")))
    {
        Ok(f) => f,
        Err(msg) => return fail(EXIT_CONFIG, msg),
    };

    // The realized monitor and the in-run evaluator share the same exact
    // semantics; this just re-applies them to the CSV.
    let log_free_verdict = relay_mtl_core::mtl::eval_weak(&trace, &formula, 0)
        .and_then(|weak| {
            relay_mtl_core::mtl::eval_strong(&trace, &formula, 0).map(|strong| (weak, strong))
        });
    match log_free_verdict {
        Ok((weak, strong)) => {
            let label = match (weak, strong) {
                (true, true) => "satisfied",
                (true, false) => "undetermined",
                (false, _) => "violated",
            };
            println!("verdict: {label} (weak {weak}, strong {strong})");
            if weak {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_UNSATISFIED)
            }
        }
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn solve_lp_cmd(input: &Path, output: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(input) {
        Ok(text) => text,
        Err(e) => return fail(EXIT_CONFIG, format!("cannot read {}: {e}", input.display())),
    };
    let model = match parse_lp(&text) {
        Ok(model) => model,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let result = match solve(&model, &SolverConfig::default()) {
        Ok(result) => result,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let body = match result.status {
        SolveStatus::Optimal => solution_text(&result.assignment),
        SolveStatus::Infeasible => "infeasible\n".to_string(),
        SolveStatus::IterationLimit => {
            return fail(EXIT_UNSATISFIED, "node limit reached before proving optimality")
        }
    };
    match std::fs::write(output, body) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_CONFIG, format!("cannot write {}: {e}", output.display())),
    }
}
