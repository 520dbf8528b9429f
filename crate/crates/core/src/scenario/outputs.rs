//! Run orchestration and artifact emission: execute a validated scenario,
//! then write the trajectory CSV, metric and event JSON, and plot-data
//! files into an output directory.
//!
//! Determinism contract: `metrics.json` and `trajectories.csv` depend only
//! on the configuration and the seed. Wall-clock readings go exclusively
//! into `events.json`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Scenario, ScenarioError, SUBJECT_SIGNAL};
use crate::dwell::BoundReport;
use crate::mtl::{eval_strong, eval_weak, Formula, MtlError, Trace, Verdict};
use crate::runtime::{realized_trace, run_algorithm1, RunLog};

/// Paths of everything a run leaves behind, plus the printable summary.
#[derive(Debug, Clone)]
pub struct OutputBundle {
    pub dir: PathBuf,
    pub trajectories: PathBuf,
    pub metrics: PathBuf,
    pub events: PathBuf,
    /// Serialized mission formula; feed it back to the trace monitor.
    pub formula: PathBuf,
    pub plots: Vec<PathBuf>,
    pub summary: RunSummary,
}

/// One-line result of a run, printed by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub steps_logged: usize,
    pub termination_index: Option<usize>,
    pub cumulative_effort: f64,
    pub max_estimation_error: f64,
    pub verdict: Option<&'static str>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} seed {}: ", self.name, self.seed)?;
        match self.termination_index {
            Some(t) => write!(f, "goal reached at step {t}")?,
            None => write!(f, "stopped after {} logged steps", self.steps_logged)?,
        }
        write!(
            f,
            "; effort {:.3}; max estimation error {:.4}; verdict {}",
            self.cumulative_effort,
            self.max_estimation_error,
            self.verdict.unwrap_or("not monitored")
        )
    }
}

/// Execute the scenario and write the full bundle.
pub fn run_scenario(sc: &Scenario, out_dir: &Path) -> Result<OutputBundle, ScenarioError> {
    let log = run_algorithm1(&sc.mission, sc.seed)?;
    emit_outputs(sc, &log, out_dir)
}

/// Evaluate the exact trace semantics on what the run actually logged.
pub fn monitor_realized(log: &RunLog, formula: &Formula) -> Result<Verdict, MtlError> {
    let trace = realized_trace(log)?;
    Ok(Verdict {
        weak: eval_weak(&trace, formula, 0)?,
        strong: eval_strong(&trace, formula, 0)?,
    })
}

#[derive(Serialize)]
struct Metrics<'a> {
    schema: u64,
    name: &'a str,
    seed: u64,
    period: f64,
    steps_logged: usize,
    termination_index: Option<usize>,
    cumulative_effort: f64,
    max_estimation_error: f64,
    max_tracking_error: f64,
    verdict: Option<&'static str>,
    /// Per explorer: indices where its estimate was refreshed by the relay.
    service_times: Vec<Vec<usize>>,
    /// Per explorer: largest spacing between consecutive services.
    max_service_gap: Vec<Option<usize>>,
    /// Per explorer: cadence bound the gaps must respect.
    dwell_steps: Vec<usize>,
    resolves: usize,
    solver_nodes: usize,
    simplex_iterations: u64,
    bounds: &'a BoundReport,
}

#[derive(Serialize)]
struct Events<'a> {
    services: &'a [crate::sim::ServiceEvent],
    resolves: &'a [crate::runtime::ResolveEvent],
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, ScenarioError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|source| ScenarioError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Write trajectories, metrics, events, the serialized formula, and the
/// plot-data files for `log` into `dir` (created if missing).
pub fn emit_outputs(sc: &Scenario, log: &RunLog, dir: &Path) -> Result<OutputBundle, ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|source| ScenarioError::Write {
        path: dir.to_path_buf(),
        source,
    })?;

    let names = &sc.explorer_names;
    let max_e1 = fold_max(log, |e| e.e1_norm);
    let max_e2 = fold_max(log, |e| e.e2_norm);

    let service_times: Vec<Vec<usize>> =
        (0..names.len()).map(|i| crate::runtime::service_times(log, i)).collect();
    let max_gap: Vec<Option<usize>> = service_times
        .iter()
        .map(|times| times.windows(2).map(|w| w[1] - w[0]).max())
        .collect();

    let metrics = Metrics {
        schema: super::SCHEMA_VERSION,
        name: &sc.name,
        seed: sc.seed,
        period: log.period,
        steps_logged: log.steps.len(),
        termination_index: log.termination_index,
        cumulative_effort: log.cumulative_effort,
        max_estimation_error: max_e1,
        max_tracking_error: max_e2,
        verdict: log.verdict.map(|v| v.label()),
        service_times,
        max_service_gap: max_gap,
        dwell_steps: sc.dwell_steps(),
        resolves: log.resolves.len(),
        solver_nodes: log.resolves.iter().map(|r| r.nodes).sum(),
        simplex_iterations: log.resolves.iter().map(|r| r.simplex_iterations).sum(),
        bounds: &sc.report,
    };

    let trajectories = write_file(dir, "trajectories.csv", &render_trajectories(log, names))?;
    let metrics_path = write_file(dir, "metrics.json", &pretty(&metrics)?)?;
    let events_path = write_file(
        dir,
        "events.json",
        &pretty(&Events { services: &log.services, resolves: &log.resolves })?,
    )?;
    let formula_path = write_file(dir, "formula.json", &pretty(&sc.mission.formula)?)?;
    let plots = vec![
        write_file(dir, "plot_error_norms.csv", &render_error_norms(log, names))?,
        write_file(dir, "plot_paths.csv", &render_paths(log, names))?,
        write_file(dir, "plot_inputs.csv", &render_inputs(log, sc.mission.world.relay.input_dim()))?,
    ];

    Ok(OutputBundle {
        dir: dir.to_path_buf(),
        trajectories,
        metrics: metrics_path,
        events: events_path,
        formula: formula_path,
        plots,
        summary: RunSummary {
            name: sc.name.clone(),
            seed: sc.seed,
            steps_logged: log.steps.len(),
            termination_index: log.termination_index,
            cumulative_effort: log.cumulative_effort,
            max_estimation_error: max_e1,
            verdict: log.verdict.map(|v| v.label()),
        },
    })
}

fn pretty<T: Serialize>(value: &T) -> Result<String, ScenarioError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| ScenarioError::Invalid(format!("cannot serialize outputs: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn fold_max(log: &RunLog, f: impl Fn(&crate::runtime::ExplorerStepRecord) -> f64) -> f64 {
    log.steps
        .iter()
        .flat_map(|s| s.explorers.iter())
        .map(&f)
        .fold(0.0, f64::max)
}

fn push_row(out: &mut String, prefix: fmt::Arguments<'_>, values: &[f64], width: usize) {
    write!(out, "{prefix}").unwrap();
    for k in 0..width {
        out.push(',');
        if let Some(v) = values.get(k) {
            write!(out, "{v}").unwrap();
        }
    }
    out.push('\n');
}

/// Fixed-layout trajectory table: one row per step, agent, and series kind,
/// padded to a constant column count.
fn render_trajectories(log: &RunLog, names: &[String]) -> String {
    let width = log
        .steps
        .iter()
        .flat_map(|s| {
            let mut dims = vec![s.x0.len(), s.y0.len()];
            if let Some(u) = &s.u0 {
                dims.push(u.len());
            }
            for e in &s.explorers {
                dims.extend([e.x.len(), e.x_hat.len(), e.y.len(), e.y_hat.len()]);
            }
            dims
        })
        .max()
        .unwrap_or(0);

    let mut out = String::from("step,time,agent,kind");
    for k in 1..=width {
        write!(out, ",x{k}").unwrap();
    }
    out.push('\n');

    for step in &log.steps {
        let t = step.t_index;
        let time = t as f64 * log.period;
        push_row(&mut out, format_args!("{t},{time},relay,state"), &step.x0, width);
        push_row(&mut out, format_args!("{t},{time},relay,output"), &step.y0, width);
        if let Some(u) = &step.u0 {
            push_row(&mut out, format_args!("{t},{time},relay,input"), u, width);
        }
        for (name, e) in names.iter().zip(&step.explorers) {
            push_row(&mut out, format_args!("{t},{time},{name},state"), &e.x, width);
            push_row(&mut out, format_args!("{t},{time},{name},estimate"), &e.x_hat, width);
            push_row(&mut out, format_args!("{t},{time},{name},output"), &e.y, width);
            push_row(
                &mut out,
                format_args!("{t},{time},{name},estimate_output"),
                &e.y_hat,
                width,
            );
        }
    }
    out
}

fn render_error_norms(log: &RunLog, names: &[String]) -> String {
    let mut out = String::from("step,time,agent,estimation_error,tracking_error\n");
    for step in &log.steps {
        let time = step.t_index as f64 * log.period;
        for (name, e) in names.iter().zip(&step.explorers) {
            writeln!(out, "{},{time},{name},{},{}", step.t_index, e.e1_norm, e.e2_norm).unwrap();
        }
    }
    out
}

fn render_paths(log: &RunLog, names: &[String]) -> String {
    let mut out = String::from("step,agent,x,y\n");
    for step in &log.steps {
        writeln!(out, "{},relay,{},{}", step.t_index, step.y0[0], step.y0[1]).unwrap();
        for (name, e) in names.iter().zip(&step.explorers) {
            writeln!(out, "{},{name},{},{}", step.t_index, e.y[0], e.y[1]).unwrap();
        }
    }
    out
}

fn render_inputs(log: &RunLog, input_dim: usize) -> String {
    let mut out = String::from("step,time");
    for k in 1..=input_dim {
        write!(out, ",u{k}").unwrap();
    }
    out.push('\n');
    for step in &log.steps {
        if let Some(u) = &step.u0 {
            let time = step.t_index as f64 * log.period;
            write!(out, "{},{time}", step.t_index).unwrap();
            for v in u {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Rebuild the realized trace from a `trajectories.csv` file: the relay
/// output becomes `y0` and each explorer's `estimate_output` series becomes
/// `yhat1`, `yhat2`, … in order of first appearance.
pub fn trace_from_csv(text: &str) -> Result<Trace, ScenarioError> {
    let bad = |line: usize, what: String| {
        ScenarioError::Invalid(format!("trajectories.csv line {}: {what}", line + 1))
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| ScenarioError::Invalid("trajectories.csv is empty".into()))?;
    if !header.starts_with("step,time,agent,kind") {
        return Err(ScenarioError::Invalid(format!(
            "trajectories.csv: unexpected header `{header}`"
        )));
    }

    let mut relay_rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut estimate_order: Vec<String> = Vec::new();
    let mut estimate_rows: BTreeMap<String, Vec<(usize, Vec<f64>)>> = BTreeMap::new();
    let mut times: BTreeMap<usize, f64> = BTreeMap::new();

    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            return Err(bad(lineno, format!("expected at least 4 columns, got {}", fields.len())));
        }
        let step: usize = fields[0]
            .parse()
            .map_err(|_| bad(lineno, format!("bad step `{}`", fields[0])))?;
        let time: f64 = fields[1]
            .parse()
            .map_err(|_| bad(lineno, format!("bad time `{}`", fields[1])))?;
        times.insert(step, time);
        let (agent, kind) = (fields[2], fields[3]);
        let wanted = match (agent, kind) {
            ("relay", "output") => true,
            (_, "estimate_output") => true,
            _ => false,
        };
        if !wanted {
            continue;
        }
        let mut values = Vec::new();
        for f in &fields[4..] {
            if f.is_empty() {
                break;
            }
            values.push(
                f.parse::<f64>().map_err(|_| bad(lineno, format!("bad number `{f}`")))?,
            );
        }
        if agent == "relay" {
            relay_rows.push((step, values));
        } else {
            if !estimate_rows.contains_key(agent) {
                estimate_order.push(agent.to_string());
            }
            estimate_rows.entry(agent.to_string()).or_default().push((step, values));
        }
    }

    let sequence = |mut rows: Vec<(usize, Vec<f64>)>, what: &str| {
        rows.sort_by_key(|(s, _)| *s);
        for (expected, (step, _)) in rows.iter().enumerate() {
            if *step != expected {
                return Err(ScenarioError::Invalid(format!(
                    "trajectories.csv: {what} misses step {expected}"
                )));
            }
        }
        Ok(rows.into_iter().map(|(_, v)| v).collect::<Vec<_>>())
    };

    let mut signals = BTreeMap::new();
    signals.insert(SUBJECT_SIGNAL.to_string(), sequence(relay_rows, "relay output")?);
    for (i, agent) in estimate_order.iter().enumerate() {
        let rows = estimate_rows.remove(agent).expect("ordered keys exist");
        signals.insert(format!("yhat{}", i + 1), sequence(rows, agent)?);
    }

    let period = match (times.get(&0), times.get(&1)) {
        (Some(t0), Some(t1)) => t1 - t0,
        _ => 1.0,
    };
    Trace::new(period, signals).map_err(ScenarioError::Formula)
}
