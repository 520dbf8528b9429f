//! Receding-horizon synthesis loop.
//!
//! One run alternates between planning and acting. A plan is the solution of
//! a mixed-integer program over the next `N` sampling periods: relay inputs
//! that satisfy the mission formula against deterministically predicted
//! explorer estimates. Acting applies the head of the plan and advances the
//! world one period. Whenever the relay comes within the service threshold of
//! an explorer's estimated position — or the current plan runs out — the
//! estimates are refreshed, the formula is specialised against everything
//! already observed, and a new plan is solved from the current state.
//!
//! The log records enough to replay, audit, and monitor the run afterwards:
//! every state and applied input, every service, and for every solve its
//! statistics and the service contacts the plan promises.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::encode::{
    build_milp, precompute_estimates, EncodeError, EncodingContext, RelayPlanInput,
};
use crate::milp::{solve, MilpError, SolveStatus, SolverConfig};
use crate::mtl::{
    eval_strong, eval_weak, specialize, to_nnf, Formula, MtlError, Trace, Verdict,
};
use crate::sim::{
    apply_service, detect_service, step_world, ServiceEvent, ServiceTrigger, SimError, World,
};

/// Everything a run needs besides a seed.
#[derive(Debug, Clone)]
pub struct Mission {
    /// Initial world; consumed by value-semantic stepping.
    pub world: World,
    /// Original mission formula; re-specialised (never mutated) at every solve
    /// from the realized prefix.
    pub formula: Formula,
    /// Planning horizon `N` in sampling periods.
    pub horizon: usize,
    /// Trace/encoding name of the relay output signal.
    pub subject_signal: String,
    /// Trace/encoding names of the per-explorer estimate signals, aligned
    /// with `world.explorers`.
    pub estimate_signals: Vec<String>,
    pub solver: SolverConfig,
    /// Hard cap on the number of discrete steps before the run is declared
    /// non-terminating.
    pub step_limit: usize,
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("mission configuration: {0}")]
    Config(String),
    #[error("synthesis infeasible at index {t_index}; specialized formula: {formula}")]
    Infeasible { t_index: usize, formula: String, snapshot: Box<RunLog> },
    #[error("solver exhausted its budget at index {t_index} after {nodes} nodes")]
    SolverLimit { t_index: usize, nodes: usize, snapshot: Box<RunLog> },
    #[error("run exceeded {limit} steps without reaching the goal region")]
    StepLimit { limit: usize, snapshot: Box<RunLog> },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Mtl(#[from] MtlError),
}

/// Per-explorer snapshot within a step record. Estimates are logged as they
/// stood when services were detected (before any reset at this index), so the
/// error norms measure the drift the servicing policy actually permitted.
#[derive(Debug, Clone, Serialize)]
pub struct ExplorerStepRecord {
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// True output.
    pub y: Vec<f64>,
    /// Estimated output; the monitor signal for service atoms.
    pub y_hat: Vec<f64>,
    /// Estimation error `|x - x_hat|` (zero right after a service).
    pub e1_norm: f64,
    /// Estimated tracking error `|x_g - x_hat|`.
    pub e2_norm: f64,
    /// Distance of the true output from the goal output.
    pub goal_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub t_index: usize,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub explorers: Vec<ExplorerStepRecord>,
    /// Input applied at this index; `None` on the final record (the run ends
    /// before acting) or when the run aborted here.
    pub u0: Option<Vec<f64>>,
    /// Index into `RunLog::resolves` of the plan that supplied `u0`; applied
    /// inputs always come from the most recent solve.
    pub source_resolve: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolveReason {
    /// The mandatory solve at index 0.
    Initial,
    /// At least one explorer was serviced at this index.
    Service,
    /// The previous plan had no inputs left.
    HorizonExpired,
}

/// A step at which the plan itself guarantees a service contact: the planned
/// relay output sits inside the inscribed box of the `eta`-ball around the
/// predicted estimate, so the exact Euclidean distance is at most `eta`.
#[derive(Debug, Clone, Serialize)]
pub struct PlannedService {
    pub explorer: usize,
    pub t_index: usize,
    /// Exact planned 2-norm distance `|y0 - y_hat|` at that step.
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolveEvent {
    pub t_index: usize,
    pub reason: ResolveReason,
    /// Explorers serviced at this index (empty for horizon expiry).
    pub serviced: Vec<usize>,
    /// The formula actually encoded: specialised against the realized
    /// prefix, in negation normal form.
    pub specialized: String,
    /// Optimal L1 input surrogate reported by the solver.
    pub objective: f64,
    pub nodes: usize,
    pub simplex_iterations: u64,
    pub wall_seconds: f64,
    /// Binary count of the encoded model.
    pub binaries: usize,
    /// Row count of the encoded model.
    pub rows: usize,
    pub planned_services: Vec<PlannedService>,
}

/// Complete record of one run (or of its prefix, on abort).
#[derive(Debug, Clone, Serialize)]
pub struct RunLog {
    /// Sampling period, seconds.
    pub period: f64,
    pub subject_signal: String,
    pub estimate_signals: Vec<String>,
    pub steps: Vec<StepRecord>,
    pub services: Vec<ServiceEvent>,
    pub resolves: Vec<ResolveEvent>,
    /// First index at which every explorer's true output was inside the goal
    /// region; `None` on aborted logs.
    pub termination_index: Option<usize>,
    /// Sum of `|u0|_2` over all applied inputs.
    pub cumulative_effort: f64,
    /// Verdict of the original formula on the realized trace; `None` on
    /// aborted logs.
    pub verdict: Option<Verdict>,
}

impl RunLog {
    fn new(mission: &Mission) -> Self {
        RunLog {
            period: mission.world.ts,
            subject_signal: mission.subject_signal.clone(),
            estimate_signals: mission.estimate_signals.clone(),
            steps: Vec::new(),
            services: Vec::new(),
            resolves: Vec::new(),
            termination_index: None,
            cumulative_effort: 0.0,
            verdict: None,
        }
    }
}

/// Relay-service instants for explorer `i`: index 0 (everyone starts
/// synchronized) followed by every logged relay-triggered service, strictly
/// increasing.
pub fn service_times(log: &RunLog, i: usize) -> Vec<usize> {
    let mut times = vec![0usize];
    for ev in &log.services {
        if ev.explorer == i && ev.trigger == ServiceTrigger::Relay && ev.t_index > *times.last().unwrap() {
            times.push(ev.t_index);
        }
    }
    times
}

/// Realized control effort: the sum of Euclidean norms of all applied inputs.
pub fn cumulative_effort(log: &RunLog) -> f64 {
    log.steps
        .iter()
        .filter_map(|s| s.u0.as_ref())
        .map(|u| u.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

/// Plan-refresh trigger: an explorer was serviced, or the current plan has
/// no inputs left beyond this index.
pub fn should_resolve(w: &BTreeSet<usize>, ell: usize, ell_star: usize, n: usize) -> bool {
    !w.is_empty() || ell >= ell_star + n
}

/// Rebuilds the realized trace (relay output plus pre-reset estimate
/// outputs) from a log. The same construction feeds specialisation during
/// the run and post-hoc monitoring, so the two can never disagree.
pub fn realized_trace(log: &RunLog) -> Result<Trace, MtlError> {
    let mut signals = BTreeMap::new();
    signals.insert(
        log.subject_signal.clone(),
        log.steps.iter().map(|s| s.y0.clone()).collect(),
    );
    for (i, name) in log.estimate_signals.iter().enumerate() {
        signals.insert(
            name.clone(),
            log.steps.iter().map(|s| s.explorers[i].y_hat.clone()).collect(),
        );
    }
    Trace::new(log.period, signals)
}

fn snapshot_record(world: &World) -> StepRecord {
    let explorers = (0..world.explorers.len())
        .map(|i| ExplorerStepRecord {
            x: world.explorers[i].x.clone(),
            x_hat: world.explorers[i].x_hat.clone(),
            y: world.explorer_output(i),
            y_hat: world.estimate_output(i),
            e1_norm: world.estimation_error(i),
            e2_norm: world.estimated_tracking_error(i),
            goal_distance: world.goal_distance(i),
        })
        .collect();
    StepRecord {
        t_index: world.t_index,
        x0: world.x0.clone(),
        y0: world.relay_output(),
        explorers,
        u0: None,
        source_resolve: None,
    }
}

/// Runs the full synthesis loop and returns the complete log.
///
/// The loop: observe and log the current index, apply services (relay
/// proximity resets estimates and demands a re-solve; goal-region residency
/// resets estimates silently), terminate once every explorer's output is
/// inside the goal region, otherwise make sure a plan covering this index
/// exists — solving at index 0 and whenever [`should_resolve`] fires — then
/// apply the planned input and step the world.
pub fn run_algorithm1(mission: &Mission, seed: u64) -> Result<RunLog, RuntimeError> {
    if mission.horizon == 0 {
        return Err(RuntimeError::Config("planning horizon must be at least 1".into()));
    }
    if mission.estimate_signals.len() != mission.world.explorers.len() {
        return Err(RuntimeError::Config(format!(
            "{} estimate signal names for {} explorers",
            mission.estimate_signals.len(),
            mission.world.explorers.len()
        )));
    }
    let mut names = BTreeSet::new();
    for name in &mission.estimate_signals {
        if name == &mission.subject_signal || !names.insert(name) {
            return Err(RuntimeError::Config(format!("signal name {name} is not unique")));
        }
    }

    let n = mission.horizon;
    let mut world = mission.world.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = RunLog::new(mission);
    // Inputs planned by the most recent solve, covering indices
    // `ell_star..ell_star + n`.
    let mut plan: Vec<Vec<f64>> = Vec::new();
    let mut ell_star = 0usize;

    loop {
        let ell = world.t_index;
        log.steps.push(snapshot_record(&world));

        let w = detect_service(&world);
        let (serviced_world, events) = apply_service(&world, &w);
        world = serviced_world;
        log.services.extend(events);

        if (0..world.explorers.len()).all(|i| world.explorers[i].in_goal) {
            log.termination_index = Some(ell);
            break;
        }
        if ell >= mission.step_limit {
            return Err(RuntimeError::StepLimit {
                limit: mission.step_limit,
                snapshot: Box::new(log),
            });
        }

        // Index 0 always plans; later indices re-plan on service or when the
        // previous plan is exhausted. A service at index 0 folds into the
        // initial solve (the estimates are already synchronized, so a second
        // solve would reproduce the same plan).
        if ell == 0 || should_resolve(&w, ell, ell_star, n) {
            let reason = if ell == 0 {
                ResolveReason::Initial
            } else if !w.is_empty() {
                ResolveReason::Service
            } else {
                ResolveReason::HorizonExpired
            };

            let trace = realized_trace(&log)?;
            let specialized = specialize(&mission.formula, &trace, Some(ell))?;
            let encoded_formula = to_nnf(&specialized);

            let mut estimates = BTreeMap::new();
            let mut estimate_outputs = Vec::with_capacity(world.explorers.len());
            for (i, name) in mission.estimate_signals.iter().enumerate() {
                let plan_i = precompute_estimates(
                    &world.explorers[i].x_hat,
                    &world.x_g,
                    &world.models[i],
                    world.ts,
                    n,
                )?;
                estimates.insert(name.clone(), plan_i.outputs.clone());
                estimate_outputs.push(plan_i.outputs);
            }
            let ctx = EncodingContext::new(ell, n, mission.subject_signal.clone(), estimates)?;
            let (ad, bd) = world.relay_discrete();
            let relay_plan = RelayPlanInput {
                ad,
                bd,
                c: &world.relay.c0,
                x0_at_start: &world.x0,
                u_min: &world.relay.u_min,
                u_max: &world.relay.u_max,
            };
            let encoded = build_milp(&encoded_formula, &ctx, &relay_plan)?;
            let result = solve(&encoded.model, &mission.solver)?;
            match result.status {
                SolveStatus::Optimal => {}
                SolveStatus::Infeasible => {
                    return Err(RuntimeError::Infeasible {
                        t_index: ell,
                        formula: encoded_formula.to_string(),
                        snapshot: Box::new(log),
                    });
                }
                SolveStatus::IterationLimit => {
                    return Err(RuntimeError::SolverLimit {
                        t_index: ell,
                        nodes: result.stats.nodes,
                        snapshot: Box::new(log),
                    });
                }
            }

            plan = encoded
                .u_vars
                .iter()
                .map(|ids| ids.iter().map(|&id| result.assignment[id]).collect())
                .collect();

            // Contact audit data: planned steps whose relay output lies in
            // the inscribed box of the eta-ball around the predicted
            // estimate; the exact distance is recorded for the soundness
            // check (it can be at most eta).
            let output_dim = world.relay.c0.rows();
            let half = world.eta / (output_dim as f64).sqrt();
            let mut planned_services = Vec::new();
            for k in 0..n {
                let y0_planned: Vec<f64> = (0..output_dim)
                    .map(|r| {
                        world
                            .relay
                            .c0
                            .row(r)
                            .iter()
                            .zip(&encoded.x_vars[k])
                            .map(|(c, &id)| c * result.assignment[id])
                            .sum()
                    })
                    .collect();
                for (i, outputs) in estimate_outputs.iter().enumerate() {
                    let target = &outputs[k];
                    let inside_box = y0_planned
                        .iter()
                        .zip(target)
                        .all(|(a, b)| (a - b).abs() <= half + 1e-7);
                    if inside_box {
                        let distance = y0_planned
                            .iter()
                            .zip(target)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        planned_services.push(PlannedService {
                            explorer: i,
                            t_index: ell + k,
                            distance,
                        });
                    }
                }
            }

            log.resolves.push(ResolveEvent {
                t_index: ell,
                reason,
                serviced: w.iter().copied().collect(),
                specialized: encoded_formula.to_string(),
                objective: result.objective,
                nodes: result.stats.nodes,
                simplex_iterations: result.stats.simplex_iterations,
                wall_seconds: result.stats.wall_seconds,
                binaries: encoded.model.binaries().count(),
                rows: encoded.model.constraints.len(),
                planned_services,
            });
            ell_star = ell;
        }

        let u0 = plan[ell - ell_star].clone();
        let record = log.steps.last_mut().expect("a record was just pushed");
        record.u0 = Some(u0.clone());
        record.source_resolve = Some(log.resolves.len() - 1);
        world = step_world(&world, &u0, &mut rng)?;
    }

    log.cumulative_effort = cumulative_effort(&log);
    let trace = realized_trace(&log)?;
    log.verdict = Some(Verdict {
        weak: eval_weak(&trace, &mission.formula, 0)?,
        strong: eval_strong(&trace, &mission.formula, 0)?,
    });
    Ok(log)
}
