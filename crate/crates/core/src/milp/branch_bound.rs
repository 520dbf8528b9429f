//! Best-first branch-and-bound over the LP relaxation.
//!
//! Nodes are ordered by relaxation bound (lowest first), then depth
//! (deepest first), then creation sequence, so a run is a deterministic
//! function of the model and configuration. Branching picks the most
//! fractional binary, lowest id on ties, and explores the nearest-integer
//! child first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::lp_file::solve_external;
use super::presolve::{propagate_bounds, PresolveResult};
use super::simplex::{solve_with_bounds, LpStatus};
use super::{audit_assignment, MilpError, MilpModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Builtin,
    /// Command template with `{in}` and `{out}` placeholders for the LP
    /// file and the solution file.
    External(String),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub backend: Backend,
    pub integrality_tol: f64,
    pub relative_gap: f64,
    pub node_limit: usize,
    /// Wall-clock cutoff in seconds; `None` keeps runs fully deterministic.
    pub time_limit: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            backend: Backend::Builtin,
            integrality_tol: 1e-6,
            relative_gap: 1e-6,
            node_limit: 200_000,
            time_limit: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), MilpError> {
        if !(self.integrality_tol > 0.0) || !(self.relative_gap >= 0.0) {
            return Err(MilpError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.node_limit == 0 {
            return Err(MilpError::InvalidConfig("node limit must be positive".into()));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(MilpError::InvalidConfig("time limit must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub nodes: usize,
    pub simplex_iterations: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub status: SolveStatus,
    /// `+inf` when no feasible assignment was found.
    pub objective: f64,
    /// One value per declared variable; empty when infeasible.
    pub assignment: Vec<f64>,
    pub stats: SolveStats,
}

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap pops the maximum, so "greater" must mean "explore first":
    // lowest bound, then greatest depth, then earliest creation.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

pub fn solve(model: &MilpModel, config: &SolverConfig) -> Result<SolverResult, MilpError> {
    model.validate()?;
    config.validate()?;
    match &config.backend {
        Backend::Builtin => solve_builtin(model, config),
        Backend::External(template) => solve_external(model, template),
    }
}

fn solve_builtin(model: &MilpModel, config: &SolverConfig) -> Result<SolverResult, MilpError> {
    let start = Instant::now();
    let binaries: Vec<usize> = model.binaries().collect();

    let mut root_lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let mut root_upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    if let PresolveResult::Infeasible = propagate_bounds(model, &mut root_lower, &mut root_upper) {
        return Ok(SolverResult {
            status: SolveStatus::Infeasible,
            objective: f64::INFINITY,
            assignment: Vec::new(),
            stats: SolveStats { wall_seconds: start.elapsed().as_secs_f64(), ..Default::default() },
        });
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq: 0,
        lower: root_lower,
        upper: root_upper,
    });

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut stats = SolveStats::default();
    let mut seq = 1u64;
    let mut truncated = false;

    let cutoff = |inc: f64, gap: f64| inc - (1e-9_f64).max(gap * inc.abs());

    while let Some(node) = heap.pop() {
        if stats.nodes >= config.node_limit {
            truncated = true;
            break;
        }
        if let Some(limit) = config.time_limit {
            if start.elapsed().as_secs_f64() > limit {
                truncated = true;
                break;
            }
        }
        if let Some((inc, _)) = &incumbent {
            if node.bound >= cutoff(*inc, config.relative_gap) {
                continue;
            }
        }
        stats.nodes += 1;

        let sol = solve_with_bounds(model, &node.lower, &node.upper)?;
        stats.simplex_iterations += sol.iterations;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Err(MilpError::Unbounded),
            LpStatus::Optimal => {}
        }
        if let Some((inc, _)) = &incumbent {
            if sol.objective >= cutoff(*inc, config.relative_gap) {
                continue;
            }
        }

        match most_fractional(&binaries, &sol.values, config.integrality_tol) {
            None => {
                let better = incumbent.as_ref().map_or(true, |(inc, _)| sol.objective < *inc);
                if better {
                    incumbent = Some((sol.objective, sol.values));
                }
            }
            Some(var) => {
                let v = sol.values[var];
                let first = if v >= 0.5 { 1.0 } else { 0.0 };
                for fix in [first, 1.0 - first] {
                    let mut lower = node.lower.clone();
                    let mut upper = node.upper.clone();
                    if fix >= 0.5 {
                        lower[var] = 1.0;
                    } else {
                        upper[var] = 0.0;
                    }
                    heap.push(Node {
                        bound: sol.objective,
                        depth: node.depth + 1,
                        seq,
                        lower,
                        upper,
                    });
                    seq += 1;
                }
            }
        }
    }

    stats.wall_seconds = start.elapsed().as_secs_f64();
    let status = match (&incumbent, truncated) {
        (_, true) => SolveStatus::IterationLimit,
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
    };
    let (objective, assignment) = incumbent.unwrap_or((f64::INFINITY, Vec::new()));
    if status == SolveStatus::Optimal {
        audit_assignment(model, &assignment, 1e-6)?;
    }
    Ok(SolverResult { status, objective, assignment, stats })
}

/// The binary farthest from an integer value, ties to the lowest id; `None`
/// when all binaries are integral within `tol`.
fn most_fractional(binaries: &[usize], values: &[f64], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &id in binaries {
        let dist = (values[id] - values[id].round()).abs();
        if dist <= tol {
            continue;
        }
        match best {
            Some((_, score)) if dist <= score => {}
            _ => best = Some((id, dist)),
        }
    }
    best.map(|(id, _)| id)
}
