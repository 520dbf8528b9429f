//! Mixed-integer linear programming: a model container with deterministic
//! variable ordering, an exact branch-and-bound solver over a dense
//! bounded-variable simplex, and LP-file export/import for driving external
//! solvers.

mod branch_bound;
mod lp_file;
mod presolve;
mod simplex;

pub use branch_bound::{solve, Backend, SolveStats, SolveStatus, SolverConfig, SolverResult};
pub use lp_file::{export_lp, import_solution, parse_lp, solution_text, ImportedSolution};
pub use simplex::{lp_relax_solve, LpSolution, LpStatus};

use std::fmt;

use thiserror::Error;

/// Default big-M constant: comfortably above the coordinate spans and
/// dynamics excursions of the shipped scenarios.
pub const DEFAULT_BIG_M: f64 = 1e4;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("variable id {0} referenced but not declared")]
    UndeclaredVar(usize),
    #[error("unknown variable name `{0}`")]
    UnknownVariable(String),
    #[error("duplicate solution entry for `{0}`")]
    DuplicateEntry(String),
    #[error("`{tag}` violated by {violation:.3e}")]
    AuditFailed { tag: String, violation: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("external solver failure: {0}")]
    External(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct MilpVar {
    pub id: usize,
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LinConstraint {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Provenance label; becomes the row name in LP exports.
    pub tag: String,
}

/// Minimization model. Variable ids are dense and assigned in declaration
/// order, which makes every downstream artifact (LP text, branching order,
/// solutions) deterministic for identical build sequences.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub vars: Vec<MilpVar>,
    pub constraints: Vec<LinConstraint>,
    pub objective: Vec<(usize, f64)>,
    pub big_m: f64,
}

impl Default for MilpModel {
    fn default() -> Self {
        Self::new()
    }
}

impl MilpModel {
    pub fn new() -> Self {
        MilpModel {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            big_m: DEFAULT_BIG_M,
        }
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        let id = self.vars.len();
        self.vars.push(MilpVar { id, name: name.into(), kind: VarKind::Continuous, lower, upper });
        id
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        let id = self.vars.len();
        self.vars.push(MilpVar { id, name: name.into(), kind: VarKind::Binary, lower: 0.0, upper: 1.0 });
        id
    }

    pub fn add_constraint(
        &mut self,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
        tag: impl Into<String>,
    ) {
        self.constraints.push(LinConstraint { terms, sense, rhs, tag: tag.into() });
    }

    pub fn add_objective_term(&mut self, var: usize, coef: f64) {
        self.objective.push((var, coef));
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.id)
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        if !(self.big_m.is_finite() && self.big_m > 0.0) {
            return Err(MilpError::InvalidModel(format!("big_m must be positive, got {}", self.big_m)));
        }
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(MilpError::InvalidModel(format!(
                    "variable {} has empty bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(MilpError::InvalidModel(format!(
                    "binary {} must stay within [0, 1]",
                    v.name
                )));
            }
        }
        for c in &self.constraints {
            if c.terms.is_empty() {
                return Err(MilpError::InvalidModel(format!("constraint `{}` has no terms", c.tag)));
            }
            for &(id, coef) in &c.terms {
                if id >= self.vars.len() {
                    return Err(MilpError::UndeclaredVar(id));
                }
                if !coef.is_finite() {
                    return Err(MilpError::InvalidModel(format!(
                        "constraint `{}` has a non-finite coefficient",
                        c.tag
                    )));
                }
            }
            if !c.rhs.is_finite() {
                return Err(MilpError::InvalidModel(format!("constraint `{}` has a non-finite rhs", c.tag)));
            }
        }
        for &(id, coef) in &self.objective {
            if id >= self.vars.len() {
                return Err(MilpError::UndeclaredVar(id));
            }
            if !coef.is_finite() {
                return Err(MilpError::InvalidModel("objective has a non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(id, c)| c * values[id]).sum()
    }
}

/// Independent check that `values` satisfies every bound, every constraint,
/// and binary integrality, all within an absolute tolerance.
pub fn audit_assignment(model: &MilpModel, values: &[f64], tol: f64) -> Result<(), MilpError> {
    if values.len() != model.vars.len() {
        return Err(MilpError::InvalidModel(format!(
            "assignment has {} values for {} variables",
            values.len(),
            model.vars.len()
        )));
    }
    for v in &model.vars {
        let x = values[v.id];
        let out = (v.lower - x).max(x - v.upper).max(0.0);
        if out > tol {
            return Err(MilpError::AuditFailed {
                tag: format!("bounds of {}", v.name),
                violation: out,
            });
        }
        if v.kind == VarKind::Binary {
            let frac = (x - x.round()).abs();
            if frac > tol {
                return Err(MilpError::AuditFailed {
                    tag: format!("integrality of {}", v.name),
                    violation: frac,
                });
            }
        }
    }
    for c in &model.constraints {
        let lhs: f64 = c.terms.iter().map(|&(id, coef)| coef * values[id]).sum();
        let violation = match c.sense {
            Sense::Le => lhs - c.rhs,
            Sense::Ge => c.rhs - lhs,
            Sense::Eq => (lhs - c.rhs).abs(),
        };
        if violation > tol {
            return Err(MilpError::AuditFailed { tag: c.tag.clone(), violation });
        }
    }
    Ok(())
}
