//! Bounded-variable primal simplex on a dense tableau.
//!
//! Every variable carries its own (possibly infinite) bounds. Each
//! constraint row receives one slack column whose bounds encode the sense,
//! so the initial basis is the slack identity; rows whose slack starts
//! outside its bounds get a phase-1 artificial that is driven to zero
//! before the real objective runs. Dantzig pricing with a permanent switch
//! to Bland's rule once the objective stalls.

use super::{MilpError, MilpModel, Sense};

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;
const STALL_LIMIT: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// One value per declared model variable; empty unless `Optimal`.
    pub values: Vec<f64>,
    pub iterations: u64,
}

/// Solves the LP relaxation: binaries are treated as continuous on [0, 1].
pub fn lp_relax_solve(model: &MilpModel) -> Result<LpSolution, MilpError> {
    let lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    solve_with_bounds(model, &lower, &upper)
}

/// Solves the relaxation under overridden variable bounds (used by
/// branch-and-bound node fixings).
pub(crate) fn solve_with_bounds(
    model: &MilpModel,
    lower: &[f64],
    upper: &[f64],
) -> Result<LpSolution, MilpError> {
    model.validate()?;
    let infeasible = LpSolution {
        status: LpStatus::Infeasible,
        objective: f64::INFINITY,
        values: Vec::new(),
        iterations: 0,
    };
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(infeasible);
    }

    let mut t = Tableau::build(model, lower, upper);
    let cap = 2000 + 50 * (t.m as u64 + t.ncols as u64);

    match t.optimize(cap)? {
        End::Optimal => {}
        End::Unbounded => {
            return Err(MilpError::Numerical(
                "phase 1 reported an unbounded infeasibility objective".into(),
            ))
        }
    }
    let rhs_scale = model.constraints.iter().fold(0.0_f64, |a, c| a.max(c.rhs.abs()));
    if t.obj > 1e-8 * (1.0 + rhs_scale) {
        return Ok(LpSolution { iterations: t.iterations, ..infeasible });
    }

    t.enter_phase2(model);
    let end = t.optimize(cap)?;
    let values = t.extract(model.vars.len());
    match end {
        End::Unbounded => Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            values: Vec::new(),
            iterations: t.iterations,
        }),
        End::Optimal => Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: model.objective_value(&values),
            values,
            iterations: t.iterations,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Free variable resting at zero until it enters the basis.
    FreeZero,
}

enum End {
    Optimal,
    Unbounded,
}

fn nonbasic_value(st: VStatus, lo: f64, up: f64) -> f64 {
    match st {
        VStatus::AtLower => lo,
        VStatus::AtUpper => up,
        VStatus::FreeZero => 0.0,
        VStatus::Basic => unreachable!("basic values live in beta"),
    }
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Structural + slack columns; artificial columns come after.
    n_real: usize,
    /// m x ncols row-major image of the constraint matrix under the current
    /// basis inverse.
    tab: Vec<f64>,
    /// Reduced costs for the active phase, one per column.
    d: Vec<f64>,
    /// Current value of the basic variable of each row.
    beta: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<VStatus>,
    /// Row -> basic column.
    basic: Vec<usize>,
    obj: f64,
    iterations: u64,
    bland: bool,
    stall: u32,
    scratch: Vec<f64>,
}

impl Tableau {
    fn build(model: &MilpModel, lo_struct: &[f64], up_struct: &[f64]) -> Tableau {
        let n = model.vars.len();
        let m = model.constraints.len();

        let mut lower = Vec::with_capacity(n + 2 * m);
        let mut upper = Vec::with_capacity(n + 2 * m);
        lower.extend_from_slice(lo_struct);
        upper.extend_from_slice(up_struct);
        let mut status: Vec<VStatus> = (0..n)
            .map(|j| {
                if lower[j].is_finite() {
                    VStatus::AtLower
                } else if upper[j].is_finite() {
                    VStatus::AtUpper
                } else {
                    VStatus::FreeZero
                }
            })
            .collect();
        for c in &model.constraints {
            let (lo, up) = match c.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(up);
        }

        // With all structurals pinned at their starting values, the slack of
        // row i would have to absorb rhs - a.x; rows where that value leaves
        // the slack bounds get an artificial basic column instead.
        let mut slack_val = vec![0.0; m];
        for (i, c) in model.constraints.iter().enumerate() {
            let q: f64 = c
                .terms
                .iter()
                .map(|&(id, coef)| coef * nonbasic_value(status[id], lower[id], upper[id]))
                .sum();
            slack_val[i] = c.rhs - q;
        }
        // sign of the artificial column, 0 when the slack can stay basic
        let mut art = vec![0.0_f64; m];
        let mut n_art = 0usize;
        for i in 0..m {
            if slack_val[i] < lower[n + i] {
                art[i] = -1.0;
                n_art += 1;
            } else if slack_val[i] > upper[n + i] {
                art[i] = 1.0;
                n_art += 1;
            }
        }

        let n_real = n + m;
        let ncols = n_real + n_art;
        let mut tab = vec![0.0; m * ncols];
        let mut basic = vec![0usize; m];
        let mut beta = vec![0.0; m];
        let mut next_art = n_real;
        for (i, c) in model.constraints.iter().enumerate() {
            let row = &mut tab[i * ncols..(i + 1) * ncols];
            for &(id, coef) in &c.terms {
                row[id] += coef;
            }
            row[n + i] = 1.0;
            if art[i] == 0.0 {
                basic[i] = n + i;
                beta[i] = slack_val[i];
                status.push(VStatus::Basic);
            } else {
                // Pin the slack at the bound it overshot and hand the
                // residual to the artificial.
                let (pin, st) = if art[i] < 0.0 {
                    (lower[n + i], VStatus::AtLower)
                } else {
                    (upper[n + i], VStatus::AtUpper)
                };
                status.push(st);
                row[next_art] = art[i];
                if art[i] < 0.0 {
                    for v in row.iter_mut() {
                        *v = -*v;
                    }
                }
                basic[i] = next_art;
                beta[i] = (slack_val[i] - pin).abs();
                next_art += 1;
            }
        }
        for _ in 0..n_art {
            lower.push(0.0);
            upper.push(f64::INFINITY);
            status.push(VStatus::Basic);
        }

        // Phase-1 reduced costs: minimize the sum of artificials.
        let mut d = vec![0.0; ncols];
        for j in n_real..ncols {
            d[j] = 1.0;
        }
        let mut obj = 0.0;
        for i in 0..m {
            if basic[i] >= n_real {
                obj += beta[i];
                let row = &tab[i * ncols..(i + 1) * ncols];
                for (dj, r) in d.iter_mut().zip(row) {
                    *dj -= r;
                }
            }
        }

        Tableau {
            m,
            ncols,
            n_real,
            tab,
            d,
            beta,
            lower,
            upper,
            status,
            basic,
            obj,
            iterations: 0,
            bland: false,
            stall: 0,
            scratch: vec![0.0; ncols],
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.tab[i * self.ncols..(i + 1) * self.ncols]
    }

    /// Entering column and its movement direction, or None at optimality.
    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            let dj = self.d[j];
            let dir = match self.status[j] {
                VStatus::Basic => continue,
                VStatus::AtLower if dj < -COST_TOL => 1.0,
                VStatus::AtUpper if dj > COST_TOL => -1.0,
                VStatus::FreeZero if dj.abs() > COST_TOL => -dj.signum(),
                _ => continue,
            };
            if self.lower[j] == self.upper[j] {
                continue;
            }
            if self.bland {
                return Some((j, dir));
            }
            match best {
                Some((_, _, score)) if dj.abs() <= score => {}
                _ => best = Some((j, dir, dj.abs())),
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Largest step the entering column can take and the blocking row.
    fn ratio_test(&self, q: usize, dir: f64) -> (f64, Option<(usize, VStatus)>) {
        let room = self.upper[q] - self.lower[q];
        let mut best = if room.is_finite() { room } else { f64::INFINITY };
        let mut leave: Option<(usize, VStatus)> = None;
        let mut leave_piv = 0.0_f64;
        for i in 0..self.m {
            let g = dir * self.tab[i * self.ncols + q];
            if g.abs() <= PIVOT_TOL {
                continue;
            }
            let (limit, to) = if g > 0.0 {
                let lo = self.lower[self.basic[i]];
                if !lo.is_finite() {
                    continue;
                }
                ((self.beta[i] - lo) / g, VStatus::AtLower)
            } else {
                let up = self.upper[self.basic[i]];
                if !up.is_finite() {
                    continue;
                }
                ((self.beta[i] - up) / g, VStatus::AtUpper)
            };
            let limit = limit.max(0.0);
            let better = if limit < best - RATIO_TIE {
                true
            } else if limit > best + RATIO_TIE || leave.is_none() {
                limit < best
            } else if self.bland {
                self.basic[i] < self.basic[leave.unwrap().0]
            } else {
                g.abs() > leave_piv.abs()
                    || (g.abs() == leave_piv.abs() && self.basic[i] < self.basic[leave.unwrap().0])
            };
            if better {
                best = best.min(limit);
                leave = Some((i, to));
                leave_piv = g;
            }
        }
        (best, leave)
    }

    fn shift_beta(&mut self, q: usize, step: f64) {
        if step == 0.0 {
            return;
        }
        for i in 0..self.m {
            self.beta[i] -= step * self.tab[i * self.ncols + q];
        }
    }

    fn pivot(&mut self, r: usize, q: usize, entering_value: f64, leave_to: VStatus) {
        let leaving = self.basic[r];
        self.status[leaving] = leave_to;
        self.status[q] = VStatus::Basic;
        self.basic[r] = q;
        self.beta[r] = entering_value;

        let ncols = self.ncols;
        let piv = self.tab[r * ncols + q];
        debug_assert!(piv.abs() > PIVOT_TOL / 2.0);
        let inv = 1.0 / piv;
        {
            let row = &mut self.tab[r * ncols..(r + 1) * ncols];
            for (s, v) in self.scratch.iter_mut().zip(row.iter_mut()) {
                *v *= inv;
                *s = *v;
            }
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * ncols + q];
            if f != 0.0 {
                let row = &mut self.tab[i * ncols..(i + 1) * ncols];
                for (v, s) in row.iter_mut().zip(&self.scratch) {
                    *v -= f * *s;
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (dj, s) in self.d.iter_mut().zip(&self.scratch) {
                *dj -= f * *s;
            }
            self.d[q] = 0.0;
        }
    }

    fn optimize(&mut self, cap: u64) -> Result<End, MilpError> {
        loop {
            if self.iterations >= cap {
                let arts = (0..self.m).filter(|&i| self.basic[i] >= self.n_real).count();
                return Err(MilpError::Numerical(format!(
                    "simplex iteration cap {cap} hit ({} rows, {} cols, {} artificial basics, obj {:.6e})",
                    self.m, self.ncols, arts, self.obj
                )));
            }
            let Some((q, dir)) = self.choose_entering() else {
                return Ok(End::Optimal);
            };
            self.iterations += 1;

            let (delta, leave) = self.ratio_test(q, dir);
            if delta.is_infinite() {
                return Ok(End::Unbounded);
            }
            let improvement = -(self.d[q] * dir * delta);
            self.obj += self.d[q] * dir * delta;
            match leave {
                None => {
                    // Bound flip: the entering variable crosses to its other
                    // bound without any basis change.
                    self.shift_beta(q, dir * delta);
                    self.status[q] = match self.status[q] {
                        VStatus::AtLower => VStatus::AtUpper,
                        VStatus::AtUpper => VStatus::AtLower,
                        other => other,
                    };
                }
                Some((r, to)) => {
                    let from = nonbasic_value(self.status[q], self.lower[q], self.upper[q]);
                    self.shift_beta(q, dir * delta);
                    self.pivot(r, q, from + dir * delta, to);
                }
            }
            if improvement > 1e-12 * (1.0 + self.obj.abs()) {
                self.stall = 0;
                self.bland = false;
            } else {
                self.stall += 1;
                if self.stall >= STALL_LIMIT {
                    self.bland = true;
                }
            }
        }
    }

    /// Pins the artificials at zero, pivots basic ones out where possible,
    /// and installs the real objective.
    fn enter_phase2(&mut self, model: &MilpModel) {
        for r in 0..self.m {
            if self.basic[r] < self.n_real {
                continue;
            }
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..self.n_real {
                if self.status[j] == VStatus::Basic {
                    continue;
                }
                let g = self.tab[r * self.ncols + j];
                if g.abs() > 1e-7 && pick.map_or(true, |(_, best)| g.abs() > best) {
                    pick = Some((j, g.abs()));
                }
            }
            if let Some((j, _)) = pick {
                // Degenerate swap: the artificial sits at zero, so nothing
                // moves; the entering variable becomes basic at its current
                // value.
                let value = nonbasic_value(self.status[j], self.lower[j], self.upper[j]);
                self.pivot(r, j, value, VStatus::AtLower);
            }
            // Rows with no eligible real column are redundant; their
            // artificial stays basic, held at zero by its bounds below.
        }
        for j in self.n_real..self.ncols {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            if self.status[j] != VStatus::Basic {
                self.status[j] = VStatus::AtLower;
            }
        }

        let mut cost = vec![0.0; self.ncols];
        for &(id, coef) in &model.objective {
            cost[id] += coef;
        }
        let mut d = cost.clone();
        for i in 0..self.m {
            let cb = cost[self.basic[i]];
            if cb != 0.0 {
                let row = self.row(i);
                for j in 0..self.ncols {
                    d[j] -= cb * row[j];
                }
            }
        }
        // Basic columns have zero reduced cost by construction; enforce it
        // exactly to keep pricing clean.
        for i in 0..self.m {
            d[self.basic[i]] = 0.0;
        }
        self.d = d;
        self.obj = 0.0;
        for j in 0..self.ncols {
            if cost[j] != 0.0 {
                let v = match self.status[j] {
                    VStatus::Basic => continue,
                    st => nonbasic_value(st, self.lower[j], self.upper[j]),
                };
                self.obj += cost[j] * v;
            }
        }
        for i in 0..self.m {
            self.obj += cost[self.basic[i]] * self.beta[i];
        }
        self.stall = 0;
        self.bland = false;
    }

    fn extract(&self, n: usize) -> Vec<f64> {
        let mut values = vec![0.0; n];
        for j in 0..n {
            if self.status[j] != VStatus::Basic {
                values[j] = nonbasic_value(self.status[j], self.lower[j], self.upper[j]);
            }
        }
        for i in 0..self.m {
            if self.basic[i] < n {
                values[self.basic[i]] = self.beta[i];
            }
        }
        values
    }
}
