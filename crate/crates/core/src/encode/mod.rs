//! Lowers a specialized NNF formula, the relay's discrete dynamics, its
//! input box, and precomputed explorer-estimate trajectories into one
//! mixed-integer linear model with an L1 effort objective.
//!
//! Structure of the encoding:
//! - Relay states and inputs are continuous variables chained by equality
//!   rows; outputs are substituted inline as `C x` terms, never declared.
//! - Explorer estimates evolve by a known feedback, so their trajectories
//!   fold to constants before encoding and contribute no variables.
//! - Literals (atoms and negated atoms — the formula must be in negation
//!   normal form) become binaries whose value 1 forces the literal to hold
//!   via big-M face rows; negated boxes need one extra selector binary per
//!   face plus a cover row. Every other operator node becomes a continuous
//!   [0, 1] auxiliary tied to its children from both sides, so aux values
//!   are exactly the boolean value of their subformula once the literals
//!   are integral.
//! - Subformulas that must hold in every solution (the root, conjuncts and
//!   window instances reached through only ∧/□ from the root) skip their
//!   auxiliary and emit hard rows instead.
//! - Beyond the weak horizon H every literal is true, so windows reaching
//!   past H fold: ◇/U gain an automatically-true witness and □ drops the
//!   out-of-range conjuncts. Unbounded windows truncate to H the same way.
//! - Euclidean balls `|y - c| <= r` are replaced by the inscribed box of
//!   half-width `r/sqrt(dim)`, so MILP feasibility implies the exact
//!   predicate. Strict complements use a 1e-6 margin.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};
use crate::milp::{MilpError, MilpModel, Sense};
use crate::mtl::{AtomicPredicate, CenterRef, Formula, PredicateKind};
use crate::sim::ExplorerModel;

/// Margin used to encode the open complement of a closed face.
pub const STRICT_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("formula is not in negation normal form (negation on a non-atom)")]
    NotInNnf,
    #[error("atom instance at step {j} precedes the planning window starting at {start}")]
    AtomBeforeStart { j: usize, start: usize },
    #[error("atom constrains signal `{0}`, but only the relay output can be encoded")]
    Subject(String),
    #[error("no precomputed estimate trajectory named `{0}`")]
    UnknownEstimate(String),
    #[error("estimate `{name}` has {got} samples, need {expected}")]
    EstimateLength { name: String, got: usize, expected: usize },
    #[error("{what}: got dimension {got}, expected {expected}")]
    Dimension { what: &'static str, got: usize, expected: usize },
    #[error("input bounds are empty on channel {channel} ({lo} > {hi})")]
    EmptyInputBox { channel: usize, lo: f64, hi: f64 },
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// How nonlinear predicates are linearized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearizationMode {
    /// Inscribed infinity-norm box: feasibility implies the exact 2-norm
    /// predicate.
    #[default]
    InnerBox,
}

/// Time frame and constant-folded signals for one planning window.
#[derive(Debug, Clone)]
pub struct EncodingContext {
    /// First planned step (the current index).
    pub start: usize,
    /// Number of planned inputs.
    pub n_steps: usize,
    /// Weak horizon `start + n_steps - 1`: the last step with a planned
    /// state sample that formulas may constrain.
    pub horizon: usize,
    /// Signal name atoms must constrain.
    pub subject_signal: String,
    /// Estimate output trajectories by explorer name, `n_steps` samples
    /// each covering `start..=horizon`.
    pub estimates: BTreeMap<String, Vec<Vec<f64>>>,
    pub mode: LinearizationMode,
}

impl EncodingContext {
    pub fn new(
        start: usize,
        n_steps: usize,
        subject_signal: impl Into<String>,
        estimates: BTreeMap<String, Vec<Vec<f64>>>,
    ) -> Result<Self, EncodeError> {
        if n_steps == 0 {
            return Err(EncodeError::Dimension { what: "planning steps", got: 0, expected: 1 });
        }
        for (name, samples) in &estimates {
            if samples.len() != n_steps {
                return Err(EncodeError::EstimateLength {
                    name: name.clone(),
                    got: samples.len(),
                    expected: n_steps,
                });
            }
        }
        Ok(EncodingContext {
            start,
            n_steps,
            horizon: start + n_steps - 1,
            subject_signal: subject_signal.into(),
            estimates,
            mode: LinearizationMode::InnerBox,
        })
    }
}

/// Relay-side inputs to the encoding: discrete model, output map, current
/// state, and the input box.
#[derive(Debug, Clone)]
pub struct RelayPlanInput<'a> {
    pub ad: &'a Matrix,
    pub bd: &'a Matrix,
    pub c: &'a Matrix,
    pub x0_at_start: &'a [f64],
    pub u_min: &'a [f64],
    pub u_max: &'a [f64],
}

/// The assembled model plus the variable maps needed to read a plan back
/// out of a solver assignment.
#[derive(Debug, Clone)]
pub struct EncodedMilp {
    pub model: MilpModel,
    /// `x_vars[k][s]` is state `s` at step `start + k`, `k = 0..=n_steps`.
    pub x_vars: Vec<Vec<usize>>,
    /// `u_vars[k][c]` is input channel `c` at step `start + k`.
    pub u_vars: Vec<Vec<usize>>,
}

/// Constant-folded estimate trajectory for one explorer over the window.
#[derive(Debug, Clone)]
pub struct EstimatePlan {
    /// Full estimate states, `n_steps` samples from the start index.
    pub states: Vec<Vec<f64>>,
    /// Output images of those states.
    pub outputs: Vec<Vec<f64>>,
}

/// Rolls the explorer estimate forward under its own feedback: the input
/// is a known function of the estimate, so the whole trajectory is a
/// constant. The step map is the exact closed-loop flow over one period,
/// matching how the estimate actually evolves between services.
pub fn precompute_estimates(
    x_hat_at_start: &[f64],
    x_g: &[f64],
    model: &ExplorerModel,
    ts: f64,
    n_steps: usize,
) -> Result<EstimatePlan, EncodeError> {
    let m = model.state_dim();
    if x_hat_at_start.len() != m {
        return Err(EncodeError::Dimension {
            what: "estimate state",
            got: x_hat_at_start.len(),
            expected: m,
        });
    }
    if x_g.len() != m {
        return Err(EncodeError::Dimension { what: "goal state", got: x_g.len(), expected: m });
    }
    let phi = model.closed_loop_step(ts)?;
    let mut states = Vec::with_capacity(n_steps);
    let mut outputs = Vec::with_capacity(n_steps);
    let mut x = x_hat_at_start.to_vec();
    for k in 0..n_steps {
        if k > 0 {
            let dev: Vec<f64> = x.iter().zip(x_g).map(|(a, g)| a - g).collect();
            let step = phi.mat_vec(&dev);
            x = step.iter().zip(x_g).map(|(s, g)| s + g).collect();
        }
        outputs.push(model.c.mat_vec(&x));
        states.push(x.clone());
    }
    Ok(EstimatePlan { states, outputs })
}

/// Assembles the full model: dynamics chain, input bounds, effort
/// objective, and the formula rooted as a hard requirement.
pub fn build_milp(
    formula: &Formula,
    ctx: &EncodingContext,
    relay: &RelayPlanInput,
) -> Result<EncodedMilp, EncodeError> {
    let n_states = relay.ad.rows();
    let n_inputs = relay.bd.cols();
    if relay.x0_at_start.len() != n_states {
        return Err(EncodeError::Dimension {
            what: "relay state",
            got: relay.x0_at_start.len(),
            expected: n_states,
        });
    }
    if relay.c.cols() != n_states {
        return Err(EncodeError::Dimension {
            what: "output map columns",
            got: relay.c.cols(),
            expected: n_states,
        });
    }
    if relay.u_min.len() != n_inputs || relay.u_max.len() != n_inputs {
        return Err(EncodeError::Dimension {
            what: "input bounds",
            got: relay.u_min.len().min(relay.u_max.len()),
            expected: n_inputs,
        });
    }
    for (c, (&lo, &hi)) in relay.u_min.iter().zip(relay.u_max).enumerate() {
        if lo > hi {
            return Err(EncodeError::EmptyInputBox { channel: c, lo, hi });
        }
    }

    let mut model = MilpModel::new();
    let inf = f64::INFINITY;

    // States are left free: the initial equality and the dynamics chain pin
    // them given the bounded inputs.
    let mut x_vars = Vec::with_capacity(ctx.n_steps + 1);
    for k in 0..=ctx.n_steps {
        let j = ctx.start + k;
        let row: Vec<usize> =
            (0..n_states).map(|s| model.add_continuous(format!("x0[{s}]@{j}"), -inf, inf)).collect();
        x_vars.push(row);
    }
    let mut u_vars = Vec::with_capacity(ctx.n_steps);
    for k in 0..ctx.n_steps {
        let j = ctx.start + k;
        let row: Vec<usize> = (0..n_inputs)
            .map(|c| model.add_continuous(format!("u[{c}]@{j}"), relay.u_min[c], relay.u_max[c]))
            .collect();
        u_vars.push(row);
    }
    // L1 effort surrogate: one slack per input channel per step.
    for k in 0..ctx.n_steps {
        let j = ctx.start + k;
        for c in 0..n_inputs {
            let s = model.add_continuous(format!("s[{c}]@{j}"), 0.0, inf);
            model.add_constraint(
                vec![(s, 1.0), (u_vars[k][c], -1.0)],
                Sense::Ge,
                0.0,
                format!("eff+[{c}]@{j}"),
            );
            model.add_constraint(
                vec![(s, 1.0), (u_vars[k][c], 1.0)],
                Sense::Ge,
                0.0,
                format!("eff-[{c}]@{j}"),
            );
            model.add_objective_term(s, 1.0);
        }
    }

    for (s, &value) in relay.x0_at_start.iter().enumerate() {
        model.add_constraint(vec![(x_vars[0][s], 1.0)], Sense::Eq, value, format!("init[{s}]"));
    }
    for k in 0..ctx.n_steps {
        let j = ctx.start + k;
        for s in 0..n_states {
            let mut terms = vec![(x_vars[k + 1][s], 1.0)];
            for t in 0..n_states {
                let a = relay.ad.row(s)[t];
                if a != 0.0 {
                    terms.push((x_vars[k][t], -a));
                }
            }
            for c in 0..n_inputs {
                let b = relay.bd.row(s)[c];
                if b != 0.0 {
                    terms.push((u_vars[k][c], -b));
                }
            }
            model.add_constraint(terms, Sense::Eq, 0.0, format!("dyn[{s}]@{j}"));
        }
    }

    let (y_lo, y_hi) = output_reach_box(relay, ctx.n_steps);
    let mut enc = Encoder {
        model: &mut model,
        ctx,
        c: relay.c,
        x_vars: &x_vars,
        y_lo: &y_lo,
        y_hi: &y_hi,
        literal_memo: BTreeMap::new(),
        op_memo: BTreeMap::new(),
    };
    enc.encode(formula, 0, true)?;

    model.validate()?;
    Ok(EncodedMilp { model, x_vars, u_vars })
}

/// Componentwise reachability box of the output over the window, from
/// interval propagation of the exact initial state through the dynamics
/// under the input box. Used to size each big-M coefficient as tightly as
/// the worst reachable face violation instead of one loose constant.
fn output_reach_box(relay: &RelayPlanInput, n_steps: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n_states = relay.ad.rows();
    let n_inputs = relay.bd.cols();

    let span = |terms: &mut dyn Iterator<Item = (f64, f64, f64)>| -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (coef, l, h) in terms {
            let (a, b) = (coef * l, coef * h);
            lo += a.min(b);
            hi += a.max(b);
        }
        (lo, hi)
    };

    let mut x_lo: Vec<f64> = relay.x0_at_start.to_vec();
    let mut x_hi = x_lo.clone();
    let mut y_lo = Vec::with_capacity(n_steps);
    let mut y_hi = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let mut row_lo = Vec::with_capacity(relay.c.rows());
        let mut row_hi = Vec::with_capacity(relay.c.rows());
        for r in 0..relay.c.rows() {
            let (lo, hi) = span(
                &mut (0..n_states).map(|t| (relay.c.row(r)[t], x_lo[t], x_hi[t])),
            );
            row_lo.push(lo);
            row_hi.push(hi);
        }
        y_lo.push(row_lo);
        y_hi.push(row_hi);

        let mut next_lo = Vec::with_capacity(n_states);
        let mut next_hi = Vec::with_capacity(n_states);
        for s in 0..n_states {
            let (mut lo, mut hi) = span(
                &mut (0..n_states).map(|t| (relay.ad.row(s)[t], x_lo[t], x_hi[t])),
            );
            let (ulo, uhi) = span(
                &mut (0..n_inputs).map(|c| (relay.bd.row(s)[c], relay.u_min[c], relay.u_max[c])),
            );
            lo += ulo;
            hi += uhi;
            next_lo.push(lo);
            next_hi.push(hi);
        }
        x_lo = next_lo;
        x_hi = next_hi;
    }
    (y_lo, y_hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Enc {
    Const(bool),
    Var(usize),
}

struct Encoder<'a> {
    model: &'a mut MilpModel,
    ctx: &'a EncodingContext,
    c: &'a Matrix,
    x_vars: &'a [Vec<usize>],
    y_lo: &'a [Vec<f64>],
    y_hi: &'a [Vec<f64>],
    literal_memo: BTreeMap<(String, bool, usize, bool), Enc>,
    op_memo: BTreeMap<(String, usize, bool), Enc>,
}

impl Encoder<'_> {
    fn encode(&mut self, f: &Formula, j: usize, forced: bool) -> Result<Enc, EncodeError> {
        match f {
            Formula::True => Ok(Enc::Const(true)),
            Formula::False => {
                if forced {
                    self.mark_infeasible("false@root");
                }
                Ok(Enc::Const(false))
            }
            Formula::Atom(a) => self.literal(a, false, j, forced),
            Formula::Not(inner) => match &**inner {
                Formula::Atom(a) => self.literal(a, true, j, forced),
                _ => Err(EncodeError::NotInNnf),
            },
            Formula::And(children) => {
                if forced {
                    for c in children {
                        self.encode(c, j, true)?;
                    }
                    return Ok(Enc::Const(true));
                }
                let key = (f.to_string(), j, false);
                if let Some(&hit) = self.op_memo.get(&key) {
                    return Ok(hit);
                }
                let items = children
                    .iter()
                    .map(|c| self.encode(c, j, false))
                    .collect::<Result<Vec<_>, _>>()?;
                let out = self.and_combine(items, &format!("and@{j}"))?;
                self.op_memo.insert(key, out);
                Ok(out)
            }
            Formula::Or(children) => {
                let key = (f.to_string(), j, forced);
                if let Some(&hit) = self.op_memo.get(&key) {
                    return Ok(hit);
                }
                let items = children
                    .iter()
                    .map(|c| self.encode(c, j, false))
                    .collect::<Result<Vec<_>, _>>()?;
                let out = self.or_combine(items, forced, &format!("or@{j}"))?;
                self.op_memo.insert(key, out);
                Ok(out)
            }
            Formula::Always(i, g) => {
                let lo = j + i.lo;
                if lo > self.ctx.horizon {
                    return Ok(Enc::Const(true));
                }
                let hi = i.hi.map_or(self.ctx.horizon, |h| (j + h).min(self.ctx.horizon));
                if forced {
                    for jj in lo..=hi {
                        self.encode(g, jj, true)?;
                    }
                    return Ok(Enc::Const(true));
                }
                let key = (f.to_string(), j, false);
                if let Some(&hit) = self.op_memo.get(&key) {
                    return Ok(hit);
                }
                let items = (lo..=hi)
                    .map(|jj| self.encode(g, jj, false))
                    .collect::<Result<Vec<_>, _>>()?;
                let out = self.and_combine(items, &format!("alw@{j}"))?;
                self.op_memo.insert(key, out);
                Ok(out)
            }
            Formula::Eventually(i, g) => {
                // A window reaching past the horizon carries a weakly true
                // witness, so the whole node is already satisfied.
                let beyond = i.hi.map_or(true, |h| j + h > self.ctx.horizon);
                if beyond {
                    return Ok(Enc::Const(true));
                }
                let lo = j + i.lo;
                if lo > self.ctx.horizon {
                    return Ok(Enc::Const(true));
                }
                let key = (f.to_string(), j, forced);
                if let Some(&hit) = self.op_memo.get(&key) {
                    return Ok(hit);
                }
                let hi = (j + i.hi.expect("bounded here")).min(self.ctx.horizon);
                let items = (lo..=hi)
                    .map(|jj| self.encode(g, jj, false))
                    .collect::<Result<Vec<_>, _>>()?;
                let out = self.or_combine(items, forced, &format!("evt@{j}"))?;
                self.op_memo.insert(key, out);
                Ok(out)
            }
            Formula::Until(i, a, b) => {
                let key = (f.to_string(), j, forced);
                if let Some(&hit) = self.op_memo.get(&key) {
                    return Ok(hit);
                }
                let lo = j + i.lo;
                let beyond = i.hi.map_or(true, |h| j + h > self.ctx.horizon);
                let mut items = Vec::new();
                if lo <= self.ctx.horizon {
                    let hi = i.hi.map_or(self.ctx.horizon, |h| (j + h).min(self.ctx.horizon));
                    for jp in lo..=hi {
                        let mut conj = vec![self.encode(b, jp, false)?];
                        for k in j..jp {
                            conj.push(self.encode(a, k, false)?);
                        }
                        items.push(self.and_combine(conj, &format!("until-wit@{jp}"))?);
                    }
                }
                if beyond {
                    // Witness past the horizon: the right side holds weakly
                    // there, so only the left side up to the horizon remains.
                    let mut conj = Vec::new();
                    for k in j..=self.ctx.horizon {
                        conj.push(self.encode(a, k, false)?);
                    }
                    items.push(self.and_combine(conj, &format!("until-tail@{j}"))?);
                }
                let out = self.or_combine(items, forced, &format!("until@{j}"))?;
                self.op_memo.insert(key, out);
                Ok(out)
            }
        }
    }

    fn and_combine(&mut self, items: Vec<Enc>, tag: &str) -> Result<Enc, EncodeError> {
        let mut vars = Vec::new();
        for it in items {
            match it {
                Enc::Const(false) => return Ok(Enc::Const(false)),
                Enc::Const(true) => {}
                Enc::Var(v) => vars.push(v),
            }
        }
        match vars.len() {
            0 => Ok(Enc::Const(true)),
            1 => Ok(Enc::Var(vars[0])),
            n => {
                let aux = self.model.add_continuous(format!("{tag}:aux"), 0.0, 1.0);
                for (k, &v) in vars.iter().enumerate() {
                    self.model.add_constraint(
                        vec![(aux, 1.0), (v, -1.0)],
                        Sense::Le,
                        0.0,
                        format!("{tag}:le{k}"),
                    );
                }
                let mut terms = vec![(aux, 1.0)];
                for &v in &vars {
                    terms.push((v, -1.0));
                }
                self.model.add_constraint(
                    terms,
                    Sense::Ge,
                    -((n as f64) - 1.0),
                    format!("{tag}:ge"),
                );
                Ok(Enc::Var(aux))
            }
        }
    }

    fn or_combine(&mut self, items: Vec<Enc>, forced: bool, tag: &str) -> Result<Enc, EncodeError> {
        let mut vars = Vec::new();
        for it in items {
            match it {
                Enc::Const(true) => return Ok(Enc::Const(true)),
                Enc::Const(false) => {}
                Enc::Var(v) => vars.push(v),
            }
        }
        if vars.is_empty() {
            if forced {
                self.mark_infeasible(tag);
            }
            return Ok(Enc::Const(false));
        }
        if forced {
            let terms = vars.iter().map(|&v| (v, 1.0)).collect();
            self.model.add_constraint(terms, Sense::Ge, 1.0, format!("{tag}:cover"));
            return Ok(Enc::Const(true));
        }
        if vars.len() == 1 {
            return Ok(Enc::Var(vars[0]));
        }
        let aux = self.model.add_continuous(format!("{tag}:aux"), 0.0, 1.0);
        for (k, &v) in vars.iter().enumerate() {
            self.model.add_constraint(
                vec![(aux, 1.0), (v, -1.0)],
                Sense::Ge,
                0.0,
                format!("{tag}:ge{k}"),
            );
        }
        let mut terms = vec![(aux, 1.0)];
        for &v in &vars {
            terms.push((v, -1.0));
        }
        self.model.add_constraint(terms, Sense::Le, 0.0, format!("{tag}:le"));
        Ok(Enc::Var(aux))
    }

    /// Face bounds of the literal's linearized region at step `j`.
    fn literal_box(&self, atom: &AtomicPredicate, j: usize) -> Result<Vec<(f64, f64)>, EncodeError> {
        let dim = self.c.rows();
        match &atom.kind {
            PredicateKind::BoxRegion { bounds } => {
                if bounds.len() != dim {
                    return Err(EncodeError::Dimension {
                        what: "box predicate",
                        got: bounds.len(),
                        expected: dim,
                    });
                }
                Ok(bounds.clone())
            }
            PredicateKind::NormBall { center, radius } => {
                let center: Vec<f64> = match center {
                    CenterRef::Const(v) => v.clone(),
                    CenterRef::Signal(name) => {
                        let samples = self
                            .ctx
                            .estimates
                            .get(name)
                            .ok_or_else(|| EncodeError::UnknownEstimate(name.clone()))?;
                        samples
                            .get(j - self.ctx.start)
                            .ok_or_else(|| EncodeError::EstimateLength {
                                name: name.clone(),
                                got: samples.len(),
                                expected: j - self.ctx.start + 1,
                            })?
                            .clone()
                    }
                };
                if center.len() != dim {
                    return Err(EncodeError::Dimension {
                        what: "ball center",
                        got: center.len(),
                        expected: dim,
                    });
                }
                let LinearizationMode::InnerBox = self.ctx.mode;
                let half = radius / (dim as f64).sqrt();
                Ok(center.iter().map(|&c| (c - half, c + half)).collect())
            }
        }
    }

    /// Terms for output component `r` at step `j`, scaled by `scale`.
    fn output_terms(&self, j: usize, r: usize, scale: f64) -> Vec<(usize, f64)> {
        let k = j - self.ctx.start;
        self.c
            .row(r)
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(t, &c)| (self.x_vars[k][t], scale * c))
            .collect()
    }

    fn literal(
        &mut self,
        atom: &AtomicPredicate,
        negated: bool,
        j: usize,
        forced: bool,
    ) -> Result<Enc, EncodeError> {
        if j > self.ctx.horizon {
            // Weak semantics past the horizon: both polarities hold.
            return Ok(Enc::Const(true));
        }
        if j < self.ctx.start {
            return Err(EncodeError::AtomBeforeStart { j, start: self.ctx.start });
        }
        if atom.subject != self.ctx.subject_signal {
            return Err(EncodeError::Subject(atom.subject.clone()));
        }
        let key = (atom.id.clone(), negated, j, forced);
        if let Some(&hit) = self.literal_memo.get(&key) {
            return Ok(hit);
        }
        let bounds = self.literal_box(atom, j)?;
        let label = if negated { format!("!{}", atom.id) } else { atom.id.clone() };
        // Per-row big-M: the worst reachable violation of that face, with a
        // small cushion; the model-wide constant is only a fallback for
        // unbounded reachability.
        let k = j - self.ctx.start;
        let big_m = self.model.big_m;
        let face_m = move |need: f64| {
            if need.is_finite() {
                need.max(0.0) + 1e-6
            } else {
                big_m
            }
        };

        let out = if !negated {
            if forced {
                for (r, &(lo, hi)) in bounds.iter().enumerate() {
                    self.model.add_constraint(
                        self.output_terms(j, r, 1.0),
                        Sense::Le,
                        hi,
                        format!("{label}@{j}:f{r}+"),
                    );
                    self.model.add_constraint(
                        self.output_terms(j, r, 1.0),
                        Sense::Ge,
                        lo,
                        format!("{label}@{j}:f{r}-"),
                    );
                }
                Enc::Const(true)
            } else {
                let z = self.model.add_binary(format!("z:{label}@{j}"));
                for (r, &(lo, hi)) in bounds.iter().enumerate() {
                    let m = face_m(self.y_hi[k][r] - hi);
                    let mut terms = self.output_terms(j, r, 1.0);
                    terms.push((z, m));
                    self.model.add_constraint(terms, Sense::Le, hi + m, format!("{label}@{j}:f{r}+"));
                    let m = face_m(lo - self.y_lo[k][r]);
                    let mut terms = self.output_terms(j, r, -1.0);
                    terms.push((z, m));
                    self.model.add_constraint(terms, Sense::Le, -lo + m, format!("{label}@{j}:f{r}-"));
                }
                Enc::Var(z)
            }
        } else {
            // Outside the box: at least one face strictly violated, one
            // selector binary per face.
            let mut selectors = Vec::new();
            for (r, &(lo, hi)) in bounds.iter().enumerate() {
                let above = self.model.add_binary(format!("sel:{label}@{j}:f{r}+"));
                let m = face_m(hi + STRICT_EPS - self.y_lo[k][r]);
                let mut terms = self.output_terms(j, r, 1.0);
                terms.push((above, -m));
                self.model.add_constraint(
                    terms,
                    Sense::Ge,
                    hi + STRICT_EPS - m,
                    format!("{label}@{j}:esc{r}+"),
                );
                selectors.push(above);
                let below = self.model.add_binary(format!("sel:{label}@{j}:f{r}-"));
                let m = face_m(self.y_hi[k][r] - lo + STRICT_EPS);
                let mut terms = self.output_terms(j, r, 1.0);
                terms.push((below, m));
                self.model.add_constraint(
                    terms,
                    Sense::Le,
                    lo - STRICT_EPS + m,
                    format!("{label}@{j}:esc{r}-"),
                );
                selectors.push(below);
            }
            if forced {
                let terms = selectors.iter().map(|&s| (s, 1.0)).collect();
                self.model.add_constraint(terms, Sense::Ge, 1.0, format!("{label}@{j}:cover"));
                Enc::Const(true)
            } else {
                let z = self.model.add_binary(format!("z:{label}@{j}"));
                let mut terms: Vec<(usize, f64)> = selectors.iter().map(|&s| (s, 1.0)).collect();
                terms.push((z, -1.0));
                self.model.add_constraint(terms, Sense::Ge, 0.0, format!("{label}@{j}:cover"));
                Enc::Var(z)
            }
        };
        self.literal_memo.insert(key, out);
        Ok(out)
    }

    fn mark_infeasible(&mut self, tag: &str) {
        let v = self.model.add_continuous(format!("never:{tag}"), 0.0, 0.0);
        self.model.add_constraint(vec![(v, 1.0)], Sense::Ge, 1.0, format!("infeasible:{tag}"));
    }
}
