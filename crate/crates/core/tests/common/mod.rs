//! Shared helpers for the integration suites: seeded random model
//! generators and brute-force optimization oracles.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relay_mtl_core::encode::{build_milp, EncodingContext, RelayPlanInput};
use relay_mtl_core::linalg::Matrix;
use relay_mtl_core::milp::{
    lp_relax_solve, solve, LpStatus, MilpModel, Sense, SolveStatus, SolverConfig,
};
use relay_mtl_core::mtl::{
    eval_weak, is_nnf, to_nnf, AtomicPredicate, Formula, TimeInterval, Trace,
};
use relay_mtl_core::sim::RelayModel;

/// Snaps to quarters so the generated data is exactly representable and
/// knife-edge feasibility cases stay consistent between solvers.
pub fn quant(x: f64) -> f64 {
    (x * 4.0).round() / 4.0
}

/// Random box atom over the relay output: faces on the quarter grid so a
/// trajectory sample never lands inside the strict-complement margin.
pub fn random_box_atom(rng: &mut ChaCha8Rng, idx: usize) -> AtomicPredicate {
    let mut bounds = Vec::new();
    for _ in 0..3 {
        let c = quant(rng.gen_range(-10.0..10.0));
        let h = quant(rng.gen_range(1.0..8.0)).max(0.25);
        bounds.push((c - h, c + h));
    }
    AtomicPredicate::box_region(&format!("p{idx}"), "y0", bounds)
}

/// Random interval with a small lower bound; one in five is unbounded.
pub fn random_interval(rng: &mut ChaCha8Rng, h: usize) -> TimeInterval {
    let lo = rng.gen_range(0..=3usize);
    if rng.gen_bool(0.2) {
        TimeInterval::unbounded(lo)
    } else {
        TimeInterval::bounded(lo, lo + rng.gen_range(0..=h / 2)).unwrap()
    }
}

/// Random formula of bounded depth over the given atoms, mixing all
/// connectives and both polarities.
pub fn random_formula(
    rng: &mut ChaCha8Rng,
    depth: usize,
    atoms: &[AtomicPredicate],
    h: usize,
) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        let f = Formula::atom(atoms[rng.gen_range(0..atoms.len())].clone());
        return if rng.gen_bool(0.4) { Formula::not(f) } else { f };
    }
    match rng.gen_range(0..6) {
        0 => Formula::and(
            (0..rng.gen_range(2..=3))
                .map(|_| random_formula(rng, depth - 1, atoms, h))
                .collect(),
        ),
        1 => Formula::or(
            (0..rng.gen_range(2..=3))
                .map(|_| random_formula(rng, depth - 1, atoms, h))
                .collect(),
        ),
        2 => Formula::eventually(random_interval(rng, h), random_formula(rng, depth - 1, atoms, h)),
        3 => Formula::always(random_interval(rng, h), random_formula(rng, depth - 1, atoms, h)),
        4 => Formula::until(
            random_interval(rng, h),
            random_formula(rng, depth - 1, atoms, h),
            random_formula(rng, depth - 1, atoms, h),
        ),
        _ => Formula::not(random_formula(rng, depth - 1, atoms, h)),
    }
}

fn random_sense(rng: &mut ChaCha8Rng) -> Sense {
    match rng.gen_range(0..6) {
        0 => Sense::Eq,
        1 | 2 => Sense::Ge,
        _ => Sense::Le,
    }
}

/// A fully boxed LP with up to 6 variables and 8 rows, solvable by vertex
/// enumeration. Two thirds of the instances are built around an interior
/// witness point so they are provably feasible; the rest are uniformly
/// random and may be empty.
pub fn random_boxed_lp(rng: &mut ChaCha8Rng) -> MilpModel {
    let n = rng.gen_range(2..=6);
    let m = rng.gen_range(2..=8);
    let mut model = MilpModel::new();
    let mut witness = Vec::new();
    for i in 0..n {
        let lo = quant(rng.gen_range(-5.0..=0.0));
        let hi = lo + quant(rng.gen_range(0.5..=6.0)).max(0.25);
        model.add_continuous(format!("x{i}"), lo, hi);
        witness.push(quant(rng.gen_range(lo..=hi)).clamp(lo, hi));
    }
    let anchored = rng.gen_range(0..3) < 2;
    for r in 0..m {
        let k = rng.gen_range(1..=n);
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for _ in 0..k {
            let id = rng.gen_range(0..n);
            if terms.iter().any(|&(j, _)| j == id) {
                continue;
            }
            let mut coef = quant(rng.gen_range(-3.0..=3.0));
            if coef == 0.0 {
                coef = 1.0;
            }
            terms.push((id, coef));
        }
        let sense = random_sense(rng);
        let rhs = if anchored {
            let at_witness: f64 = terms.iter().map(|&(id, c)| c * witness[id]).sum();
            let slack = quant(rng.gen_range(0.0..=3.0));
            match sense {
                Sense::Le => at_witness + slack,
                Sense::Ge => at_witness - slack,
                Sense::Eq => at_witness,
            }
        } else {
            quant(rng.gen_range(-6.0..=6.0))
        };
        model.add_constraint(terms, sense, rhs, format!("r{r}"));
    }
    for i in 0..n {
        let c = quant(rng.gen_range(-2.0..=2.0));
        if c != 0.0 {
            model.add_objective_term(i, c);
        }
    }
    model
}

/// A mixed model with `max_binaries` or fewer binaries plus a few boxed
/// continuous variables, sized for exhaustive enumeration. Two thirds of
/// the instances admit an integral witness point by construction.
pub fn random_milp(rng: &mut ChaCha8Rng, max_binaries: usize) -> MilpModel {
    let b = rng.gen_range(1..=max_binaries);
    let c = rng.gen_range(1..=3);
    let m = rng.gen_range(2..=10);
    let mut model = MilpModel::new();
    let mut ids = Vec::new();
    let mut witness = Vec::new();
    for i in 0..b {
        ids.push(model.add_binary(format!("z{i}")));
        witness.push(if rng.gen_range(0..2) == 0 { 0.0 } else { 1.0 });
    }
    for i in 0..c {
        let lo = quant(rng.gen_range(-4.0..=0.0));
        let hi = lo + quant(rng.gen_range(0.5..=5.0)).max(0.25);
        ids.push(model.add_continuous(format!("x{i}"), lo, hi));
        witness.push(quant(rng.gen_range(lo..=hi)).clamp(lo, hi));
    }
    let n = ids.len();
    let anchored = rng.gen_range(0..3) < 2;
    for r in 0..m {
        let k = rng.gen_range(1..=n.min(4));
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for _ in 0..k {
            let slot = rng.gen_range(0..n);
            let id = ids[slot];
            if terms.iter().any(|&(j, _)| j == id) {
                continue;
            }
            let mut coef = quant(rng.gen_range(-3.0..=3.0));
            if coef == 0.0 {
                coef = -1.0;
            }
            terms.push((id, coef));
        }
        let sense = random_sense(rng);
        let rhs = if anchored {
            let at_witness: f64 = terms.iter().map(|&(id, c)| c * witness[id]).sum();
            let slack = quant(rng.gen_range(0.0..=2.5));
            match sense {
                Sense::Le => at_witness + slack,
                Sense::Ge => at_witness - slack,
                Sense::Eq => at_witness,
            }
        } else {
            quant(rng.gen_range(-5.0..=5.0))
        };
        model.add_constraint(terms, sense, rhs, format!("r{r}"));
    }
    for &id in &ids {
        let coef = quant(rng.gen_range(-2.0..=2.0));
        if coef != 0.0 {
            model.add_objective_term(id, coef);
        }
    }
    model
}

/// Cross-validates the MILP encoding against the trace evaluator on `cases`
/// seeded random instances: random formula, random reference trajectory,
/// every input pinned by an equality row — feasibility of the model must
/// coincide with weak satisfaction on the trajectory, and a feasible model
/// must reproduce the pinned states. Panics on the first disagreement;
/// returns how many instances were satisfiable/unsatisfiable.
pub fn assert_pinned_encoder_matches(seed_base: u64, cases: u64) -> (usize, usize) {
    let ts = 0.5;
    let relay_model = RelayModel::hover(vec![-10.0; 4], vec![10.0; 4]).unwrap();
    let (ad, bd) = relay_model.discretize(ts).unwrap();
    let c = relay_model.c0.clone();
    let config = SolverConfig::default();

    let mut sat = 0usize;
    let mut unsat = 0usize;
    for seed in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_base + seed);
        let h = rng.gen_range(6..=12usize);
        let n_steps = h + 1;

        let atoms: Vec<AtomicPredicate> =
            (0..rng.gen_range(2..=3usize)).map(|i| random_box_atom(&mut rng, i)).collect();
        let raw = random_formula(&mut rng, 3, &atoms, h);
        let formula = to_nnf(&raw);
        assert!(is_nnf(&formula), "seed {seed}: NNF transform left a negation");

        let mut x0 = vec![0.0; 8];
        for s in 0..3 {
            x0[s] = rng.gen_range(-6.0..6.0);
        }
        for s in 3..5 {
            x0[s] = rng.gen_range(-0.5..0.5);
        }
        for s in 5..8 {
            x0[s] = rng.gen_range(-0.05..0.05);
        }
        let u_seq: Vec<Vec<f64>> = (0..n_steps)
            .map(|_| (0..4).map(|_| rng.gen_range(-0.05..0.05)).collect())
            .collect();

        // The reference trajectory and its output trace.
        let mut xs = vec![x0.clone()];
        for u in &u_seq {
            let mut next = ad.mat_vec(xs.last().unwrap());
            for (n, f) in next.iter_mut().zip(bd.mat_vec(u)) {
                *n += f;
            }
            xs.push(next);
        }
        let ys: Vec<Vec<f64>> = xs.iter().take(n_steps).map(|x| c.mat_vec(x)).collect();
        let mut signals = BTreeMap::new();
        signals.insert("y0".to_string(), ys);
        let trace = Trace::new(ts, signals).unwrap();
        assert_eq!(trace.horizon(), h);
        let expected = eval_weak(&trace, &formula, 0).unwrap();

        let relay = RelayPlanInput {
            ad: &ad,
            bd: &bd,
            c: &c,
            x0_at_start: &x0,
            u_min: &[-10.0; 4],
            u_max: &[10.0; 4],
        };
        let ctx = EncodingContext::new(0, n_steps, "y0", BTreeMap::new()).unwrap();
        let mut enc = build_milp(&formula, &ctx, &relay).unwrap();
        for (k, u) in u_seq.iter().enumerate() {
            for (ch, &value) in u.iter().enumerate() {
                enc.model.add_constraint(
                    vec![(enc.u_vars[k][ch], 1.0)],
                    Sense::Eq,
                    value,
                    format!("pin[{ch}]@{k}"),
                );
            }
        }
        let res = solve(&enc.model, &config).unwrap();
        let feasible = match res.status {
            SolveStatus::Optimal => true,
            SolveStatus::Infeasible => false,
            SolveStatus::IterationLimit => panic!("seed {seed}: node limit hit"),
        };
        assert_eq!(
            feasible, expected,
            "seed {seed}: encoder and evaluator disagree on {formula}"
        );
        if expected {
            sat += 1;
            // With inputs pinned the planned trajectory is the reference one.
            for (k, x) in xs.iter().enumerate() {
                for (s, &v) in x.iter().enumerate() {
                    assert!(
                        (res.assignment[enc.x_vars[k][s]] - v).abs() < 1e-6,
                        "seed {seed}: pinned state drifted"
                    );
                }
            }
        } else {
            unsat += 1;
        }
    }
    (sat, unsat)
}

/// Exact optimum of a fully boxed LP by enumerating candidate vertices:
/// every choice of `n` active planes among the rows and bound faces.
/// Returns `None` when no vertex is feasible (empty polytope).
pub fn vertex_enumeration_optimum(model: &MilpModel) -> Option<f64> {
    let n = model.vars.len();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &model.constraints {
        let mut row = vec![0.0; n];
        for &(id, coef) in &c.terms {
            row[id] += coef;
        }
        planes.push((row, c.rhs));
    }
    for v in &model.vars {
        let mut row = vec![0.0; n];
        row[v.id] = 1.0;
        planes.push((row.clone(), v.lower));
        planes.push((row, v.upper));
    }

    let feasible = |x: &[f64]| -> bool {
        const TOL: f64 = 1e-7;
        for v in &model.vars {
            if x[v.id] < v.lower - TOL || x[v.id] > v.upper + TOL {
                return false;
            }
        }
        for c in &model.constraints {
            let lhs: f64 = c.terms.iter().map(|&(id, coef)| coef * x[id]).sum();
            let ok = match c.sense {
                Sense::Le => lhs <= c.rhs + TOL,
                Sense::Ge => lhs >= c.rhs - TOL,
                Sense::Eq => (lhs - c.rhs).abs() <= TOL,
            };
            if !ok {
                return false;
            }
        }
        true
    };

    let mut best: Option<f64> = None;
    let mut combo: Vec<usize> = (0..n).collect();
    if planes.len() < n {
        return None;
    }
    loop {
        let rows: Vec<&[f64]> = combo.iter().map(|&i| planes[i].0.as_slice()).collect();
        let a = Matrix::from_rows(&rows);
        let rhs: Vec<f64> = combo.iter().map(|&i| planes[i].1).collect();
        if let Ok(x) = a.solve(&Matrix::col_vec(&rhs)) {
            let x: Vec<f64> = x.data().to_vec();
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                let obj = model.objective_value(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next lexicographic combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] != i + planes.len() - n {
                break;
            }
        }
        combo[i] += 1;
        for j in i + 1..n {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// Exact MILP optimum by trying every 0/1 pattern of the binaries and
/// solving the continuous remainder. `None` when every leaf is infeasible.
pub fn exhaustive_milp_optimum(model: &MilpModel) -> Option<f64> {
    let binaries: Vec<usize> = model.binaries().collect();
    let mut best: Option<f64> = None;
    for mask in 0u64..(1u64 << binaries.len()) {
        let mut fixed = model.clone();
        for (bit, &id) in binaries.iter().enumerate() {
            let v = ((mask >> bit) & 1) as f64;
            fixed.vars[id].lower = v;
            fixed.vars[id].upper = v;
        }
        let sol = lp_relax_solve(&fixed).expect("leaf LP failed");
        if sol.status == LpStatus::Optimal {
            best = Some(best.map_or(sol.objective, |b: f64| b.min(sol.objective)));
        }
    }
    best
}
