use super::ast::{Formula, TimeInterval};
use super::semantics::Trace;
use super::MtlError;

/// Substitutes already-observed behaviour into a formula.
///
/// Given samples for indices `0..=ell`, every atom at an index inside that
/// prefix is replaced by the constant it evaluated to, temporal windows are
/// split into their decided and still-open parts, and constants are folded
/// away. The result `psi` is rooted at index 0 and satisfies, for every
/// continuation trace `t` that agrees with `observed` on `0..=ell`,
///
/// ```text
/// eval_strong(t, psi, 0) == eval_strong(t, formula, 0)
/// eval_weak(t, psi, 0)   == eval_weak(t, formula, 0)
/// ```
///
/// With `ell = None` nothing has been observed and the formula is returned
/// unchanged. Subtrees that end up entirely in the future are re-anchored at
/// their first relevant index with a point-window `F[j,j]`, which evaluates
/// them exactly there in both views.
pub fn specialize(
    formula: &Formula,
    observed: &Trace,
    ell: Option<usize>,
) -> Result<Formula, MtlError> {
    let ell = match ell {
        None => return Ok(formula.clone()),
        Some(l) => l,
    };
    if ell > observed.horizon() {
        return Err(MtlError::PrefixTooLong { ell, horizon: observed.horizon() });
    }
    spec(formula, 0, ell, observed)
}

/// Specialization of `formula` as seen from index `j`, returned rooted at
/// index 0.
fn spec(formula: &Formula, j: usize, ell: usize, obs: &Trace) -> Result<Formula, MtlError> {
    if j > ell {
        return Ok(anchor(formula.clone(), j));
    }
    match formula {
        Formula::True => Ok(Formula::True),
        Formula::False => Ok(Formula::False),
        Formula::Atom(p) => Ok(constant(obs.atom_holds(p, j)?)),
        Formula::Not(c) => Ok(fold_not(spec(c, j, ell, obs)?)),
        Formula::And(cs) => {
            let mut out = Vec::with_capacity(cs.len());
            for c in cs {
                out.push(spec(c, j, ell, obs)?);
            }
            Ok(fold_and(out))
        }
        Formula::Or(cs) => {
            let mut out = Vec::with_capacity(cs.len());
            for c in cs {
                out.push(spec(c, j, ell, obs)?);
            }
            Ok(fold_or(out))
        }
        Formula::Eventually(i, c) => {
            let start = j + i.lo;
            let mut disjuncts = Vec::new();
            if start <= ell {
                let observed_end = i.hi.map_or(ell, |hi| (j + hi).min(ell));
                for witness in start..=observed_end {
                    disjuncts.push(spec(c, witness, ell, obs)?);
                }
            }
            if let Some(rest) = remainder_window(start, i.hi.map(|hi| j + hi), ell) {
                disjuncts.push(mk_eventually(rest, (**c).clone()));
            }
            Ok(fold_or(disjuncts))
        }
        Formula::Always(i, c) => {
            let start = j + i.lo;
            let mut conjuncts = Vec::new();
            if start <= ell {
                let observed_end = i.hi.map_or(ell, |hi| (j + hi).min(ell));
                for witness in start..=observed_end {
                    conjuncts.push(spec(c, witness, ell, obs)?);
                }
            }
            if let Some(rest) = remainder_window(start, i.hi.map(|hi| j + hi), ell) {
                conjuncts.push(mk_always(rest, (**c).clone()));
            }
            Ok(fold_and(conjuncts))
        }
        Formula::Until(i, a, b) => {
            let start = j + i.lo;
            let mut disjuncts = Vec::new();
            if start <= ell {
                let observed_end = i.hi.map_or(ell, |hi| (j + hi).min(ell));
                for witness in start..=observed_end {
                    let mut parts = vec![spec(b, witness, ell, obs)?];
                    for k in j..witness {
                        parts.push(spec(a, k, ell, obs)?);
                    }
                    disjuncts.push(fold_and(parts));
                }
            }
            if let Some(rest) = remainder_window(start, i.hi.map(|hi| j + hi), ell) {
                // A future witness needs the observed stretch of `a` plus the
                // still-symbolic tail, re-anchored just past the prefix.
                let mut parts = Vec::new();
                for k in j..=ell {
                    parts.push(spec(a, k, ell, obs)?);
                }
                let shifted = TimeInterval {
                    lo: rest.lo - (ell + 1),
                    hi: rest.hi.map(|hi| hi - (ell + 1)),
                };
                let tail = mk_until(shifted, (**a).clone(), (**b).clone());
                parts.push(anchor(tail, ell + 1));
                disjuncts.push(fold_and(parts));
            }
            Ok(fold_or(disjuncts))
        }
    }
}

/// The part of the absolute window `[start, end]` that lies past the observed
/// prefix, or `None` if the window is fully observed.
fn remainder_window(start: usize, end: Option<usize>, ell: usize) -> Option<TimeInterval> {
    let lo = start.max(ell + 1);
    match end {
        Some(end) if end < lo => None,
        hi => Some(TimeInterval { lo, hi }),
    }
}

fn constant(value: bool) -> Formula {
    if value {
        Formula::True
    } else {
        Formula::False
    }
}

/// `F[j,j] f`, the point-window anchor evaluating `f` at absolute index `j`.
fn anchor(formula: Formula, j: usize) -> Formula {
    if j == 0 || matches!(formula, Formula::True | Formula::False) {
        return formula;
    }
    Formula::eventually(TimeInterval { lo: j, hi: Some(j) }, formula)
}

fn fold_not(f: Formula) -> Formula {
    match f {
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        Formula::Not(c) => *c,
        other => other.not(),
    }
}

fn fold_and(children: Vec<Formula>) -> Formula {
    let mut out = Vec::new();
    for c in children {
        match c {
            Formula::True => {}
            Formula::False => return Formula::False,
            Formula::And(cs) => out.extend(cs),
            other => out.push(other),
        }
    }
    Formula::and(out)
}

fn fold_or(children: Vec<Formula>) -> Formula {
    let mut out = Vec::new();
    for c in children {
        match c {
            Formula::False => {}
            Formula::True => return Formula::True,
            Formula::Or(cs) => out.extend(cs),
            other => out.push(other),
        }
    }
    Formula::or(out)
}

fn mk_eventually(interval: TimeInterval, inner: Formula) -> Formula {
    match inner {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        other => Formula::eventually(interval, other),
    }
}

fn mk_always(interval: TimeInterval, inner: Formula) -> Formula {
    match inner {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        other => Formula::always(interval, other),
    }
}

fn mk_until(interval: TimeInterval, lhs: Formula, rhs: Formula) -> Formula {
    match (&lhs, &rhs) {
        (_, Formula::False) => Formula::False,
        (_, Formula::True) if interval.lo == 0 => Formula::True,
        (Formula::True, _) => mk_eventually(interval, rhs),
        _ => Formula::until(interval, lhs, rhs),
    }
}
