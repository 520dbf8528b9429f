use super::ast::{Formula, TimeInterval};

/// Rewrites a formula into negation normal form: negations appear only
/// directly on atoms, with operators otherwise drawn from `And`/`Or`/
/// `Until`/`Eventually`/`Always`.
///
/// The rewriting preserves both the strong and the weak finite-trace verdict
/// at every index. Negated temporal operators are dualized; a negated
/// `Until` expands into the release pattern
///
/// ```text
/// !(a U[l,h] b)  =  G[l,h] !b
///                 | F[0,l-1] !a                     (when l >= 1)
///                 | F[l,l] (!b U[0,h-l-1] (!a & !b)) (when h > l)
/// ```
///
/// which stays constant-size even for unbounded windows: either `b` never
/// gets a chance inside the window, or `a` already fails before the window
/// opens, or `b` keeps failing until `a` fails too.
pub fn to_nnf(formula: &Formula) -> Formula {
    nnf(formula, false)
}

fn nnf(formula: &Formula, negated: bool) -> Formula {
    match formula {
        Formula::True => {
            if negated {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::False => {
            if negated {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Atom(p) => {
            let atom = Formula::Atom(p.clone());
            if negated {
                atom.not()
            } else {
                atom
            }
        }
        Formula::Not(c) => nnf(c, !negated),
        Formula::And(cs) => {
            let children: Vec<Formula> = cs.iter().map(|c| nnf(c, negated)).collect();
            if negated {
                Formula::or(children)
            } else {
                Formula::and(children)
            }
        }
        Formula::Or(cs) => {
            let children: Vec<Formula> = cs.iter().map(|c| nnf(c, negated)).collect();
            if negated {
                Formula::and(children)
            } else {
                Formula::or(children)
            }
        }
        Formula::Eventually(i, c) => {
            if negated {
                Formula::always(*i, nnf(c, true))
            } else {
                Formula::eventually(*i, nnf(c, false))
            }
        }
        Formula::Always(i, c) => {
            if negated {
                Formula::eventually(*i, nnf(c, true))
            } else {
                Formula::always(*i, nnf(c, false))
            }
        }
        Formula::Until(i, a, b) => {
            if negated {
                negated_until(i, a, b)
            } else {
                Formula::until(*i, nnf(a, false), nnf(b, false))
            }
        }
    }
}

fn negated_until(interval: &TimeInterval, a: &Formula, b: &Formula) -> Formula {
    let not_a = nnf(a, true);
    let not_b = nnf(b, true);

    // Case 1: b fails at every index of the window.
    let mut disjuncts = vec![Formula::always(*interval, not_b.clone())];

    // Case 2: a fails strictly before the window opens, releasing every
    // obligation inside it.
    if interval.lo >= 1 {
        let pre = TimeInterval::bounded(0, interval.lo - 1).expect("lo-1 >= 0");
        disjuncts.push(Formula::eventually(pre, not_a.clone()));
    }

    // Case 3: b keeps failing from the start of the window until a fails at
    // an index that still has window obligations after it.
    let chase_window = match interval.hi {
        None => Some(TimeInterval::unbounded(0)),
        Some(hi) if hi > interval.lo => {
            Some(TimeInterval::bounded(0, hi - interval.lo - 1).expect("hi-lo-1 >= 0"))
        }
        Some(_) => None,
    };
    if let Some(w) = chase_window {
        let release = Formula::and(vec![not_a, not_b.clone()]);
        let chase = Formula::until(w, not_b, release);
        let anchored = if interval.lo == 0 {
            chase
        } else {
            let at = TimeInterval::bounded(interval.lo, interval.lo).expect("point interval");
            Formula::eventually(at, chase)
        };
        disjuncts.push(anchored);
    }

    Formula::or(disjuncts)
}

/// Whether negations occur only directly on atoms.
pub fn is_nnf(formula: &Formula) -> bool {
    match formula {
        Formula::True | Formula::False | Formula::Atom(_) => true,
        Formula::Not(c) => matches!(**c, Formula::Atom(_)),
        Formula::And(cs) | Formula::Or(cs) => cs.iter().all(is_nnf),
        Formula::Until(_, a, b) => is_nnf(a) && is_nnf(b),
        Formula::Eventually(_, c) | Formula::Always(_, c) => is_nnf(c),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::mtl::ast::AtomicPredicate;
    use crate::mtl::semantics::{eval_strong, eval_weak, Trace};

    fn atom(id: &str, subject: &str) -> Formula {
        Formula::atom(AtomicPredicate::box_region(id, subject, vec![(0.5, 1.5)]))
    }

    /// Two-signal bit trace: `p` reads signal `yp`, `q` reads signal `yq`.
    fn trace(p_bits: &[u8], q_bits: &[u8]) -> Trace {
        assert_eq!(p_bits.len(), q_bits.len());
        let mut signals = BTreeMap::new();
        signals.insert(
            "yp".to_string(),
            p_bits.iter().map(|b| vec![f64::from(*b)]).collect(),
        );
        signals.insert(
            "yq".to_string(),
            q_bits.iter().map(|b| vec![f64::from(*b)]).collect(),
        );
        Trace::new(0.5, signals).unwrap()
    }

    /// Checks verdict preservation exhaustively over every bit trace of the
    /// given length and every evaluation index up to one past the horizon.
    fn assert_equivalent_on_all_traces(formula: &Formula, len: usize) {
        let rewritten = to_nnf(formula);
        assert!(is_nnf(&rewritten), "not in NNF: {rewritten}");
        for code in 0..(1u32 << (2 * len)) {
            let p_bits: Vec<u8> = (0..len).map(|k| ((code >> k) & 1) as u8).collect();
            let q_bits: Vec<u8> = (0..len).map(|k| ((code >> (len + k)) & 1) as u8).collect();
            let tr = trace(&p_bits, &q_bits);
            for index in 0..=len {
                assert_eq!(
                    eval_strong(&tr, formula, index).unwrap(),
                    eval_strong(&tr, &rewritten, index).unwrap(),
                    "strong verdict changed at index {index} on p={p_bits:?} q={q_bits:?}: {formula} vs {rewritten}"
                );
                assert_eq!(
                    eval_weak(&tr, formula, index).unwrap(),
                    eval_weak(&tr, &rewritten, index).unwrap(),
                    "weak verdict changed at index {index} on p={p_bits:?} q={q_bits:?}: {formula} vs {rewritten}"
                );
            }
        }
    }

    fn p() -> Formula {
        atom("p", "yp")
    }

    fn q() -> Formula {
        atom("q", "yq")
    }

    fn bounded(lo: usize, hi: usize) -> TimeInterval {
        TimeInterval::bounded(lo, hi).unwrap()
    }

    #[test]
    fn double_negation_cancels() {
        let f = p().not().not();
        assert_eq!(to_nnf(&f), p());
    }

    #[test]
    fn de_morgan_on_connectives() {
        let f = Formula::and(vec![p(), q()]).not();
        assert_eq!(to_nnf(&f), Formula::or(vec![p().not(), q().not()]));
    }

    #[test]
    fn negated_eventually_becomes_always() {
        let f = Formula::eventually(bounded(1, 4), p()).not();
        assert_eq!(to_nnf(&f), Formula::always(bounded(1, 4), p().not()));
    }

    #[test]
    fn negated_until_with_point_window() {
        // !(p U[2,2] q) = G[2,2]!q | F[0,1]!p -- no chase disjunct.
        let f = Formula::until(bounded(2, 2), p(), q()).not();
        let g = to_nnf(&f);
        match &g {
            Formula::Or(cs) => assert_eq!(cs.len(), 2),
            other => panic!("expected a 2-way Or, got {other}"),
        }
        assert_equivalent_on_all_traces(&f, 4);
    }

    #[test]
    fn negated_until_zero_based_window() {
        let f = Formula::until(bounded(0, 3), p(), q()).not();
        assert_equivalent_on_all_traces(&f, 5);
    }

    #[test]
    fn negated_until_shifted_window() {
        let f = Formula::until(bounded(1, 4), p(), q()).not();
        assert_equivalent_on_all_traces(&f, 6);
    }

    #[test]
    fn negated_until_unbounded_window() {
        let f = Formula::until(TimeInterval::all(), p(), q()).not();
        assert_equivalent_on_all_traces(&f, 5);

        let g = Formula::until(TimeInterval::unbounded(2), p(), q()).not();
        assert_equivalent_on_all_traces(&g, 5);
    }

    #[test]
    fn negation_under_nested_operators() {
        let f = Formula::always(
            bounded(0, 2),
            Formula::until(bounded(0, 2), p(), q()).not(),
        );
        assert_equivalent_on_all_traces(&f, 5);

        let g = Formula::eventually(TimeInterval::all(), Formula::always(bounded(0, 1), p()))
            .not();
        assert_equivalent_on_all_traces(&g, 4);
    }

    #[test]
    fn nnf_of_nnf_is_identity() {
        let f = Formula::until(bounded(0, 3), p(), Formula::or(vec![q().not(), p()])).not();
        let once = to_nnf(&f);
        let twice = to_nnf(&once);
        assert_eq!(once, twice);
    }
}
