use std::fmt;

use serde::{Deserialize, Serialize};

use super::MtlError;

/// Discrete time interval `[lo, hi]` in sampling steps; `hi: None` means the
/// interval is unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl TimeInterval {
    pub fn bounded(lo: usize, hi: usize) -> Result<Self, MtlError> {
        if lo > hi {
            return Err(MtlError::InvalidInterval { lo, hi });
        }
        Ok(TimeInterval { lo, hi: Some(hi) })
    }

    pub fn unbounded(lo: usize) -> Self {
        TimeInterval { lo, hi: None }
    }

    /// The full-line interval `[0, inf)`, the default for bare `F`/`G`/`U`.
    pub fn all() -> Self {
        TimeInterval { lo: 0, hi: None }
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_some()
    }

    pub fn contains(&self, k: usize) -> bool {
        k >= self.lo && self.hi.map_or(true, |hi| k <= hi)
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "[{},{}]", self.lo, hi),
            None => write!(f, "[{},inf]", self.lo),
        }
    }
}

/// Where a norm-ball predicate takes its center from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CenterRef {
    /// Fixed point in the output space.
    Const(Vec<f64>),
    /// Sample of another trace signal at the same time index.
    Signal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PredicateKind {
    /// `|y_subject - center|_2 <= radius`.
    NormBall { center: CenterRef, radius: f64 },
    /// Axis-aligned box `min_k <= y_k <= max_k` per output component.
    BoxRegion { bounds: Vec<(f64, f64)> },
}

/// An atomic predicate over one signal of the trace at the current index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicPredicate {
    /// Identifier used by the parser and printer.
    pub id: String,
    /// Name of the trace signal the predicate constrains.
    pub subject: String,
    pub kind: PredicateKind,
}

impl AtomicPredicate {
    pub fn norm_ball(id: &str, subject: &str, center: CenterRef, radius: f64) -> Self {
        AtomicPredicate {
            id: id.to_string(),
            subject: subject.to_string(),
            kind: PredicateKind::NormBall { center, radius },
        }
    }

    pub fn box_region(id: &str, subject: &str, bounds: Vec<(f64, f64)>) -> Self {
        AtomicPredicate {
            id: id.to_string(),
            subject: subject.to_string(),
            kind: PredicateKind::BoxRegion { bounds },
        }
    }
}

/// Metric temporal logic formula over discrete sampling steps.
///
/// `And`/`Or` are n-ary; the parser flattens `a & b & c` into a single
/// three-child `And`. `Eventually` and `Always` are kept as first-class
/// operators rather than rewritten through `Until` so that printing and
/// specialization preserve the shape the caller wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    True,
    False,
    Atom(AtomicPredicate),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Until(TimeInterval, Box<Formula>, Box<Formula>),
    Eventually(TimeInterval, Box<Formula>),
    Always(TimeInterval, Box<Formula>),
}

/// How many sampling steps beyond the evaluation index a formula can inspect.
///
/// When a trace extends at least this far, the strong and weak views agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Unbounded,
}

impl Horizon {
    fn max(self, other: Horizon) -> Horizon {
        match (self, other) {
            (Horizon::Finite(a), Horizon::Finite(b)) => Horizon::Finite(a.max(b)),
            _ => Horizon::Unbounded,
        }
    }

    fn plus(self, steps: usize) -> Horizon {
        match self {
            Horizon::Finite(a) => Horizon::Finite(a + steps),
            Horizon::Unbounded => Horizon::Unbounded,
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(n) => write!(f, "{n}"),
            Horizon::Unbounded => write!(f, "unbounded"),
        }
    }
}

impl Formula {
    pub fn atom(pred: AtomicPredicate) -> Formula {
        Formula::Atom(pred)
    }

    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn and(children: Vec<Formula>) -> Formula {
        match children.len() {
            0 => Formula::True,
            1 => children.into_iter().next().unwrap(),
            _ => Formula::And(children),
        }
    }

    pub fn or(children: Vec<Formula>) -> Formula {
        match children.len() {
            0 => Formula::False,
            1 => children.into_iter().next().unwrap(),
            _ => Formula::Or(children),
        }
    }

    pub fn until(interval: TimeInterval, lhs: Formula, rhs: Formula) -> Formula {
        Formula::Until(interval, Box::new(lhs), Box::new(rhs))
    }

    pub fn eventually(interval: TimeInterval, inner: Formula) -> Formula {
        Formula::Eventually(interval, Box::new(inner))
    }

    pub fn always(interval: TimeInterval, inner: Formula) -> Formula {
        Formula::Always(interval, Box::new(inner))
    }

    /// Minimal number of steps past the evaluation index the formula depends
    /// on. Unbounded operators make the result [`Horizon::Unbounded`].
    pub fn necessary_length(&self) -> Horizon {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => Horizon::Finite(0),
            Formula::Not(c) => c.necessary_length(),
            Formula::And(cs) | Formula::Or(cs) => cs
                .iter()
                .map(Formula::necessary_length)
                .fold(Horizon::Finite(0), Horizon::max),
            Formula::Until(i, a, b) => match i.hi {
                Some(hi) => a.necessary_length().max(b.necessary_length()).plus(hi),
                None => Horizon::Unbounded,
            },
            Formula::Eventually(i, c) | Formula::Always(i, c) => match i.hi {
                Some(hi) => c.necessary_length().plus(hi),
                None => Horizon::Unbounded,
            },
        }
    }

    /// All atomic predicates in the formula, in syntactic order, duplicates
    /// included.
    pub fn atoms(&self) -> Vec<&AtomicPredicate> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a AtomicPredicate>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(p) => out.push(p),
            Formula::Not(c) | Formula::Eventually(_, c) | Formula::Always(_, c) => {
                c.collect_atoms(out)
            }
            Formula::And(cs) | Formula::Or(cs) => {
                for c in cs {
                    c.collect_atoms(out);
                }
            }
            Formula::Until(_, a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Binding strength used by the printer and parser. Higher binds tighter.
    fn precedence(&self) -> u8 {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 4,
            Formula::Not(_) | Formula::Eventually(..) | Formula::Always(..) => 3,
            Formula::And(_) => 2,
            Formula::Or(_) => 1,
            Formula::Until(..) => 0,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }

    fn fmt_interval(interval: &TimeInterval, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Bare operators mean [0, inf); anything else is printed explicitly.
        if *interval != TimeInterval::all() {
            write!(f, "{interval}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    /// Prints in the grammar accepted by [`parse_formula`](super::parse_formula):
    /// `!`/`F`/`G` bind tightest, then `&`, then `|`, then right-associative
    /// `U`. Same-precedence children are parenthesized so that re-parsing
    /// reproduces the tree exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(p) => write!(f, "{}", p.id),
            Formula::Not(c) => {
                write!(f, "!")?;
                c.fmt_child(f, 3)
            }
            Formula::And(cs) => {
                for (k, c) in cs.iter().enumerate() {
                    if k > 0 {
                        write!(f, " & ")?;
                    }
                    // Parenthesize nested And so flattening on re-parse
                    // cannot merge it into this node.
                    if matches!(c, Formula::And(_)) {
                        write!(f, "({c})")?;
                    } else {
                        c.fmt_child(f, 2)?;
                    }
                }
                Ok(())
            }
            Formula::Or(cs) => {
                for (k, c) in cs.iter().enumerate() {
                    if k > 0 {
                        write!(f, " | ")?;
                    }
                    if matches!(c, Formula::Or(_)) {
                        write!(f, "({c})")?;
                    } else {
                        c.fmt_child(f, 1)?;
                    }
                }
                Ok(())
            }
            Formula::Until(i, a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " U")?;
                Formula::fmt_interval(i, f)?;
                write!(f, " ")?;
                // Right-associative: an Until on the right needs no parens.
                b.fmt_child(f, 0)
            }
            Formula::Eventually(i, c) => {
                write!(f, "F")?;
                Formula::fmt_interval(i, f)?;
                write!(f, " ")?;
                c.fmt_child(f, 3)
            }
            Formula::Always(i, c) => {
                write!(f, "G")?;
                Formula::fmt_interval(i, f)?;
                write!(f, " ")?;
                c.fmt_child(f, 3)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(id: &str) -> Formula {
        Formula::atom(AtomicPredicate::box_region(id, "y0", vec![(0.0, 1.0)]))
    }

    #[test]
    fn interval_rejects_inverted_bounds() {
        assert!(matches!(
            TimeInterval::bounded(3, 2),
            Err(MtlError::InvalidInterval { lo: 3, hi: 2 })
        ));
        assert!(TimeInterval::bounded(2, 2).is_ok());
    }

    #[test]
    fn necessary_length_of_nested_operators() {
        let i05 = TimeInterval::bounded(0, 5).unwrap();
        let i24 = TimeInterval::bounded(2, 4).unwrap();
        let f = Formula::until(
            i05,
            atom("a"),
            Formula::eventually(i24, atom("b")),
        );
        // Until adds its own upper bound on top of the deeper window.
        assert_eq!(f.necessary_length(), Horizon::Finite(9));

        let g = Formula::always(TimeInterval::all(), atom("a"));
        assert_eq!(g.necessary_length(), Horizon::Unbounded);

        let h = Formula::and(vec![atom("a"), Formula::eventually(i05, atom("b"))]);
        assert_eq!(h.necessary_length(), Horizon::Finite(5));
    }

    #[test]
    fn printer_parenthesizes_by_precedence() {
        let i = TimeInterval::bounded(0, 3).unwrap();
        let f = Formula::and(vec![
            Formula::or(vec![atom("a"), atom("b")]),
            Formula::always(i, atom("c").not()),
        ]);
        assert_eq!(f.to_string(), "(a | b) & G[0,3] !c");

        let g = Formula::until(
            TimeInterval::all(),
            Formula::and(vec![atom("a"), atom("b")]),
            atom("c"),
        );
        assert_eq!(g.to_string(), "a & b U c");

        let nested = Formula::until(
            TimeInterval::bounded(1, 2).unwrap(),
            Formula::until(TimeInterval::all(), atom("a"), atom("b")),
            atom("c"),
        );
        assert_eq!(nested.to_string(), "(a U b) U[1,2] c");
    }

    #[test]
    fn printer_keeps_nested_same_operator_grouped() {
        let inner = Formula::And(vec![atom("a"), atom("b")]);
        let outer = Formula::And(vec![inner, atom("c")]);
        assert_eq!(outer.to_string(), "(a & b) & c");
    }

    #[test]
    fn unbounded_interval_prints_bare_and_shifted_windows_explicitly() {
        let f = Formula::eventually(TimeInterval::all(), atom("a"));
        assert_eq!(f.to_string(), "F a");
        let g = Formula::eventually(TimeInterval::unbounded(2), atom("a"));
        assert_eq!(g.to_string(), "F[2,inf] a");
    }

    #[test]
    fn empty_connective_builders_collapse_to_constants() {
        assert_eq!(Formula::and(vec![]), Formula::True);
        assert_eq!(Formula::or(vec![]), Formula::False);
        let single = Formula::and(vec![atom("a")]);
        assert_eq!(single, atom("a"));
    }
}
