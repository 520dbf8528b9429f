use std::collections::BTreeMap;

use super::ast::{AtomicPredicate, CenterRef, Formula, PredicateKind};
use super::MtlError;

/// A finite multi-signal trace sampled at a fixed period.
///
/// Every signal carries one vector sample per time index `0..=horizon`; all
/// signals share the same length.
#[derive(Debug, Clone)]
pub struct Trace {
    period: f64,
    horizon: usize,
    signals: BTreeMap<String, Vec<Vec<f64>>>,
}

impl Trace {
    pub fn new(period: f64, signals: BTreeMap<String, Vec<Vec<f64>>>) -> Result<Self, MtlError> {
        let mut horizon = None;
        for (name, samples) in &signals {
            if samples.is_empty() {
                return Err(MtlError::EmptyTrace);
            }
            match horizon {
                None => horizon = Some(samples.len() - 1),
                Some(h) => {
                    if samples.len() - 1 != h {
                        return Err(MtlError::RaggedSignal {
                            name: name.clone(),
                            got: samples.len(),
                            expected: h + 1,
                        });
                    }
                }
            }
            let dim = samples[0].len();
            for (index, s) in samples.iter().enumerate() {
                if s.len() != dim {
                    return Err(MtlError::SampleDimension {
                        name: name.clone(),
                        index,
                        got: s.len(),
                        expected: dim,
                    });
                }
            }
        }
        let horizon = horizon.ok_or(MtlError::EmptyTrace)?;
        Ok(Trace { period, horizon, signals })
    }

    /// Index of the last sample.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn sampling_period(&self) -> f64 {
        self.period
    }

    pub fn signal_names(&self) -> impl Iterator<Item = &str> {
        self.signals.keys().map(String::as_str)
    }

    pub fn sample(&self, name: &str, index: usize) -> Result<&[f64], MtlError> {
        let samples = self
            .signals
            .get(name)
            .ok_or_else(|| MtlError::UnknownSignal(name.to_string()))?;
        samples
            .get(index)
            .map(Vec::as_slice)
            .ok_or_else(|| MtlError::RaggedSignal {
                name: name.to_string(),
                got: samples.len(),
                expected: index + 1,
            })
    }

    /// Truncates to the first `ell + 1` samples (indices `0..=ell`).
    pub fn prefix(&self, ell: usize) -> Result<Trace, MtlError> {
        if ell > self.horizon {
            return Err(MtlError::PrefixTooLong { ell, horizon: self.horizon });
        }
        let signals = self
            .signals
            .iter()
            .map(|(name, samples)| (name.clone(), samples[..=ell].to_vec()))
            .collect();
        Ok(Trace { period: self.period, horizon: ell, signals })
    }

    /// Whether the predicate holds on the sample at `index` (must be within
    /// the horizon).
    pub fn atom_holds(&self, pred: &AtomicPredicate, index: usize) -> Result<bool, MtlError> {
        let y = self.sample(&pred.subject, index)?;
        match &pred.kind {
            PredicateKind::NormBall { center, radius } => {
                let c: &[f64] = match center {
                    CenterRef::Const(c) => c,
                    CenterRef::Signal(name) => self.sample(name, index)?,
                };
                if c.len() != y.len() {
                    return Err(MtlError::Predicate {
                        id: pred.id.clone(),
                        msg: format!(
                            "center dimension {} does not match signal dimension {}",
                            c.len(),
                            y.len()
                        ),
                    });
                }
                let dist2: f64 = y.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok(dist2 <= radius * radius)
            }
            PredicateKind::BoxRegion { bounds } => {
                if bounds.len() != y.len() {
                    return Err(MtlError::Predicate {
                        id: pred.id.clone(),
                        msg: format!(
                            "box dimension {} does not match signal dimension {}",
                            bounds.len(),
                            y.len()
                        ),
                    });
                }
                Ok(y.iter().zip(bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi))
            }
        }
    }
}

/// Outcome of monitoring a formula on a finite trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Verdict {
    /// Holds even if the trace ended before every obligation was witnessed.
    pub weak: bool,
    /// Holds with all obligations witnessed inside the trace.
    pub strong: bool,
}

impl Verdict {
    /// Human-readable classification: strong satisfaction implies weak, so the
    /// three reachable outcomes are `satisfied`, `undetermined`, `violated`.
    pub fn label(&self) -> &'static str {
        match (self.strong, self.weak) {
            (true, _) => "satisfied",
            (false, true) => "undetermined",
            (false, false) => "violated",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum View {
    Strong,
    Weak,
}

impl View {
    fn flip(self) -> View {
        match self {
            View::Strong => View::Weak,
            View::Weak => View::Strong,
        }
    }
}

/// Strong finite-trace satisfaction at index `index`: every temporal
/// obligation must be witnessed by a sample inside the trace.
pub fn eval_strong(trace: &Trace, formula: &Formula, index: usize) -> Result<bool, MtlError> {
    eval(trace, formula, index, View::Strong)
}

/// Weak finite-trace satisfaction at index `index`: obligations falling past
/// the end of the trace are treated as still satisfiable.
pub fn eval_weak(trace: &Trace, formula: &Formula, index: usize) -> Result<bool, MtlError> {
    eval(trace, formula, index, View::Weak)
}

fn eval(trace: &Trace, formula: &Formula, index: usize, view: View) -> Result<bool, MtlError> {
    let h = trace.horizon();
    match formula {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Atom(p) => {
            if index > h {
                // Off the end of the trace an atom is hopeful in the weak
                // view and failed in the strong view.
                Ok(view == View::Weak)
            } else {
                trace.atom_holds(p, index)
            }
        }
        // Negation swaps the view: a strong refutation needs the inner
        // formula to fail even under its most hopeful reading.
        Formula::Not(c) => Ok(!eval(trace, c, index, view.flip())?),
        Formula::And(cs) => {
            for c in cs {
                if !eval(trace, c, index, view)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Or(cs) => {
            for c in cs {
                if eval(trace, c, index, view)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Until(i, a, b) => {
            for witness in window(index, i, h) {
                if eval(trace, b, witness, view)? && prefix_holds(trace, a, index, witness, view)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Eventually(i, c) => {
            for witness in window(index, i, h) {
                if eval(trace, c, witness, view)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Always(i, c) => {
            for witness in window(index, i, h) {
                if !eval(trace, c, witness, view)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Candidate witness indices for a temporal operator anchored at `index`.
///
/// For an unbounded interval the verdict of any subformula is the same at
/// every index past the horizon, so `h + 1` stands in for the whole tail and
/// the search stays finite.
fn window(index: usize, interval: &super::ast::TimeInterval, h: usize) -> std::ops::RangeInclusive<usize> {
    let lo = index + interval.lo;
    let hi = match interval.hi {
        Some(hi) => index + hi,
        None => lo.max(h + 1),
    };
    lo..=hi
}

fn prefix_holds(
    trace: &Trace,
    formula: &Formula,
    from: usize,
    until: usize,
    view: View,
) -> Result<bool, MtlError> {
    for k in from..until {
        if !eval(trace, formula, k, view)? {
            return Ok(false);
        }
    }
    Ok(true)
}
