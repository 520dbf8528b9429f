//! Metric temporal logic over finite position traces.
//!
//! Formulas are evaluated with two complementary finite-trace views: the
//! *strong* view treats obligations past the end of the trace as failed, the
//! *weak* view treats them as still satisfiable. A controller that plans over
//! a finite horizon enforces the weak view; a post-hoc monitor reports both.
//!
//! The module also implements the two formula transformations the synthesis
//! loop needs: [`specialize`], which substitutes already-observed atoms with
//! constants and re-anchors the untouched remainder, and [`to_nnf`], which
//! pushes negations down to the atoms ahead of MILP encoding.

mod ast;
mod nnf;
mod parse;
mod semantics;
mod specialize;

pub use ast::{AtomicPredicate, CenterRef, Formula, Horizon, PredicateKind, TimeInterval};
pub use nnf::{is_nnf, to_nnf};
pub use parse::parse_formula;
pub use semantics::{eval_strong, eval_weak, Trace, Verdict};
pub use specialize::specialize;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtlError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown atom identifier `{0}`")]
    UnknownAtom(String),
    #[error("unknown signal `{0}` in trace")]
    UnknownSignal(String),
    #[error("interval lower bound {lo} exceeds upper bound {hi}")]
    InvalidInterval { lo: usize, hi: usize },
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("signal `{name}` has {got} samples, expected {expected}")]
    RaggedSignal { name: String, got: usize, expected: usize },
    #[error("signal `{name}` sample {index} has dimension {got}, expected {expected}")]
    SampleDimension { name: String, index: usize, got: usize, expected: usize },
    #[error("predicate `{id}`: {msg}")]
    Predicate { id: String, msg: String },
    #[error("specialization prefix end {ell} exceeds observed horizon {horizon}")]
    PrefixTooLong { ell: usize, horizon: usize },
}
