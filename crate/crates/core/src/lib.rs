//! Control-input synthesis for a relay agent that shuttles between a base
//! station and a team of disturbed explorer agents, keeping every explorer's
//! state estimate fresh while honouring a metric temporal logic mission.
//!
//! The crate is organised around a single pipeline:
//!
//! 1. [`mtl`] declares MTL formulas over position traces, evaluates them under
//!    finite-trace strong/weak semantics, and specialises them against an
//!    observed prefix.
//! 2. [`linalg`] provides the dense matrix kernels the rest of the crate
//!    relies on (matrix exponential, ZOH discretisation, a continuous-time
//!    algebraic Riccati solver, extremal eigen/singular values, RK4).
//! 3. [`sim`] holds the agent models and the world stepper; [`dwell`]
//!    computes the inter-service dwell-time and error-envelope bounds that
//!    make the servicing cadence sound.
//! 4. [`encode`] lowers a specialised formula plus the relay's discrete
//!    dynamics into a mixed-integer linear program, and [`milp`] solves it
//!    with a built-in simplex + branch-and-bound stack (or exports it to an
//!    external solver).
//! 5. [`runtime`] runs the receding-horizon synthesis loop, re-solving on
//!    service events, and [`scenario`] wires configuration files, built-in
//!    scenarios, output bundles and post-hoc monitoring together.
//!
//! Seed sweeps and batch evaluation helpers in [`par`] run on rayon when the
//! `parallel` feature (default) is enabled and fall back to sequential
//! iteration otherwise.

pub mod dwell;
pub mod encode;
pub mod linalg;
pub mod milp;
pub mod mtl;
pub mod par;
pub mod runtime;
pub mod scenario;
pub mod sim;
