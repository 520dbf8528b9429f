//! Root-node presolve: iterative activity-based bound propagation with
//! integrality snapping for binaries.
//!
//! Every deduction here holds for all mixed-integer feasible points, so the
//! tightened bounds never cut an integer solution; they only shrink the LP
//! relaxation. Chains of equalities (pinned inputs, dynamics recursions)
//! collapse to point bounds, which in turn fixes indicator binaries whose
//! big-M rows cannot be satisfied, often deciding pure feasibility models
//! outright.

use super::{MilpModel, Sense, VarKind};

/// Fraction of a unit a binary bound must clear to be snapped to 0 or 1.
const SNAP_TOL: f64 = 1e-6;
/// Minimum improvement for a tightened bound to be recorded, keeping the
/// fixpoint iteration finite under floating-point drift.
const IMPROVE_TOL: f64 = 1e-9;
/// Upper limit on full propagation passes; each pass advances at least one
/// layer of any equality chain, so this covers every model in this crate.
const MAX_PASSES: usize = 128;

pub(crate) enum PresolveResult {
    Feasible,
    Infeasible,
}

/// Tightens `lower`/`upper` in place until a fixpoint or the pass limit.
pub(crate) fn propagate_bounds(
    model: &MilpModel,
    lower: &mut [f64],
    upper: &mut [f64],
) -> PresolveResult {
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for con in &model.constraints {
            // Minimum and maximum of the row activity over the current
            // bounds, tracking infinite contributions separately so a row
            // with one unbounded variable still bounds that variable.
            let mut min_fin = 0.0;
            let mut max_fin = 0.0;
            let mut min_inf = 0usize;
            let mut max_inf = 0usize;
            for &(id, a) in &con.terms {
                let (lo_c, hi_c) = contributions(a, lower[id], upper[id]);
                if lo_c.is_finite() {
                    min_fin += lo_c;
                } else {
                    min_inf += 1;
                }
                if hi_c.is_finite() {
                    max_fin += hi_c;
                } else {
                    max_inf += 1;
                }
            }

            let eps = 1e-7 * (1.0 + con.rhs.abs() + min_fin.abs().max(max_fin.abs()));
            let need_le = con.sense != Sense::Ge; // activity <= rhs applies
            let need_ge = con.sense != Sense::Le; // activity >= rhs applies
            if need_le && min_inf == 0 && min_fin > con.rhs + eps {
                return PresolveResult::Infeasible;
            }
            if need_ge && max_inf == 0 && max_fin < con.rhs - eps {
                return PresolveResult::Infeasible;
            }

            for &(id, a) in &con.terms {
                if a == 0.0 {
                    continue;
                }
                let (lo_c, hi_c) = contributions(a, lower[id], upper[id]);

                // activity <= rhs: own contribution <= rhs - min(others).
                if need_le {
                    let min_others = others(min_fin, min_inf, lo_c);
                    if let Some(mo) = min_others {
                        let room = con.rhs - mo;
                        if a > 0.0 {
                            changed |= tighten_upper(room / a, id, upper, model);
                        } else {
                            changed |= tighten_lower(room / a, id, lower, model);
                        }
                    }
                }
                // activity >= rhs: own contribution >= rhs - max(others).
                if need_ge {
                    let max_others = others(max_fin, max_inf, hi_c);
                    if let Some(mo) = max_others {
                        let need = con.rhs - mo;
                        if a > 0.0 {
                            changed |= tighten_lower(need / a, id, lower, model);
                        } else {
                            changed |= tighten_upper(need / a, id, upper, model);
                        }
                    }
                }
                if lower[id] > upper[id] + SNAP_TOL {
                    return PresolveResult::Infeasible;
                }
            }
        }
        if !changed {
            break;
        }
    }

    for (id, var) in model.vars.iter().enumerate() {
        if lower[id] > upper[id] + SNAP_TOL {
            return PresolveResult::Infeasible;
        }
        if lower[id] > upper[id] {
            // Bounds deduced from different rows can cross by floating-point
            // drift; collapse to a single point the simplex can accept.
            let mid = 0.5 * (upper[id] + lower[id]);
            let v = if var.kind == VarKind::Binary {
                if mid >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            } else {
                mid
            };
            lower[id] = v;
            upper[id] = v;
        }
    }
    PresolveResult::Feasible
}

/// (min, max) contribution of one term over a variable interval.
fn contributions(a: f64, lo: f64, hi: f64) -> (f64, f64) {
    let p = a * lo;
    let q = a * hi;
    if p <= q {
        (p, q)
    } else {
        (q, p)
    }
}

/// Activity of a row excluding one term, or `None` when some other term is
/// unbounded on the relevant side.
fn others(finite_sum: f64, inf_count: usize, own: f64) -> Option<f64> {
    if own.is_finite() {
        if inf_count == 0 {
            Some(finite_sum - own)
        } else {
            None
        }
    } else if inf_count == 1 {
        Some(finite_sum)
    } else {
        None
    }
}

fn tighten_upper(
    candidate: f64,
    id: usize,
    upper: &mut [f64],
    model: &MilpModel,
) -> bool {
    let mut cand = candidate;
    if !cand.is_finite() {
        return false;
    }
    if model.vars[id].kind == VarKind::Binary && cand < 1.0 - SNAP_TOL {
        cand = 0.0;
    }
    if cand < upper[id] - IMPROVE_TOL * (1.0 + cand.abs()) {
        upper[id] = cand;
        true
    } else {
        false
    }
}

fn tighten_lower(
    candidate: f64,
    id: usize,
    lower: &mut [f64],
    model: &MilpModel,
) -> bool {
    let mut cand = candidate;
    if !cand.is_finite() {
        return false;
    }
    if model.vars[id].kind == VarKind::Binary && cand > SNAP_TOL {
        cand = 1.0;
    }
    if cand > lower[id] + IMPROVE_TOL * (1.0 + cand.abs()) {
        lower[id] = cand;
        true
    } else {
        false
    }
}
