//! Closed-form servicing bounds: how long an explorer may run open-loop on
//! its observer before the estimation error can exceed the tolerance `V_T`,
//! plus the exponential tracking envelopes and the configuration checks the
//! synthesis loop relies on.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{max_singular_value, sym_eig_extremes, EigExtremes, LinalgError, Matrix};

#[derive(Debug, Error)]
pub enum DwellError {
    #[error("`{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("`{name}` must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("envelope queried at t = {t}, before the anchor instant {t_s}")]
    TimeBeforeService { t: f64, t_s: f64 },
    #[error("positive-definite spectrum required, got lambda_min = {0}")]
    InvalidSpectrum(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Drift rate of the unserviced estimation error: the goal offset is sheared
/// by the dynamics while the disturbance adds directly.
pub fn kappa(s_max_a: f64, x_g_bar: f64, d_bar: f64) -> f64 {
    s_max_a * x_g_bar + d_bar
}

/// Longest service gap that keeps the estimation error at or below `v_t`.
///
/// Solves `(kappa / s)·(e^{s·tau} − 1) = v_t` for `tau` with `s = s_max_a`;
/// the drift-only limit `s = 0` gives `v_t / kappa`.
pub fn max_dwell_time(s_max_a: f64, v_t: f64, kappa: f64) -> Result<f64, DwellError> {
    if v_t <= 0.0 {
        return Err(DwellError::NonPositive { name: "v_t", value: v_t });
    }
    if kappa <= 0.0 {
        return Err(DwellError::NonPositive { name: "kappa", value: kappa });
    }
    if s_max_a < 0.0 {
        return Err(DwellError::Negative { name: "s_max_a", value: s_max_a });
    }
    if s_max_a == 0.0 {
        return Ok(v_t / kappa);
    }
    Ok((v_t * s_max_a / kappa).ln_1p() / s_max_a)
}

/// Number of whole sampling periods that fit inside the dwell time; the
/// relay must revisit each explorer at least this often (in steps).
///
/// A result of 0 means the sampling period itself already overshoots the
/// dwell time; `validate_config` flags that as an unworkable cadence.
pub fn dwell_steps(tau: f64, ts: f64) -> usize {
    assert!(ts > 0.0, "sampling period must be positive");
    if tau <= 0.0 {
        return 0;
    }
    (tau / ts).floor() as usize
}

/// Growth envelope of the estimation error since the last service at `t_s`:
/// the error restarts from zero there and drifts at rate [`kappa`],
/// compounded by the open-loop dynamics.
pub fn phi_bound(t: f64, t_s: f64, kappa: f64, s_max_a: f64) -> Result<f64, DwellError> {
    if t < t_s {
        return Err(DwellError::TimeBeforeService { t, t_s });
    }
    let dt = t - t_s;
    if s_max_a == 0.0 {
        return Ok(kappa * dt);
    }
    Ok(kappa / s_max_a * (s_max_a * dt).exp_m1())
}

/// Exponential envelopes for the estimated tracking error and the true
/// tracking error, `t` seconds after their respective anchors.
///
/// The first bound decays from `e2_at_service` (anchored at the service
/// instant); the second starts from `e_at_0` and settles toward the ultimate
/// bound `lambda_max·rho / (lambda_min·k)`.
pub fn error_envelopes(
    p_extremes: EigExtremes,
    k: f64,
    e2_at_service: f64,
    e_at_0: f64,
    rho: f64,
    t: f64,
) -> Result<(f64, f64), DwellError> {
    if p_extremes.min <= 0.0 {
        return Err(DwellError::InvalidSpectrum(p_extremes.min));
    }
    if k <= 0.0 {
        return Err(DwellError::NonPositive { name: "k", value: k });
    }
    if t < 0.0 {
        return Err(DwellError::TimeBeforeService { t, t_s: 0.0 });
    }
    let inflation = (p_extremes.max / p_extremes.min).sqrt();
    let decay = (-k * t / (2.0 * p_extremes.max)).exp();
    let e2_bound = inflation * e2_at_service * decay;
    let ultimate = p_extremes.max * rho / (p_extremes.min * k);
    let ei_bound = ultimate * (1.0 - decay) + inflation * e_at_0 * decay;
    Ok((e2_bound, ei_bound))
}

/// Disturbance terms driving the tracking-error dynamics.
///
/// `rho` accounts for a stale estimate as large as `v_t` between services;
/// `rho_star` is the same quantity once servicing keeps estimates fresh, so
/// the `v_t` term drops out.
pub fn rho_values(
    d_bar: f64,
    p: &Matrix,
    a: &Matrix,
    b: &Matrix,
    v_t: f64,
    x_g_bar: f64,
) -> Result<(f64, f64), DwellError> {
    let s_p = max_singular_value(p)?;
    let pb = p * b;
    let pbbt_p = &pb * &pb.transpose();
    let s_pbbtp = max_singular_value(&pbbt_p)?;
    let s_pa = max_singular_value(&(p * a))?;
    let rho_star = 2.0 * d_bar * s_p + 2.0 * s_pa * x_g_bar;
    let rho = rho_star + 2.0 * v_t * s_pbbtp;
    Ok((rho, rho_star))
}

/// Per-explorer servicing parameters derived from the scenario bounds.
#[derive(Debug, Clone, Serialize)]
pub struct DwellParams {
    pub v_t: f64,
    pub x_g_bar: f64,
    pub d_bar: f64,
    pub s_max_a: f64,
    pub kappa: f64,
    /// Longest tolerable service gap, seconds.
    pub tau: f64,
    /// Whole sampling periods inside `tau`.
    pub n_steps: usize,
    pub ts: f64,
}

impl DwellParams {
    pub fn derive(
        s_max_a: f64,
        v_t: f64,
        x_g_bar: f64,
        d_bar: f64,
        ts: f64,
    ) -> Result<Self, DwellError> {
        if ts <= 0.0 {
            return Err(DwellError::NonPositive { name: "ts", value: ts });
        }
        if d_bar <= 0.0 {
            return Err(DwellError::NonPositive { name: "d_bar", value: d_bar });
        }
        let kappa = kappa(s_max_a, x_g_bar, d_bar);
        let tau = max_dwell_time(s_max_a, v_t, kappa)?;
        Ok(DwellParams {
            v_t,
            x_g_bar,
            d_bar,
            s_max_a,
            kappa,
            tau,
            n_steps: dwell_steps(tau, ts),
            ts,
        })
    }
}

/// Everything `validate_config` needs about a scenario: the shared explorer
/// dynamics, the tracking-gain solution, and the mission thresholds.
#[derive(Debug, Clone, Copy)]
pub struct ValidationInput<'a> {
    /// Communication radius.
    pub r: f64,
    /// Goal-region radius.
    pub r_f: f64,
    /// Service-trigger threshold.
    pub eta: f64,
    /// Estimation-error tolerance.
    pub v_t: f64,
    /// Tracking Riccati weight.
    pub k: f64,
    /// Sampling period.
    pub ts: f64,
    pub a: &'a Matrix,
    pub b: &'a Matrix,
    pub c: &'a Matrix,
    /// Riccati solution for the explorer tracking loop.
    pub p: &'a Matrix,
    /// Goal state; its norm is the tightest valid bound on the offset.
    pub x_g: &'a [f64],
    /// Per-explorer disturbance bounds.
    pub d_bars: &'a [f64],
}

/// Individual feasibility conditions; all but `full_bound_in_goal` gate the
/// overall verdict.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionFlags {
    /// `0 < v_t <= (r - eta)/s_max_c`: a serviced estimate is close enough
    /// that the true explorer is still inside communication range.
    pub v_t_within_margin: bool,
    /// `0 <= eta < r`: triggering distance strictly inside the radio range.
    pub eta_below_radius: bool,
    /// `ultimate_bound · s_max_c < r_f`: the steady-state tracking error
    /// (with fresh estimates) settles inside the goal region.
    pub ultimate_bound_in_goal: bool,
    /// Same test with the stale-estimate bound. Informational only: the
    /// extra term assumes the estimate stays `v_t`-stale forever, which
    /// servicing prevents, and it fails even for workable configurations.
    pub full_bound_in_goal: bool,
    /// Every explorer allows at least one whole sampling period between
    /// required services (`n_steps >= 1`).
    pub servicing_cadence_ok: bool,
}

/// Numeric summary of the feasibility analysis, serialized into run metrics.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub s_max_c: f64,
    /// Worst-case disturbance term across explorers, stale-estimate variant.
    pub rho: f64,
    /// Same with fresh estimates (post-service).
    pub rho_star: f64,
    /// Ultimate tracking-error bound with fresh estimates.
    pub ultimate_bound: f64,
    /// Ultimate bound under the stale-estimate `rho`; reference only.
    pub ultimate_bound_full: f64,
    pub dwell: Vec<DwellParams>,
    pub checks: ConditionFlags,
    /// Conjunction of the gating checks; synthesis refuses to run when
    /// false unless forced.
    pub theorem4_ok: bool,
}

/// Checks that the scenario's geometry and gains make the servicing scheme
/// viable, and collects every intermediate bound for the run report.
pub fn validate_config(input: &ValidationInput) -> Result<BoundReport, DwellError> {
    let p_extremes = sym_eig_extremes(input.p)?;
    if p_extremes.min <= 0.0 {
        return Err(DwellError::InvalidSpectrum(p_extremes.min));
    }
    let s_max_c = max_singular_value(input.c)?;
    let s_max_a = max_singular_value(input.a)?;
    let x_g_bar = input.x_g.iter().map(|v| v * v).sum::<f64>().sqrt();

    let worst_d_bar = input.d_bars.iter().cloned().fold(0.0f64, f64::max);
    let (rho, rho_star) =
        rho_values(worst_d_bar, input.p, input.a, input.b, input.v_t, x_g_bar)?;
    let ultimate_bound = p_extremes.max * rho_star / (p_extremes.min * input.k);
    let ultimate_bound_full = p_extremes.max * rho / (p_extremes.min * input.k);

    let mut dwell = Vec::with_capacity(input.d_bars.len());
    for &d_bar in input.d_bars {
        dwell.push(DwellParams::derive(s_max_a, input.v_t, x_g_bar, d_bar, input.ts)?);
    }

    let v_t_margin = if s_max_c > 0.0 {
        (input.r - input.eta) / s_max_c
    } else {
        f64::INFINITY
    };
    let checks = ConditionFlags {
        v_t_within_margin: input.v_t > 0.0 && input.v_t <= v_t_margin,
        eta_below_radius: input.eta >= 0.0 && input.eta < input.r,
        ultimate_bound_in_goal: ultimate_bound * s_max_c < input.r_f,
        full_bound_in_goal: ultimate_bound_full * s_max_c < input.r_f,
        servicing_cadence_ok: dwell.iter().all(|d| d.n_steps >= 1),
    };
    let theorem4_ok = checks.v_t_within_margin
        && checks.eta_below_radius
        && checks.ultimate_bound_in_goal
        && checks.servicing_cadence_ok;

    Ok(BoundReport {
        lambda_min_p: p_extremes.min,
        lambda_max_p: p_extremes.max,
        s_max_c,
        rho,
        rho_star,
        ultimate_bound,
        ultimate_bound_full,
        dwell,
        checks,
        theorem4_ok,
    })
}
