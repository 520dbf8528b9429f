use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::SimError;
use crate::linalg::{expm, solve_care, zoh_discretize, LinalgError, Matrix};

/// Hover-frame gravity constant coupling tilt angles into accelerations.
pub const GRAVITY: f64 = 9.81;

/// Explorer with linear dynamics, output map, and tracking-gain solution.
#[derive(Debug, Clone)]
pub struct ExplorerModel {
    pub name: String,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    /// Riccati solution defining the tracking feedback `u = BᵀP(x_g − x̂)`.
    pub p: Matrix,
    /// Disturbance bound: `|d(t)|₂ <= d_bar` at all times.
    pub d_bar: f64,
}

impl ExplorerModel {
    /// Planar double integrator: state `[x₁, x₂, ẋ₁, ẋ₂]`, acceleration
    /// inputs, outputs `(x₁, x₂, 0)` embedding the plane into 3-D space.
    pub fn planar_double_integrator(
        name: &str,
        riccati_weight: f64,
        d_bar: f64,
    ) -> Result<Self, SimError> {
        if d_bar < 0.0 {
            return Err(SimError::NegativeDisturbanceBound(d_bar));
        }
        let a = Matrix::from_rows(&[
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
        ]);
        let b = Matrix::from_rows(&[&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let c = Matrix::from_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
        ]);
        let p = solve_care(&a, &b, riccati_weight)?;
        Ok(ExplorerModel { name: name.to_string(), a, b, c, p, d_bar })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    /// Exact one-sampling-period propagator of the estimate under its own
    /// feedback: `expm((A − BBᵀP)·ts)`, applied to the offset `x̂ − x_g`.
    ///
    /// The feedback runs in continuous time, so the matrix exponential of
    /// the closed loop — not a zero-order-hold discretization of it — is
    /// what reproduces the simulated estimate at the sampling instants.
    pub fn closed_loop_step(&self, ts: f64) -> Result<Matrix, LinalgError> {
        let bt_p = &self.b.transpose() * &self.p;
        let ac = &self.a - &(&self.b * &bt_p);
        expm(&ac.scale(ts))
    }
}

/// Relay with its continuous dynamics and per-channel input bounds.
#[derive(Debug, Clone)]
pub struct RelayModel {
    pub a0: Matrix,
    pub b0: Matrix,
    pub c0: Matrix,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
}

impl RelayModel {
    /// Small-angle hover linearization with state
    /// `[x₁, x₂, x₃, ẋ₁, ẋ₂, α, β, γ]` and inputs `[u₁..u₄]`:
    /// climb rate `ẋ₃ = u₁`, tilt rates `α̇ = u₂`, `β̇ = u₃`, yaw rate
    /// `γ̇ = u₄`, and tilt-driven accelerations `ẍ₁ = g·β`, `ẍ₂ = −g·α`.
    pub fn hover(u_min: Vec<f64>, u_max: Vec<f64>) -> Result<Self, SimError> {
        if u_min.len() != 4 || u_max.len() != 4 {
            return Err(SimError::Dimension {
                what: "relay input bounds",
                got: u_min.len().max(u_max.len()),
                expected: 4,
            });
        }
        if u_min.iter().zip(&u_max).any(|(lo, hi)| lo >= hi) {
            return Err(SimError::EmptyInputBox);
        }
        let mut a0 = Matrix::zeros(8, 8);
        a0[(0, 3)] = 1.0;
        a0[(1, 4)] = 1.0;
        a0[(3, 6)] = GRAVITY;
        a0[(4, 5)] = -GRAVITY;
        let mut b0 = Matrix::zeros(8, 4);
        b0[(2, 0)] = 1.0;
        b0[(5, 1)] = 1.0;
        b0[(6, 2)] = 1.0;
        b0[(7, 3)] = 1.0;
        let mut c0 = Matrix::zeros(3, 8);
        c0[(0, 0)] = 1.0;
        c0[(1, 1)] = 1.0;
        c0[(2, 2)] = 1.0;
        Ok(RelayModel { a0, b0, c0, u_min, u_max })
    }

    pub fn state_dim(&self) -> usize {
        self.a0.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b0.cols()
    }

    /// Zero-order-hold discretization over one sampling period.
    pub fn discretize(&self, ts: f64) -> Result<(Matrix, Matrix), LinalgError> {
        zoh_discretize(&self.a0, &self.b0, ts)
    }
}

/// Numeric inputs for [`build_models`]: the tracking weight shared by all
/// explorers, one disturbance bound per explorer, and relay input bounds.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub riccati_weight: f64,
    pub explorer_names: Vec<String>,
    pub d_bars: Vec<f64>,
    pub u0_min: Vec<f64>,
    pub u0_max: Vec<f64>,
}

/// Builds the hover relay and one planar double-integrator explorer per
/// disturbance bound. The Riccati equation is solved once and shared.
pub fn build_models(cfg: &ModelConfig) -> Result<(RelayModel, Vec<ExplorerModel>), SimError> {
    if cfg.explorer_names.len() != cfg.d_bars.len() {
        return Err(SimError::Dimension {
            what: "explorer names",
            got: cfg.explorer_names.len(),
            expected: cfg.d_bars.len(),
        });
    }
    let relay = RelayModel::hover(cfg.u0_min.clone(), cfg.u0_max.clone())?;
    let mut explorers = Vec::with_capacity(cfg.d_bars.len());
    let template =
        ExplorerModel::planar_double_integrator("template", cfg.riccati_weight, 1.0)?;
    for (name, &d_bar) in cfg.explorer_names.iter().zip(&cfg.d_bars) {
        if d_bar < 0.0 {
            return Err(SimError::NegativeDisturbanceBound(d_bar));
        }
        let mut model = template.clone();
        model.name = name.clone();
        model.d_bar = d_bar;
        explorers.push(model);
    }
    Ok((relay, explorers))
}

/// Tracking feedback `u = BᵀP(x_g − x̂)`.
pub fn explorer_control(x_hat: &[f64], x_g: &[f64], model: &ExplorerModel) -> Vec<f64> {
    let m = model.state_dim();
    let mut err = vec![0.0; m];
    for i in 0..m {
        err[i] = x_g[i] - x_hat[i];
    }
    let p_err = model.p.mat_vec(&err);
    model.b.transpose().mat_vec(&p_err)
}

/// Observer drift between services: `A(x̂ − x_g) + B·u`.
pub fn observer_derivative(
    x_hat: &[f64],
    u: &[f64],
    model: &ExplorerModel,
    x_g: &[f64],
) -> Vec<f64> {
    let m = model.state_dim();
    let mut offset = vec![0.0; m];
    for i in 0..m {
        offset[i] = x_hat[i] - x_g[i];
    }
    let drift = model.a.mat_vec(&offset);
    let forced = model.b.mat_vec(u);
    drift.iter().zip(&forced).map(|(a, b)| a + b).collect()
}

/// One disturbance draw: each component i.i.d. uniform on
/// `[-d_bar/2, d_bar/2]`, so the Euclidean norm stays at or below `d_bar`
/// for up to four active channels.
pub fn sample_disturbance(rng: &mut ChaCha8Rng, d_bar: f64, dim: usize) -> Vec<f64> {
    if d_bar == 0.0 {
        return vec![0.0; dim];
    }
    let half = 0.5 * d_bar;
    (0..dim).map(|_| rng.gen_range(-half..=half)).collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn model() -> ExplorerModel {
        ExplorerModel::planar_double_integrator("e1", 0.1, 0.04).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn control_reads_off_the_gain_matrix() {
        let m = model();
        let x_g = [0.0; 4];
        assert_eq!(explorer_control(&x_g, &x_g, &m), vec![0.0, 0.0]);

        // Unit offset in the first position: u = -(first column of BᵀP).
        let u = explorer_control(&[1.0, 0.0, 0.0, 0.0], &x_g, &m);
        assert!(close(u[0], -0.2236067977499789, 1e-9), "u0 = {}", u[0]);
        assert!(close(u[1], 0.0, 1e-12));

        // Linearity: doubling the offset doubles the command.
        let u2 = explorer_control(&[2.0, 0.0, 0.0, 0.0], &x_g, &m);
        assert!(close(u2[0], 2.0 * u[0], 1e-12));
    }

    #[test]
    fn observer_is_stationary_at_the_goal() {
        let m = model();
        let x_g = [3.0, -2.0, 0.0, 0.0];
        let dx = observer_derivative(&x_g, &[0.0, 0.0], &m, &x_g);
        assert!(dx.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn observer_under_feedback_matches_the_closed_loop_field() {
        // d/dt(x_g - x_hat) from the observer equals (A - BBᵀP)(x_g - x_hat).
        let m = model();
        let x_g = [1.0, -1.0, 0.5, 0.0];
        let x_hat = [4.0, 2.0, -1.0, 3.0];
        let u = explorer_control(&x_hat, &x_g, &m);
        let dx_hat = observer_derivative(&x_hat, &u, &m, &x_g);

        let e2: Vec<f64> = x_g.iter().zip(&x_hat).map(|(g, h)| g - h).collect();
        let bt_p = &m.b.transpose() * &m.p;
        let ac = &m.a - &(&m.b * &bt_p);
        let de2 = ac.mat_vec(&e2);
        for i in 0..4 {
            assert!(close(-dx_hat[i], de2[i], 1e-12), "component {i}");
        }
    }

    #[test]
    fn closed_loop_step_contracts_and_matches_the_locked_column() {
        let m = model();
        let phi = m.closed_loop_step(0.5).unwrap();
        let col0 = phi.mat_vec(&[1.0, 0.0, 0.0, 0.0]);
        assert!(close(col0[0], 0.9744517567518398, 1e-9));
        assert!(close(col0[1], 0.0, 1e-12));
        assert!(close(col0[2], -0.0974654644991607, 1e-9));
        assert!(close(col0[3], 0.0, 1e-12));

        // Repeated application annihilates any offset: the discrete loop is
        // a contraction in the long run.
        let mut z = vec![1.0, 1.0, 1.0, 1.0];
        for _ in 0..60 {
            z = phi.mat_vec(&z);
        }
        let norm: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 5e-3, "offset norm after 60 steps: {norm}");
    }

    #[test]
    fn hover_relay_has_the_kinematic_sparsity() {
        let relay = RelayModel::hover(vec![-10.0; 4], vec![10.0; 4]).unwrap();
        let a_nonzeros = (0..8)
            .flat_map(|r| (0..8).map(move |c| (r, c)))
            .filter(|&(r, c)| relay.a0[(r, c)] != 0.0)
            .collect::<Vec<_>>();
        assert_eq!(a_nonzeros, vec![(0, 3), (1, 4), (3, 6), (4, 5)]);
        assert_eq!(relay.a0[(3, 6)], GRAVITY);
        assert_eq!(relay.a0[(4, 5)], -GRAVITY);

        let b_nonzeros = (0..8)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .filter(|&(r, c)| relay.b0[(r, c)] != 0.0)
            .count();
        assert_eq!(b_nonzeros, 4);

        // Output map picks the three position coordinates.
        let y = relay.c0.mat_vec(&[1.0, 2.0, 3.0, 9.0, 9.0, 9.0, 9.0, 9.0]);
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn relay_rejects_degenerate_input_boxes() {
        assert!(RelayModel::hover(vec![1.0; 4], vec![1.0; 4]).is_err());
        assert!(RelayModel::hover(vec![-1.0; 3], vec![1.0; 4]).is_err());
    }

    #[test]
    fn build_models_shares_the_riccati_solution() {
        let cfg = ModelConfig {
            riccati_weight: 0.1,
            explorer_names: vec!["e1".into(), "e2".into(), "e3".into()],
            d_bars: vec![0.04, 0.03, 0.02],
            u0_min: vec![-10.0; 4],
            u0_max: vec![10.0; 4],
        };
        let (relay, explorers) = build_models(&cfg).unwrap();
        assert_eq!(relay.state_dim(), 8);
        assert_eq!(explorers.len(), 3);
        assert_eq!(explorers[1].d_bar, 0.03);
        assert_eq!(explorers[0].p, explorers[2].p);
        // C maps a goal at the origin to the origin of the output space.
        let y = explorers[0].c.mat_vec(&[0.0; 4]);
        assert_eq!(y, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn disturbance_support_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(sample_disturbance(&mut rng, 0.0, 4), vec![0.0; 4]);

        let d_bar = 0.04;
        let mut max_component: f64 = 0.0;
        let mut max_norm: f64 = 0.0;
        for _ in 0..100_000 {
            let d = sample_disturbance(&mut rng, d_bar, 4);
            for v in &d {
                max_component = max_component.max(v.abs());
            }
            max_norm = max_norm.max(d.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        assert!(max_component <= 0.5 * d_bar + 1e-15);
        assert!(max_norm <= d_bar + 1e-15);
        // The support is actually exercised.
        assert!(max_component > 0.45 * d_bar);

        let mut rng_a = ChaCha8Rng::seed_from_u64(42);
        let mut rng_b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            assert_eq!(
                sample_disturbance(&mut rng_a, d_bar, 4),
                sample_disturbance(&mut rng_b, d_bar, 4)
            );
        }
    }
}
