//! World simulation: the relay advances by its exact discrete model while
//! explorers and their observers integrate in continuous time under
//! per-sub-step disturbance draws. Servicing resets an explorer's estimate
//! to its true state whenever the relay is close enough to where the
//! explorer is believed to be, or while the explorer sits inside the
//! goal region.

mod models;

pub use models::{
    build_models, explorer_control, observer_derivative, sample_disturbance, ExplorerModel,
    ModelConfig, RelayModel, GRAVITY,
};

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{rk4_step, LinalgError, Matrix};

/// Continuous integration sub-steps per sampling period.
pub const SUBSTEPS_PER_PERIOD: usize = 20;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state diverged to a non-finite value at step {t_index}")]
    Diverged { t_index: usize },
    #[error("{what}: got dimension {got}, expected {expected}")]
    Dimension { what: &'static str, got: usize, expected: usize },
    #[error("relay input box is empty (some u_min >= u_max)")]
    EmptyInputBox,
    #[error("negative disturbance bound {0}")]
    NegativeDisturbanceBound(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One explorer's simulation state.
#[derive(Debug, Clone)]
pub struct ExplorerState {
    /// True state, driven by the disturbance.
    pub x: Vec<f64>,
    /// Observer estimate; equals `x` exactly at every service instant.
    pub x_hat: Vec<f64>,
    /// Discrete index of the most recent service.
    pub last_service_index: usize,
    /// Whether the true output currently sits inside the goal region.
    pub in_goal: bool,
}

/// Why an explorer's estimate was reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceTrigger {
    /// The relay came within `eta` of the estimated position.
    Relay,
    /// The explorer's true position is inside the goal region, which
    /// provides state information on its own.
    GoalRegion,
}

#[derive(Debug, Clone, Serialize)]
pub struct ServiceEvent {
    pub t_index: usize,
    pub explorer: usize,
    pub trigger: ServiceTrigger,
}

/// Full simulation state: relay, explorers, mission geometry, and the cached
/// discrete relay model.
#[derive(Debug, Clone)]
pub struct World {
    /// Current discrete index.
    pub t_index: usize,
    /// Relay state.
    pub x0: Vec<f64>,
    pub explorers: Vec<ExplorerState>,
    /// Shared goal state for all explorers.
    pub x_g: Vec<f64>,
    /// Communication radius.
    pub r: f64,
    /// Goal-region radius.
    pub r_f: f64,
    /// Service-trigger threshold.
    pub eta: f64,
    /// Sampling period, seconds.
    pub ts: f64,
    pub relay: RelayModel,
    /// One model per explorer, aligned with `explorers`.
    pub models: Vec<ExplorerModel>,
    relay_ad: Matrix,
    relay_bd: Matrix,
}

impl World {
    /// Assembles a world at index 0 with every estimate synchronized to its
    /// true state (time zero counts as a service for everyone).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        relay: RelayModel,
        models: Vec<ExplorerModel>,
        x0: Vec<f64>,
        explorer_states: Vec<Vec<f64>>,
        x_g: Vec<f64>,
        r: f64,
        r_f: f64,
        eta: f64,
        ts: f64,
    ) -> Result<Self, SimError> {
        if x0.len() != relay.state_dim() {
            return Err(SimError::Dimension {
                what: "relay initial state",
                got: x0.len(),
                expected: relay.state_dim(),
            });
        }
        if explorer_states.len() != models.len() {
            return Err(SimError::Dimension {
                what: "explorer initial states",
                got: explorer_states.len(),
                expected: models.len(),
            });
        }
        for (state, model) in explorer_states.iter().zip(&models) {
            if state.len() != model.state_dim() {
                return Err(SimError::Dimension {
                    what: "explorer initial state",
                    got: state.len(),
                    expected: model.state_dim(),
                });
            }
            if x_g.len() != model.state_dim() {
                return Err(SimError::Dimension {
                    what: "goal state",
                    got: x_g.len(),
                    expected: model.state_dim(),
                });
            }
        }
        let (relay_ad, relay_bd) = relay.discretize(ts)?;
        let explorers = explorer_states
            .into_iter()
            .map(|x| ExplorerState {
                x_hat: x.clone(),
                x,
                last_service_index: 0,
                in_goal: false,
            })
            .collect();
        let mut world = World {
            t_index: 0,
            x0,
            explorers,
            x_g,
            r,
            r_f,
            eta,
            ts,
            relay,
            models,
            relay_ad,
            relay_bd,
        };
        for i in 0..world.explorers.len() {
            world.explorers[i].in_goal = world.goal_distance(i) <= world.r_f;
        }
        Ok(world)
    }

    /// Discrete relay model used for both simulation and planning.
    pub fn relay_discrete(&self) -> (&Matrix, &Matrix) {
        (&self.relay_ad, &self.relay_bd)
    }

    /// Relay output (3-D position).
    pub fn relay_output(&self) -> Vec<f64> {
        self.relay.c0.mat_vec(&self.x0)
    }

    /// Output of explorer `i`'s true state.
    pub fn explorer_output(&self, i: usize) -> Vec<f64> {
        self.models[i].c.mat_vec(&self.explorers[i].x)
    }

    /// Output of explorer `i`'s estimate.
    pub fn estimate_output(&self, i: usize) -> Vec<f64> {
        self.models[i].c.mat_vec(&self.explorers[i].x_hat)
    }

    /// Distance from explorer `i`'s true output to the goal's output image.
    pub fn goal_distance(&self, i: usize) -> f64 {
        let y = self.explorer_output(i);
        let y_g = self.models[i].c.mat_vec(&self.x_g);
        norm2_diff(&y, &y_g)
    }

    /// Estimation error magnitude `|x − x̂|₂` for explorer `i`.
    pub fn estimation_error(&self, i: usize) -> f64 {
        norm2_diff(&self.explorers[i].x, &self.explorers[i].x_hat)
    }

    /// Tracking error magnitude `|x_g − x̂|₂` for explorer `i`.
    pub fn estimated_tracking_error(&self, i: usize) -> f64 {
        norm2_diff(&self.x_g, &self.explorers[i].x_hat)
    }
}

fn norm2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Advances the world one sampling period.
///
/// The relay applies `u0` through its exact discrete model. Each explorer
/// integrates its true state and estimate jointly with RK4 over
/// [`SUBSTEPS_PER_PERIOD`] sub-steps; the feedback is recomputed from the
/// estimate at every RK4 stage and the disturbance is redrawn (and held)
/// per sub-step.
pub fn step_world(world: &World, u0: &[f64], rng: &mut ChaCha8Rng) -> Result<World, SimError> {
    if u0.len() != world.relay.input_dim() {
        return Err(SimError::Dimension {
            what: "relay input",
            got: u0.len(),
            expected: world.relay.input_dim(),
        });
    }
    let mut next = world.clone();
    next.t_index += 1;

    let mut x0 = world.relay_ad.mat_vec(&world.x0);
    let forced = world.relay_bd.mat_vec(u0);
    for (xi, f) in x0.iter_mut().zip(&forced) {
        *xi += f;
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(SimError::Diverged { t_index: next.t_index });
    }
    next.x0 = x0;

    let dt = world.ts / SUBSTEPS_PER_PERIOD as f64;
    for (state, model) in next.explorers.iter_mut().zip(&world.models) {
        let m = model.state_dim();
        let mut joint = Vec::with_capacity(2 * m);
        joint.extend_from_slice(&state.x);
        joint.extend_from_slice(&state.x_hat);
        let mut t = world.t_index as f64 * world.ts;
        for _ in 0..SUBSTEPS_PER_PERIOD {
            let d = sample_disturbance(rng, model.d_bar, m);
            let field = |_t: f64, s: &[f64]| {
                let (xs, xhs) = s.split_at(m);
                let u = explorer_control(xhs, &world.x_g, model);
                let mut dx = model.a.mat_vec(xs);
                let bu = model.b.mat_vec(&u);
                for i in 0..m {
                    dx[i] += bu[i] + d[i];
                }
                let dxh = observer_derivative(xhs, &u, model, &world.x_g);
                dx.extend(dxh);
                dx
            };
            joint = rk4_step(field, &joint, t, dt)
                .map_err(|_| SimError::Diverged { t_index: next.t_index })?;
            t += dt;
        }
        state.x = joint[..m].to_vec();
        state.x_hat = joint[m..].to_vec();
    }
    Ok(next)
}

/// Explorers whose *estimated* position is within the service threshold of
/// the relay's position right now. Estimate-based by design: the relay can
/// only steer toward where explorers are believed to be.
pub fn detect_service(world: &World) -> BTreeSet<usize> {
    let y0 = world.relay_output();
    (0..world.explorers.len())
        .filter(|&i| norm2_diff(&world.estimate_output(i), &y0) <= world.eta)
        .collect()
}

/// Resets estimates for the explorers in `w` (relay-triggered) and for any
/// explorer currently inside the goal region, returning the updated world
/// and the service events in explorer order.
pub fn apply_service(world: &World, w: &BTreeSet<usize>) -> (World, Vec<ServiceEvent>) {
    let mut next = world.clone();
    let mut events = Vec::new();
    for i in 0..next.explorers.len() {
        let in_goal = next.goal_distance(i) <= next.r_f;
        next.explorers[i].in_goal = in_goal;
        let trigger = if w.contains(&i) {
            Some(ServiceTrigger::Relay)
        } else if in_goal {
            Some(ServiceTrigger::GoalRegion)
        } else {
            None
        };
        if let Some(trigger) = trigger {
            let state = &mut next.explorers[i];
            state.x_hat = state.x.clone();
            state.last_service_index = next.t_index;
            events.push(ServiceEvent { t_index: next.t_index, explorer: i, trigger });
        }
    }
    (next, events)
}
