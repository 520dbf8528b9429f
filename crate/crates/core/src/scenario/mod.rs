//! Scenario configuration: a JSON schema describing the agents, the mission
//! geometry, and the formula text, plus the loader that turns a validated
//! config into a ready-to-run [`Mission`].
//!
//! The format is deliberately strict: unknown keys are rejected, the schema
//! is versioned, and every derived quantity (tracking gains, service
//! cadence, feasibility margins) is checked before a run is allowed.

mod outputs;

pub use outputs::{
    emit_outputs, monitor_realized, run_scenario, trace_from_csv, OutputBundle, RunSummary,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::dwell::{validate_config, BoundReport, DwellError, ValidationInput};
use crate::milp::SolverConfig;
use crate::mtl::{parse_formula, AtomicPredicate, CenterRef, Formula, MtlError, TimeInterval};
use crate::runtime::{Mission, RuntimeError};
use crate::sim::{build_models, ModelConfig, SimError, World};

/// Schema version this build reads.
pub const SCHEMA_VERSION: u64 = 1;

/// Fixed signal name for the relay output in traces and formulas.
pub const SUBJECT_SIGNAL: &str = "y0";

/// Everything that can go wrong between a config file and a runnable
/// mission.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// JSON that does not match the schema; `pointer` names the offending
    /// field path.
    #[error("config rejected at `{pointer}`: {message}")]
    Schema { pointer: String, message: String },
    #[error("unsupported schema version {0}; this build reads schema {SCHEMA_VERSION}")]
    Version(u64),
    #[error("{0}")]
    Invalid(String),
    /// The servicing feasibility analysis vetoed the configuration.
    #[error("servicing bounds reject this configuration: {why}")]
    BoundsRejected { why: String, report: Box<BoundReport> },
    #[error(transparent)]
    Formula(#[from] MtlError),
    #[error(transparent)]
    Model(#[from] SimError),
    #[error(transparent)]
    Dwell(#[from] DwellError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Raw JSON mirror of a scenario file (schema 1).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u64,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Sampling period in seconds.
    pub ts: f64,
    /// Planning horizon in steps.
    pub n: usize,
    #[serde(default = "default_step_limit")]
    pub step_limit: usize,
    /// Communication radius.
    pub r: f64,
    /// Goal-region radius.
    pub r_f: f64,
    /// Service-trigger distance.
    pub eta: f64,
    /// Estimation-error tolerance.
    pub v_t: f64,
    /// Riccati weight for the explorer tracking gain.
    pub k: f64,
    /// Goal state in explorer coordinates.
    pub x_g: Vec<f64>,
    pub relay: RelayConfig,
    pub explorers: Vec<ExplorerConfig>,
    #[serde(default)]
    pub regions: BTreeMap<String, RegionConfig>,
    /// Practical-constraint formula text; region names act as atoms.
    #[serde(default)]
    pub formula: Option<String>,
    /// Synthesize the periodic-contact conjunct from the service cadence.
    #[serde(default = "default_true")]
    pub auto_contact: bool,
    #[serde(default)]
    pub solver: SolverOverrides,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayConfig {
    pub x0: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorerConfig {
    pub name: String,
    /// Initial position `[x, y, z]`; explorers are ground agents, so z must
    /// be zero.
    pub position: Vec<f64>,
    /// Initial planar velocity `[vx, vy]`; defaults to rest.
    #[serde(default)]
    pub velocity: Option<Vec<f64>>,
    /// Disturbance bound for this explorer.
    pub d_bar: f64,
}

/// Axis-aligned box given by center and edge lengths.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub center: Vec<f64>,
    pub size: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default)]
    pub node_limit: Option<usize>,
    #[serde(default)]
    pub time_limit: Option<f64>,
}

fn default_step_limit() -> usize {
    400
}

fn default_true() -> bool {
    true
}

/// A validated scenario: the mission to run plus the derived bounds that
/// justified accepting it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub mission: Mission,
    /// Feasibility analysis; `report.dwell[i].n_steps` is the service
    /// cadence of explorer `i`.
    pub report: BoundReport,
    pub explorer_names: Vec<String>,
    /// The practical-constraint formula text from the config, if any.
    pub formula_text: Option<String>,
}

impl Scenario {
    /// Service cadence per explorer, in steps.
    pub fn dwell_steps(&self) -> Vec<usize> {
        self.report.dwell.iter().map(|d| d.n_steps).collect()
    }
}

/// Built-in scenario text by name; see the `scenarios/` directory for the
/// same files on disk.
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "scenario1" => Some(include_str!("../../../../scenarios/scenario1.json")),
        "scenario1-desk" => Some(include_str!("../../../../scenarios/scenario1_desk.json")),
        "scenario2" => Some(include_str!("../../../../scenarios/scenario2.json")),
        "scenario2-desk" => Some(include_str!("../../../../scenarios/scenario2_desk.json")),
        "mini" => Some(include_str!("../../../../scenarios/mini.json")),
        _ => None,
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["scenario1", "scenario1-desk", "scenario2", "scenario2-desk", "mini"]
}

/// Parse a config document without building the mission. Schema violations
/// report the JSON path of the offending field.
pub fn parse_config(json: &str) -> Result<ScenarioConfig, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let cfg: ScenarioConfig =
        serde_path_to_error::deserialize(de).map_err(|err| ScenarioError::Schema {
            pointer: err.path().to_string(),
            message: err.inner().to_string(),
        })?;
    if cfg.schema != SCHEMA_VERSION {
        return Err(ScenarioError::Version(cfg.schema));
    }
    Ok(cfg)
}

/// Shrink a full-scale config onto a desk: every coordinate (states,
/// regions, goal) divides by 10 and the horizon drops to 10 steps, while
/// thresholds, input bounds, and disturbance levels stay as configured.
pub fn desk_scale(cfg: &mut ScenarioConfig) {
    const S: f64 = 10.0;
    for v in &mut cfg.relay.x0 {
        *v /= S;
    }
    for e in &mut cfg.explorers {
        for v in &mut e.position {
            *v /= S;
        }
        if let Some(vel) = &mut e.velocity {
            for v in vel {
                *v /= S;
            }
        }
    }
    for v in &mut cfg.x_g {
        *v /= S;
    }
    for region in cfg.regions.values_mut() {
        for v in &mut region.center {
            *v /= S;
        }
        for v in &mut region.size {
            *v /= S;
        }
    }
    cfg.n = 10;
    if !cfg.name.ends_with("-desk") {
        cfg.name.push_str("-desk");
    }
}

pub fn load_scenario(path: &Path, desk: bool) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_scenario_str(&text, desk)
}

pub fn load_scenario_str(json: &str, desk: bool) -> Result<Scenario, ScenarioError> {
    let mut cfg = parse_config(json)?;
    if desk {
        desk_scale(&mut cfg);
    }
    build_scenario(cfg)
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(name, "U" | "F" | "G" | "true" | "false" | "inf")
}

/// Validate the config, derive the feasibility report, and assemble the
/// mission.
pub fn build_scenario(cfg: ScenarioConfig) -> Result<Scenario, ScenarioError> {
    if cfg.name.is_empty() {
        return Err(invalid("name: must not be empty"));
    }
    if !(cfg.ts > 0.0) {
        return Err(invalid(format!("ts: must be positive, got {}", cfg.ts)));
    }
    if cfg.n == 0 {
        return Err(invalid("n: planning horizon must be at least 1"));
    }
    if cfg.step_limit == 0 {
        return Err(invalid("step_limit: must be at least 1"));
    }
    for (what, v) in [("r", cfg.r), ("r_f", cfg.r_f), ("v_t", cfg.v_t), ("k", cfg.k)] {
        if !(v > 0.0) {
            return Err(invalid(format!("{what}: must be positive, got {v}")));
        }
    }
    if !(cfg.eta >= 0.0) {
        return Err(invalid(format!("eta: must be nonnegative, got {}", cfg.eta)));
    }

    if cfg.explorers.is_empty() {
        return Err(invalid("explorers: at least one explorer is required"));
    }
    let mut names: Vec<&str> = Vec::new();
    for (i, e) in cfg.explorers.iter().enumerate() {
        if !is_identifier(&e.name) || e.name == "relay" {
            return Err(invalid(format!(
                "explorers[{i}].name: `{}` is not a usable agent name",
                e.name
            )));
        }
        if names.contains(&e.name.as_str()) {
            return Err(invalid(format!("explorers[{i}].name: duplicate `{}`", e.name)));
        }
        names.push(&e.name);
        if e.position.len() != 3 {
            return Err(invalid(format!(
                "explorers[{i}].position: expected [x, y, z], got {} entries",
                e.position.len()
            )));
        }
        if e.position[2] != 0.0 {
            return Err(invalid(format!(
                "explorers[{i}].position: explorers are ground agents, z must be 0"
            )));
        }
        if let Some(vel) = &e.velocity {
            if vel.len() != 2 {
                return Err(invalid(format!(
                    "explorers[{i}].velocity: expected [vx, vy], got {} entries",
                    vel.len()
                )));
            }
        }
        if !(e.d_bar > 0.0) {
            return Err(invalid(format!(
                "explorers[{i}].d_bar: must be positive, got {}",
                e.d_bar
            )));
        }
    }

    if cfg.relay.u_min.len() != 4 || cfg.relay.u_max.len() != 4 {
        return Err(invalid("relay.u_min/u_max: the relay model takes 4 inputs"));
    }
    for i in 0..4 {
        if cfg.relay.u_min[i] > cfg.relay.u_max[i] {
            return Err(invalid(format!(
                "relay.u_min[{i}]: lower bound {} exceeds upper bound {}",
                cfg.relay.u_min[i], cfg.relay.u_max[i]
            )));
        }
    }

    for (name, region) in &cfg.regions {
        if !is_identifier(name) {
            return Err(invalid(format!(
                "regions.{name}: region names must be formula identifiers"
            )));
        }
        if region.center.len() != 3 || region.size.len() != 3 {
            return Err(invalid(format!(
                "regions.{name}: center and size must each have 3 entries"
            )));
        }
        if region.size.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid(format!("regions.{name}.size: edges must be positive")));
        }
        if cfg.auto_contact && name.starts_with("contact") {
            return Err(invalid(format!(
                "regions.{name}: names starting with `contact` are reserved \
                 for the synthesized contact atoms"
            )));
        }
    }

    // Build the agent models; this also fixes the state dimensions the
    // remaining checks refer to.
    let model_cfg = ModelConfig {
        riccati_weight: cfg.k,
        explorer_names: cfg.explorers.iter().map(|e| e.name.clone()).collect(),
        d_bars: cfg.explorers.iter().map(|e| e.d_bar).collect(),
        u0_min: cfg.relay.u_min.clone(),
        u0_max: cfg.relay.u_max.clone(),
    };
    let (relay, models) = build_models(&model_cfg)?;

    if cfg.relay.x0.len() != relay.state_dim() {
        return Err(invalid(format!(
            "relay.x0: expected {} entries, got {}",
            relay.state_dim(),
            cfg.relay.x0.len()
        )));
    }
    if cfg.x_g.len() != models[0].state_dim() {
        return Err(invalid(format!(
            "x_g: expected {} entries, got {}",
            models[0].state_dim(),
            cfg.x_g.len()
        )));
    }

    // Feasibility margins for the servicing scheme.
    let d_bars: Vec<f64> = cfg.explorers.iter().map(|e| e.d_bar).collect();
    let report = validate_config(&ValidationInput {
        r: cfg.r,
        r_f: cfg.r_f,
        eta: cfg.eta,
        v_t: cfg.v_t,
        k: cfg.k,
        ts: cfg.ts,
        a: &models[0].a,
        b: &models[0].b,
        c: &models[0].c,
        p: &models[0].p,
        x_g: &cfg.x_g,
        d_bars: &d_bars,
    })?;
    if !report.theorem4_ok {
        let c = &report.checks;
        let mut failed = Vec::new();
        if !c.v_t_within_margin {
            failed.push("v_t exceeds (r - eta) scaled by the output gain");
        }
        if !c.eta_below_radius {
            failed.push("eta is not strictly below the communication radius r");
        }
        if !c.ultimate_bound_in_goal {
            failed.push("the steady-state tracking error cannot settle inside r_f");
        }
        if !c.servicing_cadence_ok {
            failed.push("some explorer requires more than one service per step");
        }
        return Err(ScenarioError::BoundsRejected {
            why: failed.join("; "),
            report: Box::new(report),
        });
    }

    // Region atoms for the practical-constraint formula.
    let atoms: Vec<AtomicPredicate> = cfg
        .regions
        .iter()
        .map(|(name, region)| {
            let bounds = region
                .center
                .iter()
                .zip(&region.size)
                .map(|(c, s)| (c - 0.5 * s, c + 0.5 * s))
                .collect();
            AtomicPredicate::box_region(name, SUBJECT_SIGNAL, bounds)
        })
        .collect();

    let practical = match &cfg.formula {
        Some(text) => Some(parse_formula(text, &atoms)?),
        None => None,
    };

    // Contact conjunct: each explorer must be visited within its cadence,
    // over and over. Window `[0, n_i - 1]` keeps every realized gap at or
    // under `n_i` steps.
    let estimate_signals: Vec<String> =
        (1..=cfg.explorers.len()).map(|i| format!("yhat{i}")).collect();
    let contact = if cfg.auto_contact {
        let conjuncts: Vec<Formula> = report
            .dwell
            .iter()
            .enumerate()
            .map(|(i, dwell)| {
                let atom = AtomicPredicate::norm_ball(
                    &format!("contact{}", i + 1),
                    SUBJECT_SIGNAL,
                    CenterRef::Signal(estimate_signals[i].clone()),
                    cfg.eta,
                );
                let window = TimeInterval::bounded(0, dwell.n_steps - 1)
                    .expect("cadence windows are well-formed");
                Formula::always(TimeInterval::all(), Formula::eventually(window, Formula::atom(atom)))
            })
            .collect();
        Some(Formula::and(conjuncts))
    } else {
        None
    };

    let formula = match (contact, practical) {
        (Some(m), Some(p)) => Formula::and(vec![m, p]),
        (Some(m), None) => m,
        (None, Some(p)) => p,
        (None, None) => {
            return Err(invalid(
                "scenario defines no mission: set `formula` or enable `auto_contact`",
            ))
        }
    };

    let explorer_states: Vec<Vec<f64>> = cfg
        .explorers
        .iter()
        .map(|e| {
            let vel = e.velocity.clone().unwrap_or_else(|| vec![0.0, 0.0]);
            vec![e.position[0], e.position[1], vel[0], vel[1]]
        })
        .collect();
    let world = World::new(
        relay,
        models,
        cfg.relay.x0.clone(),
        explorer_states,
        cfg.x_g.clone(),
        cfg.r,
        cfg.r_f,
        cfg.eta,
        cfg.ts,
    )?;

    let mut solver = SolverConfig::default();
    if let Some(nodes) = cfg.solver.node_limit {
        solver.node_limit = nodes;
    }
    solver.time_limit = cfg.solver.time_limit;

    let mission = Mission {
        world,
        formula,
        horizon: cfg.n,
        subject_signal: SUBJECT_SIGNAL.into(),
        estimate_signals,
        solver,
        step_limit: cfg.step_limit,
    };

    Ok(Scenario {
        name: cfg.name,
        seed: cfg.seed,
        mission,
        report,
        explorer_names: model_cfg.explorer_names,
        formula_text: cfg.formula,
    })
}
