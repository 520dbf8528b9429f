//! End-to-end checks of the receding-horizon loop on a small deterministic
//! mission: one explorer crawling to the goal, the relay forced by the
//! formula to make periodic contact with its estimated position.

use relay_mtl_core::milp::SolverConfig;
use relay_mtl_core::mtl::{AtomicPredicate, CenterRef, Formula, TimeInterval};
use relay_mtl_core::runtime::{
    cumulative_effort, run_algorithm1, service_times, Mission, ResolveReason, RuntimeError,
};
use relay_mtl_core::sim::{build_models, ModelConfig, ServiceTrigger, World};

/// Contact window length: the relay must touch the estimate ball at least
/// once in any window of `CONTACT_WINDOW + 1` consecutive steps.
const CONTACT_WINDOW: usize = 5;
const ETA: f64 = 2.0;

fn mini_world(explorer_xy: (f64, f64), relay_xyz: (f64, f64, f64), r_f: f64) -> World {
    let cfg = ModelConfig {
        riccati_weight: 0.1,
        explorer_names: vec!["e1".into()],
        d_bars: vec![0.0],
        u0_min: vec![-10.0; 4],
        u0_max: vec![10.0; 4],
    };
    let (relay, models) = build_models(&cfg).unwrap();
    let mut x0 = vec![0.0; 8];
    x0[0] = relay_xyz.0;
    x0[1] = relay_xyz.1;
    x0[2] = relay_xyz.2;
    World::new(
        relay,
        models,
        x0,
        vec![vec![explorer_xy.0, explorer_xy.1, 0.0, 0.0]],
        vec![0.0; 4],
        5.0,
        r_f,
        ETA,
        0.5,
    )
    .unwrap()
}

/// `G F[0,w] |y0 - yhat1| <= eta  &  G (y0 in D)` — periodic contact with
/// the predicted estimate plus a safety box.
fn contact_formula() -> Formula {
    let contact = Formula::atom(AtomicPredicate::norm_ball(
        "svc1",
        "y0",
        CenterRef::Signal("yhat1".into()),
        ETA,
    ));
    let safety = Formula::atom(AtomicPredicate::box_region(
        "stay",
        "y0",
        vec![(-50.0, 50.0), (-50.0, 50.0), (-5.0, 5.0)],
    ));
    Formula::and(vec![
        Formula::always(
            TimeInterval::all(),
            Formula::eventually(TimeInterval::bounded(0, CONTACT_WINDOW).unwrap(), contact),
        ),
        Formula::always(TimeInterval::all(), safety),
    ])
}

fn mission(world: World, formula: Formula, horizon: usize, step_limit: usize) -> Mission {
    Mission {
        world,
        formula,
        horizon,
        subject_signal: "y0".into(),
        estimate_signals: vec!["yhat1".into()],
        solver: SolverConfig::default(),
        step_limit,
    }
}

#[test]
fn explorers_already_in_goal_end_the_run_without_planning() {
    // The explorer starts 1 away from the goal output with r_f = 2.
    let world = mini_world((1.0, 0.0), (20.0, 0.0, 0.0), 2.0);
    let log = run_algorithm1(&mission(world, contact_formula(), 8, 50), 7).unwrap();

    assert_eq!(log.termination_index, Some(0));
    assert_eq!(log.steps.len(), 1);
    assert!(log.resolves.is_empty());
    assert_eq!(log.cumulative_effort, 0.0);
    assert_eq!(log.steps[0].u0, None);
}

#[test]
fn chase_mission_completes_with_bounded_service_gaps() {
    // Relay starts 6 away from the explorer's estimate; the contact windows
    // force it to close that distance repeatedly while the explorer crawls
    // from (6,0) to the goal disc of radius 2 around the origin.
    let world = mini_world((6.0, 0.0), (0.0, 0.0, 0.0), 2.0);
    let log = run_algorithm1(&mission(world, contact_formula(), 8, 60), 11).unwrap();

    let n_bar = log.termination_index.expect("run must terminate");
    assert!(n_bar > 0 && n_bar <= 40, "unexpected termination index {n_bar}");
    assert_eq!(log.steps.len(), n_bar + 1);

    // Zero disturbance: the estimate never drifts from the true state.
    for step in &log.steps {
        assert!(step.explorers[0].e1_norm <= 1e-9, "estimate drifted: {}", step.explorers[0].e1_norm);
    }

    // The formula guarantees a contact at least every CONTACT_WINDOW + 1
    // steps until termination.
    let times = service_times(&log, 0);
    for pair in times.windows(2) {
        assert!(
            pair[1] - pair[0] <= CONTACT_WINDOW + 1,
            "service gap {} exceeds the window bound",
            pair[1] - pair[0]
        );
    }

    // Every planned contact step is sound for the exact Euclidean ball.
    let mut planned = 0;
    for resolve in &log.resolves {
        for contact in &resolve.planned_services {
            planned += 1;
            assert!(
                contact.distance <= ETA + 1e-6,
                "planned contact at {} violates the ball: {}",
                contact.t_index,
                contact.distance
            );
        }
    }
    assert!(planned > 0, "the plans never promised a contact");

    // Inputs always come from the most recent solve.
    for step in &log.steps {
        if let Some(source) = step.source_resolve {
            let latest = log
                .resolves
                .iter()
                .rposition(|r| r.t_index <= step.t_index)
                .expect("a resolve precedes every applied input");
            assert_eq!(source, latest, "stale plan applied at step {}", step.t_index);
        }
    }

    // The relay had to move, and the log's stored effort is the recomputed one.
    assert!(log.cumulative_effort > 0.1);
    assert!((log.cumulative_effort - cumulative_effort(&log)).abs() < 1e-12);

    let verdict = log.verdict.expect("completed runs carry a verdict");
    assert!(verdict.weak, "realized trace must weakly satisfy the mission");

    // Relay-triggered services actually reset the estimate at that index.
    assert!(log
        .services
        .iter()
        .any(|ev| ev.trigger == ServiceTrigger::Relay && ev.t_index > 0));
}

#[test]
fn identical_seeds_reproduce_the_run() {
    let world = mini_world((6.0, 0.0), (0.0, 0.0, 0.0), 2.0);
    let a = run_algorithm1(&mission(world.clone(), contact_formula(), 8, 60), 3).unwrap();
    let b = run_algorithm1(&mission(world, contact_formula(), 8, 60), 3).unwrap();

    let shape = |log: &relay_mtl_core::runtime::RunLog| {
        log.steps
            .iter()
            .map(|s| (s.t_index, s.x0.clone(), s.u0.clone(), s.source_resolve))
            .collect::<Vec<_>>()
    };
    assert_eq!(shape(&a), shape(&b));
    assert_eq!(a.cumulative_effort, b.cumulative_effort);
    assert_eq!(a.termination_index, b.termination_index);
}

#[test]
fn impossible_missions_abort_with_the_specialized_formula() {
    let world = mini_world((6.0, 0.0), (0.0, 0.0, 0.0), 2.0);
    // The relay starts far outside this box, and the formula demands it
    // immediately: the very first solve must report infeasibility.
    let unreachable = Formula::always(
        TimeInterval::bounded(0, 0).unwrap(),
        Formula::atom(AtomicPredicate::box_region(
            "pin",
            "y0",
            vec![(30.0, 31.0), (30.0, 31.0), (0.0, 1.0)],
        )),
    );
    let err = run_algorithm1(&mission(world, unreachable, 8, 50), 7).unwrap_err();
    match err {
        RuntimeError::Infeasible { t_index, formula, snapshot } => {
            assert_eq!(t_index, 0);
            assert!(!formula.is_empty());
            assert_eq!(snapshot.steps.len(), 1);
            assert_eq!(snapshot.termination_index, None);
            assert!(snapshot.verdict.is_none());
        }
        other => panic!("expected an infeasibility abort, got {other}"),
    }
}

#[test]
fn exhausted_plans_trigger_horizon_resolves_until_the_step_limit() {
    // Far-away explorer, tiny eta: no services ever fire, so every re-solve
    // after the initial one is a horizon expiry, and the run hits its step
    // limit without terminating.
    let mut world = mini_world((40.0, 0.0), (0.0, 0.0, 0.0), 1.0);
    world.eta = 0.1;
    let safety = Formula::always(
        TimeInterval::all(),
        Formula::atom(AtomicPredicate::box_region(
            "stay",
            "y0",
            vec![(-100.0, 100.0), (-100.0, 100.0), (-5.0, 5.0)],
        )),
    );
    let mut m = mission(world, safety, 3, 8);
    m.estimate_signals = vec!["yhat1".into()];
    let err = run_algorithm1(&m, 5).unwrap_err();
    match err {
        RuntimeError::StepLimit { limit, snapshot } => {
            assert_eq!(limit, 8);
            assert_eq!(snapshot.steps.len(), 9);
            let reasons: Vec<ResolveReason> =
                snapshot.resolves.iter().map(|r| r.reason).collect();
            assert_eq!(
                reasons,
                vec![
                    ResolveReason::Initial,
                    ResolveReason::HorizonExpired,
                    ResolveReason::HorizonExpired,
                ]
            );
            assert_eq!(
                snapshot.resolves.iter().map(|r| r.t_index).collect::<Vec<_>>(),
                vec![0, 3, 6]
            );
        }
        other => panic!("expected a step-limit abort, got {other}"),
    }
}
