//! Executor behavior: validation, trace bookkeeping, stopping and accounting.

use distopt_core::algorithms::{AlgorithmKind, AlgorithmParams, Method, StepMode};
use distopt_core::executor::{
    estimate_rate, run_plan, ExperimentPlan, GraphSpec, NoClock, ProblemKind, ProblemSpec,
    RunControls, Simulation,
};
use distopt_core::graph::{make_graph, CommGraph, GraphKind};
use distopt_core::linalg::DenseMatrix;
use distopt_core::problems::{
    centralized_solve, localization_instance, quadratic_instance, LocalObjective, LocalProblem,
    SeparableProblem, SovaLayout, DEFAULT_ROWS_PER_ROBOT,
};
use distopt_core::Error;

fn controls(max_rounds: usize, stop_tolerance: f64) -> RunControls {
    RunControls {
        max_rounds,
        stop_tolerance,
        record_every: 1,
    }
}

/// `½(x − 0)²` and `½(x − 2)²` on two connected robots.
fn pair() -> (SeparableProblem, CommGraph) {
    let robots = [0.0, 2.0]
        .iter()
        .map(|&c: &f64| {
            LocalProblem::unconstrained(LocalObjective::quadratic(
                DenseMatrix::identity(1),
                vec![-c],
                0.5 * c * c,
            ))
        })
        .collect();
    (
        SeparableProblem::new(robots).unwrap(),
        make_graph(GraphKind::Complete, 2, 0.0, 0).unwrap(),
    )
}

fn benchmark_plan(kind: AlgorithmKind) -> ExperimentPlan {
    ExperimentPlan {
        problem: ProblemSpec {
            kind: ProblemKind::Quadratic,
            dim: 3,
            robots: 5,
            seed: 11,
            noise_std: 0.1,
            condition_target: 10.0,
            rows_per_robot: DEFAULT_ROWS_PER_ROBOT,
            constraint: None,
            partition: None,
            objectives: None,
        },
        graph: GraphSpec {
            kind: GraphKind::Ring,
            robots: 5,
            edge_prob: 0.0,
            seed: 0,
            dropout: None,
        },
        algorithm: AlgorithmParams::new(kind),
        run: controls(50, 0.0),
        initial: None,
    }
}

#[test]
fn zero_rounds_rejected() {
    let mut plan = benchmark_plan(AlgorithmKind::Dgd);
    plan.run.max_rounds = 0;
    assert!(matches!(
        run_plan(&plan, &NoClock, None),
        Err(Error::Config(_))
    ));
    plan.run.max_rounds = 1;
    plan.run.record_every = 0;
    assert!(matches!(
        run_plan(&plan, &NoClock, None),
        Err(Error::Config(_))
    ));
}

#[test]
fn mismatched_plan_rejected_before_round_zero() {
    let mut plan = benchmark_plan(AlgorithmKind::Dgd);
    plan.graph.robots = 4;
    assert!(matches!(
        run_plan(&plan, &NoClock, None),
        Err(Error::Config(_))
    ));

    let p = localization_instance(2, 3, 0, 0.1, DEFAULT_ROWS_PER_ROBOT)
        .unwrap()
        .with_partition(SovaLayout::new(2, vec![vec![0], vec![0, 1], vec![1]]).unwrap())
        .unwrap();
    let g = make_graph(GraphKind::Path, 3, 0.0, 0).unwrap();
    let err = Simulation::new(p, g, AlgorithmParams::new(AlgorithmKind::Cadmm)).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn cadmm_trace_after_one_round() {
    let (p, g) = pair();
    let mut sim = Simulation::with_initial(
        p,
        g,
        AlgorithmParams::new(AlgorithmKind::Cadmm),
        vec![vec![0.0], vec![2.0]],
    )
    .unwrap();
    let out = sim.run(&controls(1, 0.0), &NoClock).unwrap();
    assert_eq!(out.trace.len(), 2);
    let r1 = &out.trace[1];
    assert_eq!(r1.round, 1);
    // x = (2/3, 4/3): mean 1, each robot 1/3 away.
    assert!((r1.consensus_err - 1.0 / 3.0).abs() < 1e-12);
    assert!(r1.x_gap < 1e-12);
    assert!(r1.f_gap < 1e-12);
    let xs: Vec<f64> = sim.states().iter().map(|s| s.iterate()[0]).collect();
    assert!((xs[0] - 2.0 / 3.0).abs() < 1e-12 && (xs[1] - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn trace_rows_follow_record_every() {
    let mut plan = benchmark_plan(AlgorithmKind::Dgd);
    plan.run = RunControls {
        max_rounds: 10,
        stop_tolerance: 0.0,
        record_every: 4,
    };
    let out = run_plan(&plan, &NoClock, None).unwrap();
    let rounds: Vec<usize> = out.run.trace.iter().map(|r| r.round).collect();
    assert_eq!(rounds, vec![0, 4, 8, 10]);
    assert_eq!(out.run.rounds, 10);
    assert!(!out.run.converged);
    for w in out.run.trace.windows(2) {
        assert!(w[1].msgs > w[0].msgs);
    }
    for r in &out.run.trace {
        assert!(r.consensus_err >= 0.0 && r.x_gap >= 0.0 && r.f_gap >= 0.0);
    }
}

#[test]
fn converged_run_stops_below_tolerance() {
    let mut plan = benchmark_plan(AlgorithmKind::Cadmm);
    plan.run = controls(2000, 1e-8);
    let out = run_plan(&plan, &NoClock, None).unwrap();
    assert!(out.run.converged);
    let last = out.run.trace.last().unwrap();
    assert_eq!(last.round, out.run.rounds);
    assert!(last.consensus_err + last.stationarity <= 1e-8);
}

#[test]
fn plans_are_reproducible() {
    for kind in [
        AlgorithmKind::Diging,
        AlgorithmKind::Next,
        AlgorithmKind::Sova,
    ] {
        let plan = benchmark_plan(kind);
        let a = run_plan(&plan, &NoClock, None).unwrap();
        let b = run_plan(&plan, &NoClock, Some(vec![4, 2, 0, 3, 1])).unwrap();
        assert_eq!(a.run.trace, b.run.trace);
        assert_eq!(a.final_states, b.final_states);
    }
}

#[test]
fn divergence_reports_round_robot_and_partial_trace() {
    let mut plan = benchmark_plan(AlgorithmKind::Dgd);
    plan.algorithm.step_mode = StepMode::Constant;
    plan.algorithm.alpha0 = 1e100;
    plan.run = controls(100, 0.0);
    let out = run_plan(&plan, &NoClock, None).unwrap();
    let err = out.run.error.expect("run must fail");
    assert!(err.is_numerical(), "{err}");
    let Error::InRound { round, .. } = err else {
        panic!("{err}");
    };
    assert_eq!(out.run.rounds, round - 1);
    assert_eq!(out.run.trace.len(), round);
}

#[test]
fn nnk_messages_scale_with_inner_rounds() {
    let base = {
        let mut plan = benchmark_plan(AlgorithmKind::Nnk);
        plan.run = controls(3, 0.0);
        plan
    };
    let count = |k: usize| {
        let mut plan = base.clone();
        plan.algorithm.inner_rounds = k;
        run_plan(&plan, &NoClock, None)
            .unwrap()
            .run
            .trace
            .last()
            .unwrap()
            .msgs
    };
    let one = count(0);
    assert!(one > 0);
    for k in 1..=3 {
        assert_eq!(count(k), (k as u64 + 1) * one);
    }
}

/// The acceptance step `1/(2L)` diverges on the standard benchmark; half
/// of it converges linearly.
#[test]
fn diging_quarter_step_converges_linearly_on_benchmark() {
    let seed = distopt_core::rng::derive_seed(42, distopt_core::rng::stream::PROBLEM);
    let p = quadratic_instance(3, 5, seed, 10.0).unwrap();
    let l = p
        .robots()
        .iter()
        .map(|r| r.objective.lipschitz_bound())
        .fold(0.0, f64::max);
    let mut prm = AlgorithmParams::new(AlgorithmKind::Diging);
    prm.alpha0 = 1.0 / (4.0 * l);
    let mut sim = Simulation::new(p, make_graph(GraphKind::Ring, 5, 0.0, 0).unwrap(), prm).unwrap();
    let out = sim.run(&controls(1500, 0.0), &NoClock).unwrap();
    // Stop at the first gap below 1e-8 so the rate window avoids round-off.
    let gaps: Vec<f64> = out.trace.iter().map(|r| r.x_gap).collect();
    let hit = gaps
        .iter()
        .position(|&g| g <= 1e-8)
        .expect("never reached 1e-8");
    let gaps = &gaps[..=hit];
    let rate = estimate_rate(gaps, 50).unwrap();
    assert!(rate.ratio < 1.0 && !rate.sublinear, "{rate:?}");
}

#[test]
fn partitioned_sova_matches_stacked_problem() {
    let p = localization_instance(2, 3, 4, 0.2, DEFAULT_ROWS_PER_ROBOT)
        .unwrap()
        .with_partition(SovaLayout::new(2, vec![vec![0], vec![0, 1], vec![1]]).unwrap())
        .unwrap();
    let x_star = centralized_solve(&p).unwrap().x;
    let g = make_graph(GraphKind::Path, 3, 0.0, 0).unwrap();
    let mut sim = Simulation::new(p.clone(), g, AlgorithmParams::new(AlgorithmKind::Sova)).unwrap();
    let out = sim.run(&controls(5000, 1e-11), &NoClock).unwrap();
    assert!(out.converged);
    for (i, s) in sim.states().iter().enumerate() {
        let want = p.restrict(i, &x_star);
        for (a, b) in s.iterate().iter().zip(&want) {
            assert!((a - b).abs() <= 1e-8, "robot {i}");
        }
    }
}
