//! Property tests for graph, weight and algorithm invariants.

use distopt_core::algorithms::{
    prox_residual, AlgorithmKind, AlgorithmParams, AlgorithmState, Inbox, Message, Method, RoundCtx,
};
use distopt_core::executor::{NoClock, RunControls, Simulation};
use distopt_core::graph::{make_graph, CommGraph, Connectivity, GraphKind};
use distopt_core::linalg::{axpy, DenseMatrix};
use distopt_core::problems::{
    localization_instance, nonconvex_instance, quadratic_instance, FeasibleSet, LocalObjective,
    DEFAULT_ROWS_PER_ROBOT,
};
use distopt_core::weights::{check_stochasticity, consensus_contraction, metropolis_weights};
use proptest::prelude::*;

const KINDS: [GraphKind; 4] = [
    GraphKind::Path,
    GraphKind::Ring,
    GraphKind::Complete,
    GraphKind::Random,
];

fn graph(kind: usize, n: usize, seed: u64, dropout: bool) -> CommGraph {
    let g = make_graph(KINDS[kind], n, 0.4, seed).unwrap();
    if dropout {
        g.dropout_schedule(0.3, 5, seed ^ 0x55).unwrap()
    } else {
        g
    }
}

fn component(s: &AlgorithmState, name: &str) -> Vec<f64> {
    s.components()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, v)| v.to_vec())
        .unwrap()
}

fn sum_of(sim: &Simulation, name: &str) -> Vec<f64> {
    let mut acc = vec![0.0; sim.problem().dim()];
    for s in sim.states() {
        axpy(1.0, &component(s, name), &mut acc);
    }
    acc
}

fn gradient_sum(sim: &Simulation) -> Vec<f64> {
    let mut acc = vec![0.0; sim.problem().dim()];
    for (i, s) in sim.states().iter().enumerate() {
        axpy(
            1.0,
            &sim.problem().local(i).objective.gradient(s.iterate()),
            &mut acc,
        );
    }
    acc
}

/// Every state component as raw bits, for exact comparison.
fn bits(s: &AlgorithmState) -> Vec<(&'static str, Vec<u64>)> {
    s.components()
        .into_iter()
        .map(|(n, v)| (n, v.iter().map(|x| x.to_bits()).collect()))
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn params(kind: AlgorithmKind, alpha0: f64) -> AlgorithmParams {
    let mut p = AlgorithmParams::new(kind);
    p.alpha0 = alpha0;
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn neighbors_are_symmetric(kind in 0..4usize, n in 2..10usize, seed in 0..500u64, t in 0..20usize) {
        let g = graph(kind, n, seed, true);
        for i in 0..n {
            for j in g.neighbors(i, t).unwrap() {
                prop_assert!(g.neighbors(j, t).unwrap().contains(&i));
            }
        }
    }

    #[test]
    fn unit_window_equals_connectivity(kind in 0..4usize, n in 2..10usize, seed in 0..500u64, t in 0..20usize) {
        let g = graph(kind, n, seed, true);
        let connected = g.is_connected(t) == Connectivity::Connected;
        prop_assert_eq!(g.union_connected_over_window(t, 1).unwrap(), connected);
    }

    #[test]
    fn zero_dropout_keeps_base_graph(kind in 0..4usize, n in 2..10usize, seed in 0..500u64) {
        let base = graph(kind, n, seed, false);
        let same = base.dropout_schedule(0.0, 3, seed).unwrap();
        for t in 0..15 {
            prop_assert_eq!(same.edges_at(t), base.edges_at(t));
        }
    }

    #[test]
    fn metropolis_is_symmetric_doubly_stochastic(kind in 0..4usize, n in 1..12usize, seed in 0..500u64, t in 0..10usize) {
        let g = graph(kind, n, seed, n > 1);
        let w = metropolis_weights(&g, t).unwrap();
        let report = check_stochasticity(&w);
        prop_assert!(report.nonnegative && report.row && report.column && report.doubly && report.symmetric);
        for v in w.apply(&vec![1.0; n]) {
            prop_assert!((v - 1.0).abs() <= 1e-12);
        }
        if n >= 2 && g.is_connected(t) == Connectivity::Connected {
            prop_assert!(consensus_contraction(&w).unwrap() < 1.0);
        }
    }

    #[test]
    fn projection_is_idempotent(x in prop::collection::vec(-5.0..5.0f64, 3), r in 0.1..3.0f64) {
        let sets = [
            FeasibleSet::new_box(vec![-1.0, 0.0, 0.5], vec![1.0, 0.2, 4.0]).unwrap(),
            FeasibleSet::new_ball(vec![0.5, -0.5, 1.0], r).unwrap(),
        ];
        for set in &sets {
            let p = set.project(&x);
            prop_assert_eq!(set.project(&p), p.clone());
            prop_assert!(set.contains(&p, 1e-12));
        }
    }

    #[test]
    fn tracking_conserves_gradient_sum(
        next in any::<bool>(), kind in 0..4usize, n in 2..7usize, seed in 0..500u64, dropout in any::<bool>()
    ) {
        let (p, prm) = if next {
            (nonconvex_instance(n, seed).unwrap(), params(AlgorithmKind::Next, 1.0))
        } else {
            let p = quadratic_instance(3, n, seed, 10.0).unwrap();
            (p, params(AlgorithmKind::Diging, 0.02))
        };
        let mut sim = Simulation::new(p, graph(kind, n, seed, dropout), prm).unwrap();
        for _ in 0..40 {
            let scale = 1.0 + gradient_sum(&sim).iter().map(|v| v.abs()).fold(0.0, f64::max);
            prop_assert!(max_diff(&sum_of(&sim, "y"), &gradient_sum(&sim)) <= 1e-9 * scale);
            sim.step().unwrap();
        }
    }

    #[test]
    fn admm_duals_sum_to_zero(sova in any::<bool>(), kind in 0..4usize, n in 2..7usize, seed in 0..500u64) {
        let kind_a = if sova { AlgorithmKind::Sova } else { AlgorithmKind::Cadmm };
        let p = localization_instance(2, n, seed, 0.1, DEFAULT_ROWS_PER_ROBOT).unwrap();
        let mut sim = Simulation::new(p, graph(kind, n, seed, false), params(kind_a, 0.0)).unwrap();
        for _ in 0..40 {
            sim.step().unwrap();
            prop_assert!(sum_of(&sim, "y").iter().all(|v| v.abs() <= 1e-9));
        }
    }

    #[test]
    fn dda_dual_sum_accumulates_gradients(kind in 0..4usize, n in 2..7usize, seed in 0..500u64, boxed in any::<bool>()) {
        let mut p = quadratic_instance(2, n, seed, 5.0).unwrap();
        if boxed {
            p = p.with_constraint(FeasibleSet::new_box(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap()).unwrap();
        }
        let mut sim = Simulation::new(p, graph(kind, n, seed, true), params(AlgorithmKind::Dda, 0.5)).unwrap();
        let mut ledger = sum_of(&sim, "z");
        for _ in 0..40 {
            axpy(1.0, &gradient_sum(&sim), &mut ledger);
            sim.step().unwrap();
            let scale = 1.0 + ledger.iter().map(|v| v.abs()).fold(0.0, f64::max);
            prop_assert!(max_diff(&sum_of(&sim, "z"), &ledger) <= 1e-9 * scale);
        }
    }

    #[test]
    fn evaluation_order_is_irrelevant(k in 0..8usize, order in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(), seed in 0..100u64) {
        let kind = AlgorithmKind::ALL[k];
        let p = localization_instance(3, 5, seed, 0.1, DEFAULT_ROWS_PER_ROBOT).unwrap();
        let g = make_graph(GraphKind::Ring, 5, 0.0, 0).unwrap();
        let mut prm = AlgorithmParams::new(kind);
        prm.inner_rounds = 2;
        let controls = RunControls { max_rounds: 20, stop_tolerance: 0.0, record_every: 1 };
        let mut a = Simulation::new(p.clone(), g.clone(), prm.clone()).unwrap();
        let mut b = Simulation::new(p, g, prm).unwrap();
        b.set_order(order).unwrap();
        let ta = a.run(&controls, &NoClock).unwrap();
        let tb = b.run(&controls, &NoClock).unwrap();
        prop_assert_eq!(ta.trace, tb.trace);
        for (sa, sb) in a.states().iter().zip(b.states()) {
            prop_assert_eq!(bits(sa), bits(sb));
        }
    }
}

/// Replays robot `r` on its own: its state, its weight row and the messages
/// its neighbors sent, and nothing else.
fn replay_in_isolation(kind: AlgorithmKind, r: usize) {
    let n = 5;
    let p = localization_instance(3, n, 8, 0.1, DEFAULT_ROWS_PER_ROBOT).unwrap();
    let g = make_graph(GraphKind::Ring, n, 0.0, 0).unwrap();
    let g = if kind.requires_static_graph() {
        g
    } else {
        g.dropout_schedule(0.3, 4, 2).unwrap()
    };
    let mut sim = Simulation::new(p.clone(), g.clone(), AlgorithmParams::new(kind)).unwrap();
    let mut alone = sim.states()[r].clone();
    for t in 0..25 {
        let topo = g.topology(t);
        let w = metropolis_weights(&g, t).unwrap();
        let ctx = |i: usize| RoundCtx {
            round: t,
            robot: i,
            num_robots: n,
            weights: w.row(i),
            neighbors: &topo.in_neighbors[i],
        };
        let recorded: Vec<(usize, Message)> = topo.in_neighbors[r]
            .iter()
            .map(|&j| {
                let mut s = sim.states()[j].clone();
                s.compute(0, p.local(j), &ctx(j)).unwrap();
                (j, s.outbox(0, &ctx(j)).for_recipient(r).unwrap().clone())
            })
            .collect();
        sim.step().unwrap();

        alone.compute(0, p.local(r), &ctx(r)).unwrap();
        let inbox = Inbox::new(
            r,
            &topo.in_neighbors[r],
            recorded.iter().map(|(j, m)| (*j, m)).collect(),
        )
        .unwrap();
        alone.absorb(0, p.local(r), &inbox, &ctx(r)).unwrap();
        assert_eq!(
            bits(&alone),
            bits(&sim.states()[r]),
            "{} round {t}",
            kind.name()
        );
    }
}

#[test]
fn single_exchange_methods_replay_in_isolation() {
    for kind in AlgorithmKind::ALL {
        if kind == AlgorithmKind::Nnk {
            continue;
        }
        for r in [0, 2] {
            replay_in_isolation(kind, r);
        }
    }
}

#[test]
fn argmin_updates_solve_their_subproblems() {
    let p = nonconvex_instance(4, 3).unwrap();
    let g = make_graph(GraphKind::Ring, 4, 0.0, 0).unwrap();
    let mut sim = Simulation::new(p.clone(), g.clone(), params(AlgorithmKind::Next, 1.0)).unwrap();
    for _ in 0..30 {
        let before: Vec<_> = sim.states().to_vec();
        sim.step().unwrap();
        for (i, (old, new)) in before.iter().zip(sim.states()).enumerate() {
            let (AlgorithmState::Next(old), AlgorithmState::Next(new)) = (old, new) else {
                unreachable!()
            };
            let (mu, pull) = old.surrogate_terms();
            let res = prox_residual(
                &p.local(i).objective,
                &p.local(i).set,
                &mu,
                &pull,
                &new.x_tilde,
            );
            assert!(res <= 1e-8, "next robot {i}: {res}");
        }
    }

    let boxed = quadratic_instance(2, 4, 5, 20.0)
        .unwrap()
        .with_constraint(FeasibleSet::new_box(vec![-0.2, -0.2], vec![0.2, 0.2]).unwrap())
        .unwrap();
    for kind in [AlgorithmKind::Cadmm, AlgorithmKind::Sova] {
        let mut sim =
            Simulation::new(boxed.clone(), g.clone(), AlgorithmParams::new(kind)).unwrap();
        for _ in 0..30 {
            let before: Vec<_> = sim.states().to_vec();
            sim.step().unwrap();
            for (i, (old, new)) in before.iter().zip(sim.states()).enumerate() {
                let x = component(old, "x");
                let y = component(old, "y");
                let mut mu = vec![0.0; 2];
                let mut pull: Vec<f64> = y.iter().map(|v| -v).collect();
                for (name, copy) in old.components() {
                    if name == "neighbor_copy" {
                        for c in 0..2 {
                            mu[c] += 2.0;
                            pull[c] += x[c] + copy[c];
                        }
                    }
                }
                let local = boxed.local(i);
                let res = prox_residual(&local.objective, &local.set, &mu, &pull, new.iterate());
                assert!(res <= 1e-8, "{} robot {i}: {res}", kind.name());
            }
        }
    }

    let zero = LocalObjective::quadratic(DenseMatrix::zeros(2, 2), vec![0.0; 2], 0.0);
    let mut sim = Simulation::new(boxed.clone(), g, params(AlgorithmKind::Dda, 0.5)).unwrap();
    for _ in 0..30 {
        sim.step().unwrap();
        for (i, s) in sim.states().iter().enumerate() {
            let AlgorithmState::Dda(d) = s else {
                unreachable!()
            };
            let a = d.step_mode.step(d.alpha0, d.k - 1);
            let pull: Vec<f64> = d.z.iter().map(|v| -a * v).collect();
            let res = prox_residual(&zero, &boxed.local(i).set, &[1.0, 1.0], &pull, &d.x);
            assert!(res <= 1e-8, "dda robot {i}: {res}");
        }
    }
}

#[test]
fn message_count_grows_every_round() {
    let p = localization_instance(3, 5, 1, 0.1, DEFAULT_ROWS_PER_ROBOT).unwrap();
    let g = make_graph(GraphKind::Ring, 5, 0.0, 0).unwrap();
    for kind in AlgorithmKind::ALL {
        let mut sim = Simulation::new(p.clone(), g.clone(), AlgorithmParams::new(kind)).unwrap();
        let mut last = sim.messages();
        for _ in 0..5 {
            sim.step().unwrap();
            assert!(sim.messages() > last, "{}", kind.name());
            last = sim.messages();
        }
    }
}
