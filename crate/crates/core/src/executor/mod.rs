//! Round-synchronous execution of one method on one problem and graph.
//!
//! Each global round rebuilds the Metropolis matrix for the current edge
//! set, then runs every exchange of the method in two phases separated by a
//! barrier: all robots compute and publish their outboxes, then all robots
//! absorb their inboxes. Robots only ever touch their own state, so the
//! evaluation order inside a phase cannot change the result.

mod plan;
mod rate;

pub use plan::{
    run_plan, ConstraintSpec, DropoutSpec, ExperimentPlan, GraphSpec, PlanOutcome, ProblemKind,
    ProblemSpec, RobotSnapshot,
};
pub use rate::{estimate_rate, RateEstimate, RATE_FLOOR};

use alloc::vec;
use alloc::vec::Vec;

use crate::algorithms::{
    AlgorithmKind, AlgorithmParams, AlgorithmState, Inbox, InitCtx, Method, RoundCtx,
};
use crate::graph::CommGraph;
use crate::linalg::{axpy, distance, norm};
use crate::problems::{centralized_solve, FeasibleSet, SeparableProblem, Solution};
use crate::weights::metropolis_weights;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunControls {
    pub max_rounds: usize,
    /// Stop once consensus error plus stationarity is at or below this.
    pub stop_tolerance: f64,
    pub record_every: usize,
}

impl RunControls {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(Error::Config("run.max_rounds must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("run.record_every must be >= 1".into()));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(Error::Config("run.stop_tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Metrics after `round` completed rounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    pub round: usize,
    /// `max_i ‖x_i − x̄‖`
    pub consensus_err: f64,
    /// `‖x̄ − x*‖`
    pub x_gap: f64,
    /// `|f(x̄) − f*|`
    pub f_gap: f64,
    /// `‖sum_i ∇f_i(x̄)‖`
    pub grad_norm: f64,
    /// Optimality residual used by the stopping rule: the gradient-mapping
    /// norm at `x̄` for constrained problems, the stacked gradient of the
    /// penalized objective for NN-K, else `grad_norm`.
    pub stationarity: f64,
    /// Cumulative scalars delivered.
    pub msgs: u64,
    pub wall_ms: f64,
}

/// Source of wall time for the `wall_ms` column.
pub trait Clock {
    fn elapsed_ms(&self) -> f64;
}

/// Reports zero, keeping traces reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trace: Vec<TraceRecord>,
    pub rounds: usize,
    pub converged: bool,
    /// Failure inside a round; `trace` holds everything recorded before it.
    pub error: Option<Error>,
}

/// Robots, states and bookkeeping of a running experiment.
#[derive(Debug, Clone)]
pub struct Simulation {
    problem: SeparableProblem,
    graph: CommGraph,
    params: AlgorithmParams,
    optimum: Solution,
    joint_set: FeasibleSet,
    lipschitz: f64,
    states: Vec<AlgorithmState>,
    order: Vec<usize>,
    round: usize,
    msgs: u64,
}

/// Checks problem, graph and method compatibility before round 0.
pub fn validate(
    problem: &SeparableProblem,
    graph: &CommGraph,
    params: &AlgorithmParams,
) -> Result<()> {
    params.validate()?;
    if graph.num_robots() != problem.num_robots() {
        return Err(Error::Config(alloc::format!(
            "graph has {} robots, problem has {}",
            graph.num_robots(),
            problem.num_robots()
        )));
    }
    if graph.is_directed() {
        return Err(Error::UnsupportedTopology(
            "all methods mix with doubly stochastic weights and need an undirected graph".into(),
        ));
    }
    if params.kind.requires_static_graph() && !graph.is_static() {
        return Err(Error::UnsupportedTopology(alloc::format!(
            "{} keeps per-neighbor state and needs a static graph",
            params.kind.name()
        )));
    }
    if problem.partition().is_some() && params.kind != AlgorithmKind::Sova {
        return Err(Error::Config(alloc::format!(
            "partitioned problems need sova, not {}",
            params.kind.name()
        )));
    }
    Ok(())
}

impl Simulation {
    /// Starts every robot at the projection of the origin onto its set.
    pub fn new(
        problem: SeparableProblem,
        graph: CommGraph,
        params: AlgorithmParams,
    ) -> Result<Self> {
        let x0 = (0..problem.num_robots())
            .map(|i| {
                problem
                    .local(i)
                    .set
                    .project(&vec![0.0; problem.local_dim(i)])
            })
            .collect();
        Self::with_initial(problem, graph, params, x0)
    }

    /// Starts robot `i` at `x0[i]` (local coordinates).
    pub fn with_initial(
        problem: SeparableProblem,
        graph: CommGraph,
        params: AlgorithmParams,
        x0: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if x0.len() != problem.num_robots() {
            return Err(Error::Dimension {
                expected: problem.num_robots(),
                found: x0.len(),
            });
        }
        Self::build(
            problem,
            graph,
            params,
            |p, params, i, ctx| params.init(p.local(i), x0[i].clone(), ctx),
            true,
        )
    }

    /// Every robot at the consensus optimum with stationary auxiliary
    /// variables (see [`AlgorithmParams::init_at_optimum`]).
    pub fn at_optimum(
        problem: SeparableProblem,
        graph: CommGraph,
        params: AlgorithmParams,
    ) -> Result<Self> {
        let x_star = centralized_solve(&problem)?.x;
        Self::build(
            problem,
            graph,
            params,
            |p, params, i, ctx| params.init_at_optimum(p.local(i), p.restrict(i, &x_star), ctx),
            false,
        )
    }

    fn build(
        problem: SeparableProblem,
        graph: CommGraph,
        params: AlgorithmParams,
        init: impl Fn(
            &SeparableProblem,
            &AlgorithmParams,
            usize,
            &InitCtx<'_>,
        ) -> Result<AlgorithmState>,
        handshake: bool,
    ) -> Result<Self> {
        validate(&problem, &graph, &params)?;
        let optimum = centralized_solve(&problem)?;
        let joint_set = problem.joint_set()?;
        let lipschitz = problem
            .robots()
            .iter()
            .map(|r| r.objective.lipschitz_bound())
            .sum();
        let topo = graph.topology(0);
        let states = (0..problem.num_robots())
            .map(|i| {
                let ctx = InitCtx::new(&problem, i, &topo.in_neighbors[i]);
                init(&problem, &params, i, &ctx)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sim = Self {
            order: (0..problem.num_robots()).collect(),
            problem,
            graph,
            params,
            optimum,
            joint_set,
            lipschitz,
            states,
            round: 0,
            msgs: 0,
        };
        if handshake && sim.states[0].needs_handshake() {
            sim.handshake()?;
        }
        Ok(sim)
    }

    /// Evaluation order of robots within each phase.
    pub fn set_order(&mut self, order: Vec<usize>) -> Result<()> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..self.states.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(
                "order must permute the robots".into(),
            ));
        }
        self.order = order;
        Ok(())
    }

    pub fn problem(&self) -> &SeparableProblem {
        &self.problem
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    pub fn params(&self) -> &AlgorithmParams {
        &self.params
    }

    pub fn optimum(&self) -> &Solution {
        &self.optimum
    }

    pub fn states(&self) -> &[AlgorithmState] {
        &self.states
    }

    /// Completed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn messages(&self) -> u64 {
        self.msgs
    }

    fn handshake(&mut self) -> Result<()> {
        let topo = self.graph.topology(0);
        let w = metropolis_weights(&self.graph, 0)?;
        let outboxes: Vec<_> = self.states.iter().map(|s| s.handshake_outbox()).collect();
        for &i in &self.order {
            let nbrs = &topo.in_neighbors[i];
            let entries = nbrs
                .iter()
                .filter_map(|&j| outboxes[j].for_recipient(i).map(|m| (j, m)))
                .collect::<Vec<_>>();
            self.msgs += entries
                .iter()
                .map(|(_, m)| m.scalar_count() as u64)
                .sum::<u64>();
            let ctx = RoundCtx {
                round: 0,
                robot: i,
                num_robots: self.states.len(),
                weights: w.row(i),
                neighbors: nbrs,
            };
            Inbox::new(i, nbrs, entries)
                .and_then(|inbox| self.states[i].absorb_handshake(&inbox, &ctx))
                .map_err(|e| e.in_round(0, i))?;
        }
        Ok(())
    }

    /// Runs one global round.
    pub fn step(&mut self) -> Result<()> {
        let t = self.round;
        let label = t + 1;
        let topo = self.graph.topology(t);
        let w = metropolis_weights(&self.graph, t)?;
        let n = self.states.len();
        let exchanges = self.states[0].exchanges_per_round();
        for phase in 0..exchanges {
            for &i in &self.order {
                let ctx = RoundCtx {
                    round: t,
                    robot: i,
                    num_robots: n,
                    weights: w.row(i),
                    neighbors: &topo.in_neighbors[i],
                };
                self.states[i]
                    .compute(phase, self.problem.local(i), &ctx)
                    .map_err(|e| e.in_round(label, i))?;
            }
            let outboxes: Vec<_> = self
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let ctx = RoundCtx {
                        round: t,
                        robot: i,
                        num_robots: n,
                        weights: w.row(i),
                        neighbors: &topo.in_neighbors[i],
                    };
                    s.outbox(phase, &ctx)
                })
                .collect();
            for &i in &self.order {
                let nbrs = &topo.in_neighbors[i];
                let entries = nbrs
                    .iter()
                    .filter_map(|&j| outboxes[j].for_recipient(i).map(|m| (j, m)))
                    .collect::<Vec<_>>();
                self.msgs += entries
                    .iter()
                    .map(|(_, m)| m.scalar_count() as u64)
                    .sum::<u64>();
                let ctx = RoundCtx {
                    round: t,
                    robot: i,
                    num_robots: n,
                    weights: w.row(i),
                    neighbors: nbrs,
                };
                Inbox::new(i, nbrs, entries)
                    .and_then(|inbox| {
                        self.states[i].absorb(phase, self.problem.local(i), &inbox, &ctx)
                    })
                    .map_err(|e| e.in_round(label, i))?;
            }
        }
        self.round += 1;
        for (i, s) in self.states.iter().enumerate() {
            if s.iterate().iter().any(|v| !v.is_finite()) {
                return Err(
                    Error::Numerical("iterate is no longer finite".into()).in_round(label, i)
                );
            }
        }
        Ok(())
    }

    /// `x̄`: the robot mean, or under partitioning the per-coordinate mean
    /// over the robots owning that coordinate.
    pub fn mean_iterate(&self) -> Vec<f64> {
        let dim = self.problem.dim();
        let mut sum = vec![0.0; dim];
        match self.problem.partition() {
            Some(layout) => {
                let mut count = vec![0usize; dim];
                for (i, s) in self.states.iter().enumerate() {
                    layout.embed_add(i, s.iterate(), &mut sum);
                    for &c in layout.owned(i) {
                        count[c] += 1;
                    }
                }
                for (v, c) in sum.iter_mut().zip(&count) {
                    *v /= *c as f64;
                }
            }
            None => {
                for s in &self.states {
                    axpy(1.0, s.iterate(), &mut sum);
                }
                let n = self.states.len() as f64;
                sum.iter_mut().for_each(|v| *v /= n);
            }
        }
        sum
    }

    /// `max_i ‖x_i − x̄‖` on each robot's own coordinates.
    pub fn consensus_error(&self, mean: &[f64]) -> f64 {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| distance(s.iterate(), &self.problem.restrict(i, mean)))
            .fold(0.0, f64::max)
    }

    /// Norm of the stacked gradient of the NN-K penalized objective
    /// `α sum_i f_i(x_i) + ½ xᵀ(I − W)x` at the current iterates.
    pub fn penalized_gradient_norm(&self) -> Result<f64> {
        let w = metropolis_weights(&self.graph, self.round)?;
        let alpha = self.params.alpha0;
        let mut sq = 0.0;
        for (i, s) in self.states.iter().enumerate() {
            let x = s.iterate();
            let mut g = self.problem.local(i).objective.gradient(x);
            g.iter_mut().for_each(|v| *v *= alpha);
            axpy(1.0, x, &mut g);
            for &(j, wij) in w.row(i) {
                axpy(-wij, self.states[j].iterate(), &mut g);
            }
            sq += g.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(libm::sqrt(sq))
    }

    pub fn record(&self, clock: &dyn Clock) -> Result<TraceRecord> {
        let mean = self.mean_iterate();
        let grad = self.problem.global_gradient(&mean)?;
        let grad_norm = norm(&grad);
        let stationarity = if self.params.kind.targets_penalized_problem() {
            self.penalized_gradient_norm()?
        } else if self.joint_set.is_unconstrained() {
            grad_norm
        } else {
            let mut trial = mean.clone();
            axpy(-1.0 / self.lipschitz, &grad, &mut trial);
            distance(&mean, &self.joint_set.project(&trial)) * self.lipschitz
        };
        Ok(TraceRecord {
            round: self.round,
            consensus_err: self.consensus_error(&mean),
            x_gap: distance(&mean, &self.optimum.x),
            f_gap: libm::fabs(self.problem.value(&mean)? - self.optimum.value),
            grad_norm,
            stationarity,
            msgs: self.msgs,
            wall_ms: clock.elapsed_ms(),
        })
    }

    /// Residual compared against the stop tolerance.
    pub fn stop_residual(&self, r: &TraceRecord) -> f64 {
        if self.params.kind.targets_penalized_problem() {
            r.stationarity
        } else {
            r.consensus_err + r.stationarity
        }
    }

    /// Runs until convergence or `max_rounds`, recording round 0, every
    /// `record_every`-th round and the last round.
    pub fn run(&mut self, controls: &RunControls, clock: &dyn Clock) -> Result<RunOutcome> {
        self.run_observed(controls, clock, |_| Ok(()))
    }

    /// As [`Simulation::run`], calling `observe` after round 0 and after
    /// every round. An observer error aborts the run like a round failure.
    pub fn run_observed(
        &mut self,
        controls: &RunControls,
        clock: &dyn Clock,
        mut observe: impl FnMut(&Simulation) -> Result<()>,
    ) -> Result<RunOutcome> {
        controls.validate()?;
        let mut trace = vec![self.record(clock)?];
        let mut outcome = RunOutcome {
            trace: Vec::new(),
            rounds: 0,
            converged: false,
            error: None,
        };
        if let Err(e) = observe(self) {
            outcome.error = Some(e);
            outcome.trace = trace;
            return Ok(outcome);
        }
        for r in 1..=controls.max_rounds {
            let result = self
                .step()
                .and_then(|()| self.record(clock))
                .and_then(|rec| observe(self).map(|()| rec));
            let rec = match result {
                Ok(rec) => rec,
                Err(e) => {
                    outcome.error = Some(e);
                    break;
                }
            };
            outcome.rounds = r;
            let done = self.stop_residual(&rec) <= controls.stop_tolerance;
            if done || r % controls.record_every == 0 || r == controls.max_rounds {
                trace.push(rec);
            }
            if done {
                outcome.converged = true;
                break;
            }
        }
        outcome.trace = trace;
        Ok(outcome)
    }
}
