//! Fully resolved experiment description: every seed and default is
//! explicit, so a plan reproduces its run exactly.

use alloc::string::String;
use alloc::vec::Vec;

use super::{Clock, RunControls, RunOutcome, Simulation};
use crate::algorithms::{AlgorithmParams, Method};
use crate::graph::{make_graph, CommGraph, GraphKind};
use crate::problems::{
    localization_instance, nonconvex_instance, quadratic_instance, FeasibleSet, LocalObjective,
    LocalProblem, SeparableProblem, Solution, SovaLayout,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProblemKind {
    Quadratic,
    Localization,
    Nonconvex,
    /// Objectives listed in [`ProblemSpec::objectives`].
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum ConstraintSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl ConstraintSpec {
    pub fn build(&self) -> Result<FeasibleSet> {
        match self {
            Self::Box { lower, upper } => FeasibleSet::new_box(lower.clone(), upper.clone()),
            Self::Ball { center, radius } => FeasibleSet::new_ball(center.clone(), *radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Ignored by the scalar nonconvex family.
    pub dim: usize,
    pub robots: usize,
    pub seed: u64,
    pub noise_std: f64,
    pub condition_target: f64,
    pub rows_per_robot: usize,
    pub constraint: Option<ConstraintSpec>,
    /// Owned global coordinates per robot (variable partitioning).
    pub partition: Option<Vec<Vec<usize>>>,
    /// One objective per robot for [`ProblemKind::Explicit`].
    pub objectives: Option<Vec<LocalObjective>>,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<SeparableProblem> {
        let mut p = match self.kind {
            ProblemKind::Quadratic => {
                quadratic_instance(self.dim, self.robots, self.seed, self.condition_target)?
            }
            ProblemKind::Localization => localization_instance(
                self.dim,
                self.robots,
                self.seed,
                self.noise_std,
                self.rows_per_robot,
            )?,
            ProblemKind::Nonconvex => nonconvex_instance(self.robots, self.seed)?,
            ProblemKind::Explicit => {
                let objectives = self
                    .objectives
                    .as_ref()
                    .ok_or_else(|| Error::Config("explicit problem lists no objectives".into()))?;
                SeparableProblem::new(
                    objectives
                        .iter()
                        .cloned()
                        .map(LocalProblem::unconstrained)
                        .collect(),
                )?
            }
        };
        if let Some(c) = &self.constraint {
            p = p.with_constraint(c.build()?)?;
        }
        if let Some(owned) = &self.partition {
            let layout = SovaLayout::new(p.dim(), owned.clone())?;
            p = p.with_partition(layout)?;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DropoutSpec {
    pub prob: f64,
    pub window: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub robots: usize,
    pub edge_prob: f64,
    pub seed: u64,
    pub dropout: Option<DropoutSpec>,
}

impl GraphSpec {
    pub fn build(&self) -> Result<CommGraph> {
        let g = make_graph(self.kind, self.robots, self.edge_prob, self.seed)?;
        match &self.dropout {
            Some(d) => g.dropout_schedule(d.prob, d.window, d.seed),
            None => Ok(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentPlan {
    pub problem: ProblemSpec,
    pub graph: GraphSpec,
    pub algorithm: AlgorithmParams,
    pub run: RunControls,
    /// Initial iterate per robot in local coordinates; the projection of
    /// the origin when absent.
    pub initial: Option<Vec<Vec<f64>>>,
}

/// Named state components of one robot at the end of a run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobotSnapshot {
    pub robot: usize,
    pub components: Vec<(String, Vec<f64>)>,
}

#[derive(Debug)]
pub struct PlanOutcome {
    pub run: RunOutcome,
    pub final_states: Vec<RobotSnapshot>,
    pub optimum: Solution,
}

/// Builds and runs a plan. Validation failures return `Err` before any
/// round; failures inside rounds are reported in `run.error`.
pub fn run_plan(
    plan: &ExperimentPlan,
    clock: &dyn Clock,
    order: Option<Vec<usize>>,
) -> Result<PlanOutcome> {
    plan.run.validate()?;
    let problem = plan.problem.build()?;
    let graph = plan.graph.build()?;
    if graph.num_robots() != problem.num_robots() {
        return Err(Error::Config(alloc::format!(
            "graph has {} robots, problem has {}",
            graph.num_robots(),
            problem.num_robots()
        )));
    }
    let mut sim = match &plan.initial {
        Some(x0) => Simulation::with_initial(problem, graph, plan.algorithm.clone(), x0.clone())?,
        None => Simulation::new(problem, graph, plan.algorithm.clone())?,
    };
    if let Some(o) = order {
        sim.set_order(o)?;
    }
    let run = sim.run(&plan.run, clock)?;
    let final_states = sim
        .states()
        .iter()
        .enumerate()
        .map(|(robot, s)| RobotSnapshot {
            robot,
            components: s
                .components()
                .into_iter()
                .map(|(k, v)| (String::from(k), v.to_vec()))
                .collect(),
        })
        .collect();
    Ok(PlanOutcome {
        run,
        final_states,
        optimum: sim.optimum().clone(),
    })
}
