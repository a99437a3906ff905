//! Experiment configuration files.
//!
//! Every optional field has a default, and every seed that is not given is
//! derived from `run.seed`. [`Config::resolve`] fills all of them in, so
//! the resolved config written beside the outputs reproduces the run.

use std::path::Path;

use distopt_core::algorithms::{
    diging_default_step, AlgorithmKind, AlgorithmParams, DualInit, StepMode,
};
use distopt_core::executor::{
    ConstraintSpec, DropoutSpec, ExperimentPlan, GraphSpec, ProblemKind, ProblemSpec, RunControls,
};
use distopt_core::graph::GraphKind;
use distopt_core::linalg::DenseMatrix;
use distopt_core::problems::{LocalObjective, DEFAULT_ROWS_PER_ROBOT};
use distopt_core::rng::{derive_seed, stream};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithms: Option<Vec<AlgorithmConfig>>,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(rename = "type")]
    pub kind: ProblemKind,
    /// Dimension of the joint variable.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub robots: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise_std: Option<f64>,
    #[serde(default)]
    pub condition_target: Option<f64>,
    #[serde(default)]
    pub rows_per_robot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintSpec>,
    /// Owned coordinates per robot for variable partitioning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sova: Option<Vec<Vec<usize>>>,
    /// Per-robot quadratics for `type = "explicit"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local: Option<Vec<QuadraticConfig>>,
}

/// `½ xᵀ P x + qᵀ x + c`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticConfig {
    pub hessian: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    #[serde(default = "default_graph_kind")]
    pub kind: GraphKind,
    /// Defaults to the problem's robot count.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub edge_prob: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<DropoutConfig>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            kind: default_graph_kind(),
            n: None,
            edge_prob: None,
            seed: None,
            dropout: None,
        }
    }
}

fn default_graph_kind() -> GraphKind {
    GraphKind::Ring
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropoutConfig {
    pub prob: f64,
    pub window: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: AlgorithmKind,
    /// Output name in comparisons; defaults to `name`.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub step_mode: Option<StepMode>,
    #[serde(default)]
    pub alpha0: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default, rename = "K")]
    pub k: Option<usize>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub minibatch: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dual_init: Option<DualInit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_stop_tolerance")]
    pub stop_tolerance: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Master seed.
    #[serde(default)]
    pub seed: u64,
    /// Fill `wall_ms` from the system clock. Off by default so repeated
    /// runs write identical bytes.
    #[serde(default)]
    pub timing: bool,
    /// Initial iterate per robot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Vec<f64>>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_rounds: default_max_rounds(),
            stop_tolerance: default_stop_tolerance(),
            record_every: default_record_every(),
            seed: 0,
            timing: false,
            x0: None,
        }
    }
}

fn default_max_rounds() -> usize {
    1000
}

fn default_stop_tolerance() -> f64 {
    1e-8
}

fn default_record_every() -> usize {
    1
}

/// Parses a config document, reporting the key path of the first problem.
pub fn parse(text: &str) -> Result<Config, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.into_inner()))
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "schema_version: expected {SCHEMA_VERSION}, found {}",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// A labelled, fully resolved experiment.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub label: String,
    pub plan: ExperimentPlan,
}

impl Config {
    /// Algorithm entries: the single `algorithm`, or the `algorithms` list.
    pub fn algorithm_entries(&self) -> Result<Vec<AlgorithmConfig>, CliError> {
        match (&self.algorithm, &self.algorithms) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "give either `algorithm` or `algorithms`, not both".into(),
            )),
            (Some(a), None) => Ok(vec![a.clone()]),
            (None, Some(list)) if list.is_empty() => {
                Err(CliError::Config("algorithms: list is empty".into()))
            }
            (None, Some(list)) => Ok(list.clone()),
            (None, None) => Err(CliError::Config("missing `algorithm`".into())),
        }
    }

    /// Copy with every default and derived seed written out.
    pub fn resolve(&self) -> Result<Config, CliError> {
        let master = self.run.seed;
        let mut out = self.clone();
        let p = &mut out.problem;
        p.seed.get_or_insert(derive_seed(master, stream::PROBLEM));
        p.noise_std.get_or_insert(0.1);
        p.condition_target.get_or_insert(10.0);
        p.rows_per_robot.get_or_insert(DEFAULT_ROWS_PER_ROBOT);
        match p.kind {
            ProblemKind::Explicit => {
                let local = p.local.as_ref().ok_or_else(|| {
                    CliError::Config("problem.local: required for type \"explicit\"".into())
                })?;
                let dim = local.first().map_or(0, |q| q.linear.len());
                p.robots.get_or_insert(local.len());
                p.n.get_or_insert(dim);
            }
            ProblemKind::Nonconvex => {
                p.n.get_or_insert(1);
                p.robots.get_or_insert(5);
            }
            _ => {
                p.n.get_or_insert(3);
                p.robots.get_or_insert(5);
            }
        }
        let robots = p.robots.unwrap_or_default();

        let g = &mut out.graph;
        g.n.get_or_insert(robots);
        g.edge_prob.get_or_insert(0.5);
        g.seed.get_or_insert(derive_seed(master, stream::GRAPH));
        if let Some(d) = &mut g.dropout {
            d.seed.get_or_insert(derive_seed(master, stream::DROPOUT));
        }

        let problem = problem_spec(&out.problem)?
            .build()
            .map_err(|e| CliError::from_core_setup(e, "problem"))?;
        let resolve_algo = |a: &AlgorithmConfig| {
            let defaults = AlgorithmParams::new(a.name);
            let mut a = a.clone();
            a.label.get_or_insert_with(|| a.name.name().to_string());
            a.step_mode.get_or_insert(defaults.step_mode);
            a.alpha0.get_or_insert_with(|| match a.name {
                AlgorithmKind::Diging => diging_default_step(&problem),
                _ => defaults.alpha0,
            });
            a.rho.get_or_insert(defaults.rho);
            a.epsilon.get_or_insert(defaults.epsilon);
            a.k.get_or_insert(defaults.inner_rounds);
            a.tau.get_or_insert(defaults.tau);
            a.minibatch.get_or_insert(defaults.minibatch);
            a.seed.get_or_insert(derive_seed(master, stream::ALGORITHM));
            a.dual_init.get_or_insert(defaults.dual_init);
            a
        };
        if let Some(a) = &mut out.algorithm {
            *a = resolve_algo(a);
        }
        if let Some(list) = &mut out.algorithms {
            for a in list.iter_mut() {
                *a = resolve_algo(a);
            }
        }
        Ok(out)
    }

    /// One plan per algorithm entry, all on the same problem and graph.
    pub fn plans(&self) -> Result<Vec<ResolvedRun>, CliError> {
        let resolved = self.resolve()?;
        let problem = problem_spec(&resolved.problem)?;
        let graph = graph_spec(&resolved.graph);
        let run = RunControls {
            max_rounds: resolved.run.max_rounds,
            stop_tolerance: resolved.run.stop_tolerance,
            record_every: resolved.run.record_every,
        };
        run.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let entries = resolved.algorithm_entries()?;
        let mut labels = std::collections::BTreeSet::new();
        entries
            .iter()
            .map(|a| {
                let label = a.label.clone().unwrap_or_default();
                if !labels.insert(label.clone()) {
                    return Err(CliError::Config(format!(
                        "duplicate algorithm label `{label}`"
                    )));
                }
                let algorithm = algorithm_params(a);
                algorithm
                    .validate()
                    .map_err(|e| CliError::Config(format!("algorithm `{label}`: {e}")))?;
                Ok(ResolvedRun {
                    label,
                    plan: ExperimentPlan {
                        problem: problem.clone(),
                        graph: graph.clone(),
                        algorithm,
                        run: run.clone(),
                        initial: resolved.run.x0.clone(),
                    },
                })
            })
            .collect()
    }
}

fn problem_spec(p: &ProblemConfig) -> Result<ProblemSpec, CliError> {
    let objectives = match &p.local {
        Some(list) => Some(
            list.iter()
                .map(|q| {
                    let h = DenseMatrix::from_rows(&q.hessian)
                        .map_err(|e| CliError::Config(format!("problem.local: {e}")))?;
                    if !h.is_square() || h.nrows() != q.linear.len() {
                        return Err(CliError::Config(
                            "problem.local: hessian and linear sizes disagree".into(),
                        ));
                    }
                    Ok(LocalObjective::quadratic(h, q.linear.clone(), q.offset))
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    Ok(ProblemSpec {
        kind: p.kind,
        dim: p.n.unwrap_or(3),
        robots: p.robots.unwrap_or(5),
        seed: p.seed.unwrap_or_default(),
        noise_std: p.noise_std.unwrap_or(0.1),
        condition_target: p.condition_target.unwrap_or(10.0),
        rows_per_robot: p.rows_per_robot.unwrap_or(DEFAULT_ROWS_PER_ROBOT),
        constraint: p.constraint.clone(),
        partition: p.sova.clone(),
        objectives,
    })
}

fn graph_spec(g: &GraphConfig) -> GraphSpec {
    GraphSpec {
        kind: g.kind,
        robots: g.n.unwrap_or_default(),
        edge_prob: g.edge_prob.unwrap_or(0.5),
        seed: g.seed.unwrap_or_default(),
        dropout: g.dropout.as_ref().map(|d| DropoutSpec {
            prob: d.prob,
            window: d.window,
            seed: d.seed.unwrap_or_default(),
        }),
    }
}

fn algorithm_params(a: &AlgorithmConfig) -> AlgorithmParams {
    let d = AlgorithmParams::new(a.name);
    AlgorithmParams {
        kind: a.name,
        step_mode: a.step_mode.unwrap_or(d.step_mode),
        alpha0: a.alpha0.unwrap_or(d.alpha0),
        rho: a.rho.unwrap_or(d.rho),
        epsilon: a.epsilon.unwrap_or(d.epsilon),
        inner_rounds: a.k.unwrap_or(d.inner_rounds),
        tau: a.tau.unwrap_or(d.tau),
        minibatch: a.minibatch.unwrap_or(d.minibatch),
        seed: a.seed.unwrap_or(d.seed),
        dual_init: a.dual_init.unwrap_or(d.dual_init),
    }
}
