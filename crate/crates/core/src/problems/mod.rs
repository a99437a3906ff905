//! Separable problems `min sum_i f_i(x)  s.t.  x in X_i`.
//!
//! Each robot owns a [`LocalProblem`]: an objective oracle plus a feasible
//! set. Under variable partitioning ([`SovaLayout`]) robot `i` only holds the
//! global coordinates it owns, and its objective is written in those local
//! coordinates.

mod centralized;
mod instances;
mod objective;
mod sets;

pub use centralized::{centralized_solve, Solution, ORACLE_TOLERANCE};
pub use instances::{
    localization_instance, nonconvex_instance, quadratic_instance, DEFAULT_ROWS_PER_ROBOT,
};
pub use objective::LocalObjective;
pub use sets::FeasibleSet;

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::axpy;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalProblem {
    pub objective: LocalObjective,
    pub set: FeasibleSet,
}

impl LocalProblem {
    pub fn unconstrained(objective: LocalObjective) -> Self {
        Self {
            objective,
            set: FeasibleSet::Unconstrained,
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }
}

/// Coordinate ownership for variable partitioning: robot `i` holds the
/// global coordinates `owned[i]` (ascending). The selection map `Φ_ij`
/// picks the coordinates robots `i` and `j` share.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SovaLayout {
    global_dim: usize,
    owned: Vec<Vec<usize>>,
}

impl SovaLayout {
    pub fn new(global_dim: usize, mut owned: Vec<Vec<usize>>) -> Result<Self> {
        let mut covered = vec![false; global_dim];
        for (i, coords) in owned.iter_mut().enumerate() {
            coords.sort_unstable();
            let before = coords.len();
            coords.dedup();
            if coords.len() != before {
                return Err(Error::Config(alloc::format!(
                    "robot {i} lists a coordinate twice"
                )));
            }
            for &c in coords.iter() {
                if c >= global_dim {
                    return Err(Error::Config(alloc::format!(
                        "robot {i} owns coordinate {c} outside dimension {global_dim}"
                    )));
                }
                covered[c] = true;
            }
        }
        if let Some(c) = covered.iter().position(|c| !c) {
            return Err(Error::Config(alloc::format!(
                "coordinate {c} is owned by no robot"
            )));
        }
        Ok(Self { global_dim, owned })
    }

    /// Every robot owns every coordinate: `Φ_ij = I`.
    pub fn identity(global_dim: usize, num_robots: usize) -> Self {
        Self {
            global_dim,
            owned: vec![(0..global_dim).collect(); num_robots],
        }
    }

    pub fn global_dim(&self) -> usize {
        self.global_dim
    }

    pub fn num_robots(&self) -> usize {
        self.owned.len()
    }

    pub fn owned(&self, i: usize) -> &[usize] {
        &self.owned[i]
    }

    /// Shared coordinates of robots `i` and `j` as `(local index in i,
    /// local index in j)`, ordered by global coordinate.
    pub fn shared(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let (a, b) = (&self.owned[i], &self.owned[j]);
        let (mut p, mut q) = (0, 0);
        let mut out = Vec::new();
        while p < a.len() && q < b.len() {
            match a[p].cmp(&b[q]) {
                core::cmp::Ordering::Less => p += 1,
                core::cmp::Ordering::Greater => q += 1,
                core::cmp::Ordering::Equal => {
                    out.push((p, q));
                    p += 1;
                    q += 1;
                }
            }
        }
        out
    }

    pub fn restrict(&self, i: usize, global: &[f64]) -> Vec<f64> {
        self.owned[i].iter().map(|&c| global[c]).collect()
    }

    /// `global[owned] += local`
    pub fn embed_add(&self, i: usize, local: &[f64], global: &mut [f64]) {
        for (&c, v) in self.owned[i].iter().zip(local) {
            global[c] += v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeparableProblem {
    dim: usize,
    robots: Vec<LocalProblem>,
    sova: Option<SovaLayout>,
    truth: Option<Vec<f64>>,
}

impl SeparableProblem {
    /// All robots share the same `dim`-dimensional variable.
    pub fn new(robots: Vec<LocalProblem>) -> Result<Self> {
        let dim = robots
            .first()
            .ok_or_else(|| Error::InvalidParameter("problem needs at least one robot".into()))?
            .dim();
        for r in &robots {
            if r.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: r.dim(),
                });
            }
            r.set.check_dim(dim)?;
        }
        Ok(Self {
            dim,
            robots,
            sova: None,
            truth: None,
        })
    }

    /// Variable-partitioned problem; robot `i`'s local problem lives in the
    /// coordinates `layout.owned(i)`.
    pub fn partitioned(robots: Vec<LocalProblem>, layout: SovaLayout) -> Result<Self> {
        if robots.len() != layout.num_robots() {
            return Err(Error::Config(alloc::format!(
                "layout covers {} robots, problem has {}",
                layout.num_robots(),
                robots.len()
            )));
        }
        for (i, r) in robots.iter().enumerate() {
            let local = layout.owned(i).len();
            if r.dim() != local {
                return Err(Error::Dimension {
                    expected: local,
                    found: r.dim(),
                });
            }
            r.set.check_dim(local)?;
        }
        Ok(Self {
            dim: layout.global_dim(),
            robots,
            sova: Some(layout),
            truth: None,
        })
    }

    /// Restricts every robot to the coordinates it owns.
    pub fn with_partition(self, layout: SovaLayout) -> Result<Self> {
        if self.sova.is_some() {
            return Err(Error::Config("problem is already partitioned".into()));
        }
        if layout.global_dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: layout.global_dim(),
            });
        }
        let truth = self.truth.clone();
        let robots = self
            .robots
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let idx = layout.owned(i);
                Ok(LocalProblem {
                    objective: r.objective.restrict(idx)?,
                    set: r.set.restrict(idx),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = Self::partitioned(robots, layout)?;
        p.truth = truth;
        Ok(p)
    }

    /// Applies the same feasible set to every robot.
    pub fn with_constraint(mut self, set: FeasibleSet) -> Result<Self> {
        if self.sova.is_some() {
            return Err(Error::Config(
                "apply constraints before partitioning the problem".into(),
            ));
        }
        set.check_dim(self.dim)?;
        for r in &mut self.robots {
            r.set = set.clone();
        }
        Ok(self)
    }

    pub fn with_truth(mut self, truth: Vec<f64>) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn num_robots(&self) -> usize {
        self.robots.len()
    }

    /// Dimension of the joint variable.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn local(&self, i: usize) -> &LocalProblem {
        &self.robots[i]
    }

    pub fn robots(&self) -> &[LocalProblem] {
        &self.robots
    }

    pub fn local_dim(&self, i: usize) -> usize {
        self.robots[i].dim()
    }

    pub fn partition(&self) -> Option<&SovaLayout> {
        self.sova.as_ref()
    }

    /// Hidden ground truth used to generate the data, when known.
    pub fn truth(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }

    /// Robot `i`'s view of a joint point.
    pub fn restrict(&self, i: usize, x: &[f64]) -> Vec<f64> {
        match &self.sova {
            Some(l) => l.restrict(i, x),
            None => x.to_vec(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `f(x) = sum_i f_i(x)`
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self
            .robots
            .iter()
            .enumerate()
            .map(|(i, r)| r.objective.value(&self.restrict(i, x)))
            .sum())
    }

    /// `∇f(x) = sum_i ∇f_i(x)`. Diagnostics only; no algorithm calls this.
    pub fn global_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.dim];
        for (i, r) in self.robots.iter().enumerate() {
            let local = r.objective.gradient(&self.restrict(i, x));
            match &self.sova {
                Some(l) => l.embed_add(i, &local, &mut g),
                None => axpy(1.0, &local, &mut g),
            }
        }
        Ok(g)
    }
}
