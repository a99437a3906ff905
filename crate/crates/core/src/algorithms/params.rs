use alloc::vec::Vec;

use super::{
    AlgorithmState, CadmmState, DdaState, DgdState, DigingState, DsgdState, NextState, NnkState,
    SovaLink, SovaState,
};
use crate::problems::{LocalProblem, SeparableProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AlgorithmKind {
    Dgd,
    Dsgd,
    Diging,
    Dda,
    Nnk,
    Next,
    Cadmm,
    Sova,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 8] = [
        Self::Dgd,
        Self::Dsgd,
        Self::Diging,
        Self::Dda,
        Self::Nnk,
        Self::Next,
        Self::Cadmm,
        Self::Sova,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dgd => "dgd",
            Self::Dsgd => "dsgd",
            Self::Diging => "diging",
            Self::Dda => "dda",
            Self::Nnk => "nnk",
            Self::Next => "next",
            Self::Cadmm => "cadmm",
            Self::Sova => "sova",
        }
    }

    /// Whether the method's limit is the penalized problem rather than the
    /// original one.
    pub fn targets_penalized_problem(self) -> bool {
        self == Self::Nnk
    }

    /// C-ADMM and SOVA keep per-neighbor state and need a fixed graph.
    pub fn requires_static_graph(self) -> bool {
        matches!(self, Self::Cadmm | Self::Sova)
    }
}

/// Step-size schedule for DGD, DSGD and DDA.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StepMode {
    /// `α₀ / √(k+1)`
    Decaying,
    Constant,
}

impl StepMode {
    pub fn step(self, alpha0: f64, k: usize) -> f64 {
        match self {
            Self::Decaying => alpha0 / libm::sqrt((k + 1) as f64),
            Self::Constant => alpha0,
        }
    }
}

/// Initial dual-averaging accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DualInit {
    /// `z⁽⁰⁾ = x⁽⁰⁾`
    Iterate,
    /// `z⁽⁰⁾ = 0`
    Zero,
}

/// Parameters shared by all robots. Fields a method does not use are
/// ignored by it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlgorithmParams {
    pub kind: AlgorithmKind,
    pub step_mode: StepMode,
    /// Base step size: `α₀` for DGD/DSGD/DDA/NEXT, the constant `α` for
    /// DIGing and the penalty weight `α` for NN-K.
    pub alpha0: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// NN-K inner rounds `K`.
    pub inner_rounds: usize,
    pub tau: f64,
    pub minibatch: usize,
    pub seed: u64,
    pub dual_init: DualInit,
}

impl AlgorithmParams {
    /// Defaults for `kind`. DIGing's step depends on the problem; see
    /// [`diging_default_step`].
    pub fn new(kind: AlgorithmKind) -> Self {
        let alpha0 = match kind {
            AlgorithmKind::Dgd | AlgorithmKind::Dsgd => 0.05,
            AlgorithmKind::Diging => 0.05,
            AlgorithmKind::Dda => 0.5,
            AlgorithmKind::Nnk => 0.1,
            AlgorithmKind::Next => 1.0,
            AlgorithmKind::Cadmm | AlgorithmKind::Sova => 0.0,
        };
        Self {
            kind,
            step_mode: StepMode::Decaying,
            alpha0,
            rho: 1.0,
            epsilon: 1.0,
            inner_rounds: 0,
            tau: 1.0,
            minibatch: 1,
            seed: 0,
            dual_init: DualInit::Iterate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(alloc::format!(
                    "{} needs {name} > 0, got {v}",
                    self.kind.name()
                )))
            }
        };
        use AlgorithmKind::*;
        match self.kind {
            Dgd | Diging | Dda | Next => positive("alpha0", self.alpha0)?,
            Dsgd => {
                positive("alpha0", self.alpha0)?;
                if self.minibatch == 0 {
                    return Err(Error::InvalidParameter("dsgd needs minibatch >= 1".into()));
                }
            }
            Nnk => {
                positive("alpha0", self.alpha0)?;
                positive("epsilon", self.epsilon)?;
            }
            Cadmm | Sova => positive("rho", self.rho)?,
        }
        if self.kind == Next {
            positive("tau", self.tau)?;
        }
        Ok(())
    }

    /// Initial state of robot `ctx.robot` at `x0` (local coordinates).
    pub fn init(
        &self,
        local: &LocalProblem,
        x0: Vec<f64>,
        ctx: &InitCtx<'_>,
    ) -> Result<AlgorithmState> {
        self.validate()?;
        super::check_len(&x0, local.dim())?;
        let p = self;
        Ok(match self.kind {
            AlgorithmKind::Dgd => {
                AlgorithmState::Dgd(DgdState::new(local, x0, p.alpha0, p.step_mode))
            }
            AlgorithmKind::Dsgd => AlgorithmState::Dsgd(DsgdState::new(
                local,
                x0,
                p.alpha0,
                p.step_mode,
                p.minibatch,
                crate::rng::derive_seed(p.seed, ctx.robot as u64),
            )?),
            AlgorithmKind::Diging => AlgorithmState::Diging(DigingState::new(local, x0, p.alpha0)?),
            AlgorithmKind::Dda => {
                AlgorithmState::Dda(DdaState::new(local, x0, p.alpha0, p.step_mode, p.dual_init))
            }
            AlgorithmKind::Nnk => AlgorithmState::Nnk(NnkState::new(
                local,
                x0,
                p.alpha0,
                p.epsilon,
                p.inner_rounds,
            )?),
            AlgorithmKind::Next => {
                AlgorithmState::Next(NextState::new(local, x0, p.alpha0, p.tau, ctx.num_robots))
            }
            AlgorithmKind::Cadmm => {
                AlgorithmState::Cadmm(CadmmState::new(x0, p.rho, ctx.neighbors))
            }
            AlgorithmKind::Sova => {
                AlgorithmState::Sova(SovaState::new(x0, p.rho, ctx.links.clone())?)
            }
        })
    }

    /// State of a robot sitting at the consensus optimum `x_star` (local
    /// coordinates) with every auxiliary variable at its stationary value,
    /// assuming `x_star` solves the joint problem.
    pub fn init_at_optimum(
        &self,
        local: &LocalProblem,
        x_star: Vec<f64>,
        ctx: &InitCtx<'_>,
    ) -> Result<AlgorithmState> {
        let mut state = self.init(local, x_star.clone(), ctx)?;
        let grad = local.objective.gradient(&x_star);
        match &mut state {
            AlgorithmState::Dgd(_) | AlgorithmState::Dsgd(_) | AlgorithmState::Nnk(_) => {}
            AlgorithmState::Diging(s) => s.y.iter_mut().for_each(|v| *v = 0.0),
            AlgorithmState::Dda(s) => {
                let a = s.step_mode.step(s.alpha0, 0);
                s.z = x_star.iter().map(|v| -v / a).collect();
            }
            AlgorithmState::Next(s) => {
                s.y.iter_mut().for_each(|v| *v = 0.0);
                s.pi = grad.iter().map(|v| -v).collect();
            }
            AlgorithmState::Cadmm(s) => {
                s.set_y(grad.iter().map(|v| -v).collect());
                for link in s.links_mut() {
                    link.copy = x_star.clone();
                }
            }
            AlgorithmState::Sova(s) => {
                s.set_y(grad.iter().map(|v| -v).collect());
                for link in s.links_mut() {
                    link.copy = link.shared.iter().map(|&c| x_star[c]).collect();
                }
            }
        }
        Ok(state)
    }
}

/// Static information a robot receives before round 0.
#[derive(Debug, Clone)]
pub struct InitCtx<'a> {
    pub robot: usize,
    pub num_robots: usize,
    /// Neighbors at round 0, ascending.
    pub neighbors: &'a [usize],
    /// SOVA selection maps: one link per neighbor with the local indices
    /// shared with it.
    pub links: Vec<SovaLink>,
}

impl<'a> InitCtx<'a> {
    /// Context for robot `robot` of `problem` with the given neighbors;
    /// SOVA links follow the problem's partition (identity when absent).
    pub fn new(problem: &SeparableProblem, robot: usize, neighbors: &'a [usize]) -> Self {
        let links = neighbors
            .iter()
            .map(|&j| {
                let shared = match problem.partition() {
                    Some(l) => l.shared(robot, j).into_iter().map(|(a, _)| a).collect(),
                    None => (0..problem.dim()).collect(),
                };
                SovaLink::new(j, shared)
            })
            .collect();
        Self {
            robot,
            num_robots: problem.num_robots(),
            neighbors,
            links,
        }
    }
}

/// DIGing step `1 / (2L)` with `L` the largest local gradient-Lipschitz
/// bound (spectral norm of the local Hessian for quadratics).
pub fn diging_default_step(problem: &SeparableProblem) -> f64 {
    let l = problem
        .robots()
        .iter()
        .map(|r| r.objective.lipschitz_bound())
        .fold(0.0_f64, f64::max);
    0.5 / l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decaying_step_shift() {
        assert_eq!(StepMode::Decaying.step(1.0, 3), 0.5);
        assert_eq!(StepMode::Decaying.step(1.0, 0), 1.0);
        assert_eq!(StepMode::Constant.step(0.3, 7), 0.3);
    }

    #[test]
    fn nonpositive_tau_rejected() {
        let mut p = AlgorithmParams::new(AlgorithmKind::Next);
        p.tau = 0.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter(_))));
    }
}
