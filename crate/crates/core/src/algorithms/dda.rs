use alloc::vec::Vec;

use super::{Channel, DualInit, Inbox, Message, Method, Outbox, RoundCtx, StepMode};
use crate::linalg::axpy;
use crate::problems::LocalProblem;
use crate::Result;

/// Distributed dual averaging with `φ(x) = ½‖x‖²`:
/// `z ← sum_j w_ij z_j + ∇f_i(x)`, `x ← Proj_X(−α_k z)`.
///
/// Only `z` is communicated.
#[derive(Debug, Clone, PartialEq)]
pub struct DdaState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub alpha0: f64,
    pub step_mode: StepMode,
    pub k: usize,
}

impl DdaState {
    pub fn new(
        _local: &LocalProblem,
        x0: Vec<f64>,
        alpha0: f64,
        step_mode: StepMode,
        init: DualInit,
    ) -> Self {
        let z = match init {
            DualInit::Iterate => x0.clone(),
            DualInit::Zero => alloc::vec![0.0; x0.len()],
        };
        Self {
            x: x0,
            z,
            alpha0,
            step_mode,
            k: 0,
        }
    }
}

impl Method for DdaState {
    fn outbox(&self, _phase: usize, _ctx: &RoundCtx<'_>) -> Outbox {
        Outbox::Broadcast(Message::new().with(Channel::DualAverage, self.z.clone()))
    }

    fn absorb(
        &mut self,
        _phase: usize,
        local: &LocalProblem,
        inbox: &Inbox<'_>,
        ctx: &RoundCtx<'_>,
    ) -> Result<()> {
        let mut z = inbox.mix(Channel::DualAverage, ctx.weights, &self.z)?;
        axpy(1.0, &local.objective.gradient(&self.x), &mut z);
        let a = self.step_mode.step(self.alpha0, self.k);
        let unconstrained: Vec<f64> = z.iter().map(|v| -a * v).collect();
        self.x = local.set.project(&unconstrained);
        self.z = z;
        self.k += 1;
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn components(&self) -> Vec<(&'static str, &[f64])> {
        alloc::vec![("x", self.x.as_slice()), ("z", self.z.as_slice())]
    }
}
