use alloc::vec::Vec;

use super::{require_unconstrained, Channel, Inbox, Message, Method, Outbox, RoundCtx};
use crate::linalg::axpy;
use crate::problems::LocalProblem;
use crate::Result;

/// Gradient tracking:
/// `x ← sum_j w_ij x_j − α y`, `y ← sum_j w_ij y_j + ∇f_i(x⁺) − ∇f_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DigingState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `∇f_i(x)` at the current iterate.
    pub grad: Vec<f64>,
    pub alpha: f64,
}

impl DigingState {
    pub fn new(local: &LocalProblem, x0: Vec<f64>, alpha: f64) -> Result<Self> {
        require_unconstrained(local, "diging")?;
        let grad = local.objective.gradient(&x0);
        Ok(Self {
            y: grad.clone(),
            grad,
            x: x0,
            alpha,
        })
    }
}

impl Method for DigingState {
    fn outbox(&self, _phase: usize, _ctx: &RoundCtx<'_>) -> Outbox {
        Outbox::Broadcast(
            Message::new()
                .with(Channel::Iterate, self.x.clone())
                .with(Channel::Tracker, self.y.clone()),
        )
    }

    fn absorb(
        &mut self,
        _phase: usize,
        local: &LocalProblem,
        inbox: &Inbox<'_>,
        ctx: &RoundCtx<'_>,
    ) -> Result<()> {
        let mut x = inbox.mix(Channel::Iterate, ctx.weights, &self.x)?;
        axpy(-self.alpha, &self.y, &mut x);
        let mut y = inbox.mix(Channel::Tracker, ctx.weights, &self.y)?;
        let grad = local.objective.gradient(&x);
        axpy(1.0, &grad, &mut y);
        axpy(-1.0, &self.grad, &mut y);
        self.x = x;
        self.y = y;
        self.grad = grad;
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn components(&self) -> Vec<(&'static str, &[f64])> {
        alloc::vec![("x", self.x.as_slice()), ("y", self.y.as_slice())]
    }
}
