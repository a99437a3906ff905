use alloc::vec::Vec;

use rand::seq::index;

use super::{Channel, Inbox, Message, Method, Outbox, RoundCtx, StepMode};
use crate::linalg::axpy;
use crate::problems::LocalProblem;
use crate::rng::{rng_from_seed, Rng};
use crate::{Error, Result};

/// Decentralized gradient descent:
/// `x ← sum_j w_ij x_j − α_k ∇f_i(x_i)`, projected onto `X_i` when the
/// local set is constrained.
#[derive(Debug, Clone, PartialEq)]
pub struct DgdState {
    pub x: Vec<f64>,
    pub alpha0: f64,
    pub step_mode: StepMode,
    pub k: usize,
}

impl DgdState {
    pub fn new(_local: &LocalProblem, x0: Vec<f64>, alpha0: f64, step_mode: StepMode) -> Self {
        Self {
            x: x0,
            alpha0,
            step_mode,
            k: 0,
        }
    }

    fn advance(
        &mut self,
        local: &LocalProblem,
        inbox: &Inbox<'_>,
        ctx: &RoundCtx<'_>,
        grad: &[f64],
    ) -> Result<()> {
        let mut next = inbox.mix(Channel::Iterate, ctx.weights, &self.x)?;
        axpy(-self.step_mode.step(self.alpha0, self.k), grad, &mut next);
        self.x = if local.set.is_unconstrained() {
            next
        } else {
            local.set.project(&next)
        };
        self.k += 1;
        Ok(())
    }
}

impl Method for DgdState {
    fn outbox(&self, _phase: usize, _ctx: &RoundCtx<'_>) -> Outbox {
        Outbox::Broadcast(Message::new().with(Channel::Iterate, self.x.clone()))
    }

    fn absorb(
        &mut self,
        _phase: usize,
        local: &LocalProblem,
        inbox: &Inbox<'_>,
        ctx: &RoundCtx<'_>,
    ) -> Result<()> {
        let g = local.objective.gradient(&self.x);
        self.advance(local, inbox, ctx, &g)
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn components(&self) -> Vec<(&'static str, &[f64])> {
        alloc::vec![("x", self.x.as_slice())]
    }
}

/// DGD with minibatch gradients over the robot's measurement rows.
#[derive(Debug, Clone)]
pub struct DsgdState {
    pub inner: DgdState,
    pub minibatch: usize,
    rng: Rng,
}

impl DsgdState {
    pub fn new(
        local: &LocalProblem,
        x0: Vec<f64>,
        alpha0: f64,
        step_mode: StepMode,
        minibatch: usize,
        seed: u64,
    ) -> Result<Self> {
        if local.objective.sample_count().is_none() {
            return Err(Error::Capability(
                "dsgd needs a sampled-gradient oracle (least-squares data)".into(),
            ));
        }
        Ok(Self {
            inner: DgdState::new(local, x0, alpha0, step_mode),
            minibatch,
            rng: rng_from_seed(seed),
        })
    }

    /// Indices of the next minibatch, ascending. A batch at least as large
    /// as the dataset is the whole dataset and consumes no randomness.
    fn sample_batch(&mut self, rows: usize) -> Vec<usize> {
        if self.minibatch >= rows {
            return (0..rows).collect();
        }
        let mut b = index::sample(&mut self.rng, rows, self.minibatch).into_vec();
        b.sort_unstable();
        b
    }
}

impl Method for DsgdState {
    fn outbox(&self, phase: usize, ctx: &RoundCtx<'_>) -> Outbox {
        self.inner.outbox(phase, ctx)
    }

    fn absorb(
        &mut self,
        _phase: usize,
        local: &LocalProblem,
        inbox: &Inbox<'_>,
        ctx: &RoundCtx<'_>,
    ) -> Result<()> {
        let rows = local.objective.sample_count().unwrap_or(0);
        let batch = self.sample_batch(rows);
        let g = local.objective.sampled_gradient(&self.inner.x, &batch)?;
        self.inner.advance(local, inbox, ctx, &g)
    }

    fn iterate(&self) -> &[f64] {
        &self.inner.x
    }

    fn components(&self) -> Vec<(&'static str, &[f64])> {
        self.inner.components()
    }
}
