use alloc::vec::Vec;

use super::{solve_prox, Channel, Inbox, Message, Method, Outbox, RoundCtx};
use crate::linalg::axpy;
use crate::problems::LocalProblem;
use crate::Result;

/// NEXT with the proximal surrogate
/// `U(x; x_i, π̃) = f_i(x) + π̃ᵀ(x − x_i) + (τ/2)‖x − x_i‖²`.
///
/// Per round: `x̃ = argmin_X U`, `v = x + α_k (x̃ − x)` with
/// `α_k = α₀/(k+1)`; share `v` and `y`; then `x ← sum_j w_ij v_j`,
/// `y ← sum_j w_ij y_j + ∇f_i(x⁺) − ∇f_i(x)`, `π̃ ← N y − ∇f_i(x⁺)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NextState {
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    /// Local combination `v` that neighbors mix.
    pub v: Vec<f64>,
    pub y: Vec<f64>,
    pub grad: Vec<f64>,
    pub pi: Vec<f64>,
    pub alpha0: f64,
    pub tau: f64,
    pub num_robots: usize,
    pub k: usize,
}

impl NextState {
    pub fn new(
        local: &LocalProblem,
        x0: Vec<f64>,
        alpha0: f64,
        tau: f64,
        num_robots: usize,
    ) -> Self {
        let grad = local.objective.gradient(&x0);
        let y = grad.clone();
        let pi = y
            .iter()
            .zip(&grad)
            .map(|(y, g)| num_robots as f64 * y - g)
            .collect();
        Self {
            x_tilde: x0.clone(),
            v: x0.clone(),
            x: x0,
            y,
            grad,
            pi,
            alpha0,
            tau,
            num_robots,
            k: 0,
        }
    }

    pub fn step(&self) -> f64 {
        self.alpha0 / (self.k + 1) as f64
    }

    /// Regularization weights and linear pull of the surrogate subproblem.
    pub fn surrogate_terms(&self) -> (Vec<f64>, Vec<f64>) {
        let mu = alloc::vec![self.tau; self.x.len()];
        let pull = self
            .x
            .iter()
            .zip(&self.pi)
            .map(|(x, p)| self.tau * x - p)
            .collect();
        (mu, pull)
    }
}

impl Method for NextState {
    fn compute(&mut self, _phase: usize, local: &LocalProblem, _ctx: &RoundCtx<'_>) -> Result<()> {
        let (mu, pull) = self.surrogate_terms();
        self.x_tilde = solve_prox(&local.objective, &local.set, &mu, &pull, &self.x)?;
        let a = self.step();
        let mut v = self.x.clone();
        for (vc, (xt, x)) in v.iter_mut().zip(self.x_tilde.iter().zip(&self.x)) {
            *vc += a * (xt - x);
        }
        self.v = v;
        Ok(())
    }

    fn outbox(&self, _phase: usize, _ctx: &RoundCtx<'_>) -> Outbox {
        Outbox::Broadcast(
            Message::new()
                .with(Channel::Iterate, self.v.clone())
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
        let x = inbox.mix(Channel::Iterate, ctx.weights, &self.v)?;
        let mut y = inbox.mix(Channel::Tracker, ctx.weights, &self.y)?;
        let grad = local.objective.gradient(&x);
        axpy(1.0, &grad, &mut y);
        axpy(-1.0, &self.grad, &mut y);
        self.pi = y
            .iter()
            .zip(&grad)
            .map(|(y, g)| self.num_robots as f64 * y - g)
            .collect();
        self.x = x;
        self.y = y;
        self.grad = grad;
        self.k += 1;
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn components(&self) -> Vec<(&'static str, &[f64])> {
        alloc::vec![
            ("x", self.x.as_slice()),
            ("y", self.y.as_slice()),
            ("pi", self.pi.as_slice()),
        ]
    }
}
