use alloc::vec::Vec;

use super::{require_unconstrained, Channel, Inbox, Message, Method, Outbox, RoundCtx};
use crate::linalg::{axpy, Cholesky};
use crate::problems::LocalProblem;
use crate::{Error, Result};

/// Network Newton-K on the penalized problem
/// `min α sum_i f_i(x_i) + ½ xᵀ ((I − W) ⊗ I) x`, with `w̄ = I − W`.
///
/// Exchange 0 shares `x` and forms `D_i`, `g_i` and `d⁽⁰⁾ = −D_i⁻¹ g_i`.
/// Exchanges `1..=K` share `d` and apply
/// `d ← D_i⁻¹ (w̄_ii d − g_i − sum_{j≠i} w̄_ij d_j)`. After the last
/// exchange `x ← x + ε d`.
#[derive(Debug, Clone)]
pub struct NnkState {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub d: Vec<f64>,
    pub alpha: f64,
    pub epsilon: f64,
    pub k_inner: usize,
    factor: Option<Cholesky>,
}

impl NnkState {
    pub fn new(
        local: &LocalProblem,
        x0: Vec<f64>,
        alpha: f64,
        epsilon: f64,
        k_inner: usize,
    ) -> Result<Self> {
        require_unconstrained(local, "nnk")?;
        if !local.objective.has_hessian() {
            return Err(Error::Capability("nnk needs a Hessian oracle".into()));
        }
        let n = x0.len();
        Ok(Self {
            x: x0,
            g: alloc::vec![0.0; n],
            d: alloc::vec![0.0; n],
            alpha,
            epsilon,
            k_inner,
            factor: None,
        })
    }

    fn finish_if_last(&mut self, phase: usize) {
        if phase == self.k_inner {
            axpy(self.epsilon, &self.d, &mut self.x);
            self.factor = None;
        }
    }
}

impl Method for NnkState {
    fn exchanges_per_round(&self) -> usize {
        self.k_inner + 1
    }

    fn outbox(&self, phase: usize, _ctx: &RoundCtx<'_>) -> Outbox {
        let m = if phase == 0 {
            Message::new().with(Channel::Iterate, self.x.clone())
        } else {
            Message::new().with(Channel::Direction, self.d.clone())
        };
        Outbox::Broadcast(m)
    }

    fn absorb(
        &mut self,
        phase: usize,
        local: &LocalProblem,
        inbox: &Inbox<'_>,
        ctx: &RoundCtx<'_>,
    ) -> Result<()> {
        let wbar_ii = 1.0 - ctx.self_weight();
        if phase == 0 {
            let mut dmat = local
                .objective
                .hessian(&self.x)
                .ok_or_else(|| Error::Capability("nnk needs a Hessian oracle".into()))?;
            dmat.scale(self.alpha);
            dmat.add_to_diagonal(&alloc::vec![2.0 * wbar_ii; self.x.len()]);
            // g = α∇f + sum_{j ∈ N ∪ {i}} w̄_ij x_j = α∇f + x − sum_j w_ij x_j
            let mixed = inbox.mix(Channel::Iterate, ctx.weights, &self.x)?;
            let mut g = local.objective.gradient(&self.x);
            g.iter_mut().for_each(|v| *v *= self.alpha);
            axpy(1.0, &self.x, &mut g);
            axpy(-1.0, &mixed, &mut g);
            let factor = Cholesky::factor(&dmat)?;
            self.d = factor.solve(&g).iter().map(|v| -v).collect();
            self.g = g;
            self.factor = Some(factor);
        } else {
            // w̄_ij = −w_ij for j ≠ i
            let mut rhs: Vec<f64> = self.d.iter().map(|v| wbar_ii * v).collect();
            axpy(-1.0, &self.g, &mut rhs);
            for &(j, w) in ctx.weights {
                if j != ctx.robot {
                    axpy(
                        w,
                        inbox.payload(j, Channel::Direction, self.d.len())?,
                        &mut rhs,
                    );
                }
            }
            let factor = self
                .factor
                .as_ref()
                .ok_or_else(|| Error::Precondition("nnk inner round before exchange 0".into()))?;
            self.d = factor.solve(&rhs);
        }
        self.finish_if_last(phase);
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn components(&self) -> Vec<(&'static str, &[f64])> {
        alloc::vec![
            ("x", self.x.as_slice()),
            ("g", self.g.as_slice()),
            ("d", self.d.as_slice()),
        ]
    }
}
