//! Consensus ADMM and its variable-partitioned generalization SOVA.
//!
//! Both keep the latest copy of each neighbor's (shared) iterate, received
//! in an initial handshake and after every primal update. With `m_ij` the
//! midpoint of the own and neighbor values on the shared coordinates:
//!
//! `x ← argmin_X f_i(x) + xᵀy + ρ sum_j ‖Φ_ij x − m_ij‖²`, then
//! `y ← y + ρ sum_j Φ_ijᵀ (Φ_ij x⁺ − Φ_ji x_j⁺)`.
//!
//! C-ADMM is the case where every `Φ_ij` is the identity.

use alloc::vec::Vec;

use super::{solve_prox, Channel, Inbox, Message, Method, Outbox, RoundCtx};
use crate::problems::LocalProblem;
use crate::{Error, Result};

/// Agreement constraint with one neighbor: the local indices shared with
/// it (ordered by global coordinate) and the last received values there.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SovaLink {
    pub neighbor: usize,
    pub shared: Vec<usize>,
    pub copy: Vec<f64>,
}

impl SovaLink {
    pub fn new(neighbor: usize, shared: Vec<usize>) -> Self {
        Self {
            neighbor,
            copy: alloc::vec![0.0; shared.len()],
            shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct AdmmCore {
    x: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
    links: Vec<SovaLink>,
}

impl AdmmCore {
    fn new(x0: Vec<f64>, rho: f64, links: Vec<SovaLink>) -> Result<Self> {
        for l in &links {
            if let Some(&c) = l.shared.iter().find(|&&c| c >= x0.len()) {
                return Err(Error::Config(alloc::format!(
                    "selection map towards robot {} references local index {c} of {}",
                    l.neighbor,
                    x0.len()
                )));
            }
        }
        Ok(Self {
            y: alloc::vec![0.0; x0.len()],
            x: x0,
            rho,
            links,
        })
    }

    fn send(&self) -> Outbox {
        Outbox::PerNeighbor(
            self.links
                .iter()
                .map(|l| {
                    let part = l.shared.iter().map(|&c| self.x[c]).collect();
                    (l.neighbor, Message::new().with(Channel::Iterate, part))
                })
                .collect(),
        )
    }

    fn receive(&mut self, inbox: &Inbox<'_>) -> Result<()> {
        for l in &mut self.links {
            let v = inbox
                .payload(l.neighbor, Channel::Iterate, l.shared.len())
                .map_err(|e| match e {
                    Error::Dimension { expected, found } => Error::Config(alloc::format!(
                        "neighbor {} shares {found} coordinates, expected {expected}",
                        l.neighbor
                    )),
                    other => other,
                })?;
            l.copy.copy_from_slice(v);
        }
        Ok(())
    }

    /// `(μ, pull)` of the primal subproblem in the shared prox form.
    fn primal_terms(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.x.len();
        let mut mu = alloc::vec![0.0; n];
        let mut pull = alloc::vec![0.0; n];
        for l in &self.links {
            for (t, &c) in l.shared.iter().enumerate() {
                mu[c] += 2.0 * self.rho;
                pull[c] += 2.0 * self.rho * (0.5 * (self.x[c] + l.copy[t]));
            }
        }
        for (p, y) in pull.iter_mut().zip(&self.y) {
            *p -= y;
        }
        (mu, pull)
    }

    fn primal(&mut self, local: &LocalProblem) -> Result<()> {
        let (mu, pull) = self.primal_terms();
        self.x = solve_prox(&local.objective, &local.set, &mu, &pull, &self.x)?;
        Ok(())
    }

    fn dual(&mut self) {
        for l in &self.links {
            for (t, &c) in l.shared.iter().enumerate() {
                self.y[c] += self.rho * (self.x[c] - l.copy[t]);
            }
        }
    }
}

macro_rules! admm_method {
    ($ty:ident, $send:expr) => {
        impl Method for $ty {
            fn needs_handshake(&self) -> bool {
                true
            }

            fn handshake_outbox(&self) -> Outbox {
                $send(&self.core)
            }

            fn absorb_handshake(&mut self, inbox: &Inbox<'_>, _ctx: &RoundCtx<'_>) -> Result<()> {
                self.core.receive(inbox)
            }

            fn compute(
                &mut self,
                _phase: usize,
                local: &LocalProblem,
                _ctx: &RoundCtx<'_>,
            ) -> Result<()> {
                self.core.primal(local)
            }

            fn outbox(&self, _phase: usize, _ctx: &RoundCtx<'_>) -> Outbox {
                $send(&self.core)
            }

            fn absorb(
                &mut self,
                _phase: usize,
                _local: &LocalProblem,
                inbox: &Inbox<'_>,
                _ctx: &RoundCtx<'_>,
            ) -> Result<()> {
                self.core.receive(inbox)?;
                self.core.dual();
                Ok(())
            }

            fn iterate(&self) -> &[f64] {
                &self.core.x
            }

            fn components(&self) -> Vec<(&'static str, &[f64])> {
                let mut out =
                    alloc::vec![("x", self.core.x.as_slice()), ("y", self.core.y.as_slice())];
                out.extend(
                    self.core
                        .links
                        .iter()
                        .map(|l| ("neighbor_copy", l.copy.as_slice())),
                );
                out
            }
        }
    };
}

/// Consensus ADMM. Broadcasts the full iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct CadmmState {
    core: AdmmCore,
}

impl CadmmState {
    pub fn new(x0: Vec<f64>, rho: f64, neighbors: &[usize]) -> Self {
        let n = x0.len();
        let links = neighbors
            .iter()
            .map(|&j| SovaLink::new(j, (0..n).collect()))
            .collect();
        Self {
            core: AdmmCore::new(x0, rho, links).expect("identity maps are in range"),
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.core.x
    }

    pub fn y(&self) -> &[f64] {
        &self.core.y
    }

    pub fn set_y(&mut self, y: Vec<f64>) {
        self.core.y = y;
    }

    pub fn links_mut(&mut self) -> &mut [SovaLink] {
        &mut self.core.links
    }
}

fn broadcast(core: &AdmmCore) -> Outbox {
    Outbox::Broadcast(Message::new().with(Channel::Iterate, core.x.clone()))
}

admm_method!(CadmmState, broadcast);

/// SOVA: each robot holds only its own coordinates and sends each neighbor
/// just the shared ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SovaState {
    core: AdmmCore,
}

impl SovaState {
    pub fn new(x0: Vec<f64>, rho: f64, links: Vec<SovaLink>) -> Result<Self> {
        Ok(Self {
            core: AdmmCore::new(x0, rho, links)?,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.core.x
    }

    pub fn y(&self) -> &[f64] {
        &self.core.y
    }

    pub fn set_y(&mut self, y: Vec<f64>) {
        self.core.y = y;
    }

    pub fn links(&self) -> &[SovaLink] {
        &self.core.links
    }

    pub fn links_mut(&mut self) -> &mut [SovaLink] {
        &mut self.core.links
    }
}

admm_method!(SovaState, AdmmCore::send);
