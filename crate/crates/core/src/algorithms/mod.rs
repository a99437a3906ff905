//! Per-robot state machines behind one round interface.
//!
//! A global round consists of one or more exchanges. For every exchange
//! `phase` the executor calls, on each robot,
//!
//! 1. [`Method::compute`]: purely local work before sending,
//! 2. [`Method::outbox`]: the message(s) to send (read-only),
//! 3. [`Method::absorb`]: the update from the inbox of neighbor messages.
//!
//! Every hook sees only the robot's own state, its own [`LocalProblem`] and
//! its [`RoundCtx`]; there is no path to another robot's data.

mod admm;
mod dda;
mod dgd;
mod diging;
mod next;
mod nnk;
mod params;
mod subproblem;

pub use admm::{CadmmState, SovaLink, SovaState};
pub use dda::DdaState;
pub use dgd::{DgdState, DsgdState};
pub use diging::DigingState;
pub use next::NextState;
pub use nnk::NnkState;
pub use params::{
    diging_default_step, AlgorithmKind, AlgorithmParams, DualInit, InitCtx, StepMode,
};
pub use subproblem::{prox_residual, solve_prox, SUBPROBLEM_TOLERANCE};

use alloc::vec::Vec;

use crate::problems::LocalProblem;
use crate::{Error, Result};

/// Role of a payload inside a [`Message`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Channel {
    /// Primal iterate, or the locally combined point that is mixed next.
    Iterate,
    /// Gradient tracker `y`.
    Tracker,
    /// Dual-averaging accumulator `z`.
    DualAverage,
    /// Newton direction `d` during inner rounds.
    Direction,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Iterate => "iterate",
            Self::Tracker => "tracker",
            Self::DualAverage => "dual_average",
            Self::Direction => "direction",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Message {
    parts: Vec<(Channel, Vec<f64>)>,
}

impl Message {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, channel: Channel, payload: Vec<f64>) -> Self {
        self.parts.push((channel, payload));
        self
    }

    pub fn get(&self, channel: Channel) -> Option<&[f64]> {
        self.parts
            .iter()
            .find(|(c, _)| *c == channel)
            .map(|(_, v)| v.as_slice())
    }

    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        self.parts.iter().map(|(c, _)| *c)
    }

    /// Scalars carried by one delivery.
    pub fn scalar_count(&self) -> usize {
        self.parts.iter().map(|(_, v)| v.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outbox {
    /// Same message to every out-neighbor.
    Broadcast(Message),
    /// One message per out-neighbor, ascending by recipient.
    PerNeighbor(Vec<(usize, Message)>),
}

impl Outbox {
    /// The message addressed to `to`, if any.
    pub fn for_recipient(&self, to: usize) -> Option<&Message> {
        match self {
            Self::Broadcast(m) => Some(m),
            Self::PerNeighbor(list) => list.iter().find(|(j, _)| *j == to).map(|(_, m)| m),
        }
    }
}

/// Messages delivered to one robot in one exchange, keyed by sender.
#[derive(Debug, Clone)]
pub struct Inbox<'a> {
    robot: usize,
    entries: Vec<(usize, &'a Message)>,
}

impl<'a> Inbox<'a> {
    /// Checks that the senders are exactly `neighbors` (ascending).
    pub fn new(
        robot: usize,
        neighbors: &[usize],
        mut entries: Vec<(usize, &'a Message)>,
    ) -> Result<Self> {
        entries.sort_by_key(|(j, _)| *j);
        for &j in neighbors {
            if entries.binary_search_by_key(&j, |(k, _)| *k).is_err() {
                return Err(Error::Synchronization { robot, neighbor: j });
            }
        }
        if let Some(&(from, _)) = entries
            .iter()
            .find(|(j, _)| neighbors.binary_search(j).is_err())
        {
            return Err(Error::UnexpectedSender { robot, from });
        }
        Ok(Self { robot, entries })
    }

    pub fn senders(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(j, _)| *j)
    }

    /// Payload on `channel` from `from`, with length `dim`.
    pub fn payload(&self, from: usize, channel: Channel, dim: usize) -> Result<&'a [f64]> {
        let (_, m) =
            self.entries
                .iter()
                .find(|(j, _)| *j == from)
                .ok_or(Error::Synchronization {
                    robot: self.robot,
                    neighbor: from,
                })?;
        let v = m.get(channel).ok_or(Error::Protocol {
            robot: self.robot,
            from,
            channel: channel.name(),
        })?;
        if v.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: v.len(),
            });
        }
        Ok(v)
    }

    /// `sum_j w_ij v_j` over the weight row, using `own` for `j = i`.
    pub fn mix(&self, channel: Channel, weights: &[(usize, f64)], own: &[f64]) -> Result<Vec<f64>> {
        let mut out = alloc::vec![0.0; own.len()];
        for &(j, w) in weights {
            let v = if j == self.robot {
                own
            } else {
                self.payload(j, channel, own.len())?
            };
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        Ok(out)
    }
}

/// What a robot knows about the current round.
#[derive(Debug, Clone, Copy)]
pub struct RoundCtx<'a> {
    /// Number of completed global rounds.
    pub round: usize,
    pub robot: usize,
    pub num_robots: usize,
    /// Row `i` of the mixing matrix, including the self weight.
    pub weights: &'a [(usize, f64)],
    /// Current neighbors, ascending, excluding the robot itself.
    pub neighbors: &'a [usize],
}

impl RoundCtx<'_> {
    pub fn self_weight(&self) -> f64 {
        self.weights
            .iter()
            .find(|(j, _)| *j == self.robot)
            .map_or(0.0, |(_, w)| *w)
    }
}

/// Uniform round interface. `phase` runs over
/// `0..exchanges_per_round()`.
pub trait Method {
    fn exchanges_per_round(&self) -> usize {
        1
    }

    /// Whether an initial exchange of `x⁽⁰⁾` precedes round 0.
    fn needs_handshake(&self) -> bool {
        false
    }

    fn handshake_outbox(&self) -> Outbox {
        Outbox::Broadcast(Message::new())
    }

    fn absorb_handshake(&mut self, _inbox: &Inbox<'_>, _ctx: &RoundCtx<'_>) -> Result<()> {
        Ok(())
    }

    fn compute(&mut self, _phase: usize, _local: &LocalProblem, _ctx: &RoundCtx<'_>) -> Result<()> {
        Ok(())
    }

    fn outbox(&self, phase: usize, ctx: &RoundCtx<'_>) -> Outbox;

    fn absorb(
        &mut self,
        phase: usize,
        local: &LocalProblem,
        inbox: &Inbox<'_>,
        ctx: &RoundCtx<'_>,
    ) -> Result<()>;

    /// Current primal iterate in local coordinates.
    fn iterate(&self) -> &[f64];

    /// Every vector-valued state component, by name.
    fn components(&self) -> Vec<(&'static str, &[f64])>;
}

/// One variant per method.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum AlgorithmState {
    Dgd(DgdState),
    Dsgd(DsgdState),
    Diging(DigingState),
    Dda(DdaState),
    Nnk(NnkState),
    Next(NextState),
    Cadmm(CadmmState),
    Sova(SovaState),
}

macro_rules! dispatch {
    ($self:expr, $s:ident => $e:expr) => {
        match $self {
            AlgorithmState::Dgd($s) => $e,
            AlgorithmState::Dsgd($s) => $e,
            AlgorithmState::Diging($s) => $e,
            AlgorithmState::Dda($s) => $e,
            AlgorithmState::Nnk($s) => $e,
            AlgorithmState::Next($s) => $e,
            AlgorithmState::Cadmm($s) => $e,
            AlgorithmState::Sova($s) => $e,
        }
    };
}

impl AlgorithmState {
    pub fn kind(&self) -> AlgorithmKind {
        match self {
            Self::Dgd(_) => AlgorithmKind::Dgd,
            Self::Dsgd(_) => AlgorithmKind::Dsgd,
            Self::Diging(_) => AlgorithmKind::Diging,
            Self::Dda(_) => AlgorithmKind::Dda,
            Self::Nnk(_) => AlgorithmKind::Nnk,
            Self::Next(_) => AlgorithmKind::Next,
            Self::Cadmm(_) => AlgorithmKind::Cadmm,
            Self::Sova(_) => AlgorithmKind::Sova,
        }
    }
}

impl Method for AlgorithmState {
    fn exchanges_per_round(&self) -> usize {
        dispatch!(self, s => s.exchanges_per_round())
    }

    fn needs_handshake(&self) -> bool {
        dispatch!(self, s => s.needs_handshake())
    }

    fn handshake_outbox(&self) -> Outbox {
        dispatch!(self, s => s.handshake_outbox())
    }

    fn absorb_handshake(&mut self, inbox: &Inbox<'_>, ctx: &RoundCtx<'_>) -> Result<()> {
        dispatch!(self, s => s.absorb_handshake(inbox, ctx))
    }

    fn compute(&mut self, phase: usize, local: &LocalProblem, ctx: &RoundCtx<'_>) -> Result<()> {
        dispatch!(self, s => s.compute(phase, local, ctx))
    }

    fn outbox(&self, phase: usize, ctx: &RoundCtx<'_>) -> Outbox {
        dispatch!(self, s => s.outbox(phase, ctx))
    }

    fn absorb(
        &mut self,
        phase: usize,
        local: &LocalProblem,
        inbox: &Inbox<'_>,
        ctx: &RoundCtx<'_>,
    ) -> Result<()> {
        dispatch!(self, s => s.absorb(phase, local, inbox, ctx))
    }

    fn iterate(&self) -> &[f64] {
        dispatch!(self, s => s.iterate())
    }

    fn components(&self) -> Vec<(&'static str, &[f64])> {
        dispatch!(self, s => s.components())
    }
}

pub(crate) fn check_len(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: v.len(),
        });
    }
    Ok(())
}

pub(crate) fn require_unconstrained(local: &LocalProblem, method: &str) -> Result<()> {
    if !local.set.is_unconstrained() {
        return Err(Error::Capability(alloc::format!(
            "{method} does not support constrained local sets"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn inbox_rejects_missing_neighbor() {
        let m = Message::new().with(Channel::Iterate, vec![1.0]);
        let err = Inbox::new(0, &[1, 2], vec![(1, &m)]).unwrap_err();
        assert!(matches!(
            err,
            Error::Synchronization {
                robot: 0,
                neighbor: 2
            }
        ));
    }

    #[test]
    fn inbox_rejects_stranger() {
        let m = Message::new().with(Channel::Iterate, vec![1.0]);
        let err = Inbox::new(0, &[1], vec![(1, &m), (3, &m)]).unwrap_err();
        assert!(matches!(err, Error::UnexpectedSender { robot: 0, from: 3 }));
    }

    #[test]
    fn missing_channel_is_protocol_error() {
        let m = Message::new().with(Channel::Iterate, vec![1.0]);
        let inbox = Inbox::new(0, &[1], vec![(1, &m)]).unwrap();
        let err = inbox.payload(1, Channel::Tracker, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::Protocol {
                robot: 0,
                from: 1,
                channel: "tracker"
            }
        ));
    }

    #[test]
    fn mix_uses_own_value_for_self_weight() {
        let m = Message::new().with(Channel::Iterate, vec![2.0]);
        let inbox = Inbox::new(0, &[1], vec![(1, &m)]).unwrap();
        let mixed = inbox
            .mix(Channel::Iterate, &[(0, 0.5), (1, 0.5)], &[0.0])
            .unwrap();
        assert_eq!(mixed, vec![1.0]);
    }

    #[test]
    fn scalar_count_sums_payloads() {
        let m = Message::new()
            .with(Channel::Iterate, vec![1.0, 2.0])
            .with(Channel::Tracker, vec![3.0, 4.0]);
        assert_eq!(m.scalar_count(), 4);
    }
}
