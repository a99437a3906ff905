//! Communication graphs `G(t) = (V, E(t))`, static or time-varying.
//!
//! Robots are indexed `0..num_robots`. Undirected edges are stored once as
//! `(lo, hi)`; directed edges as `(sender, receiver)`. Self-loops are never
//! stored: self-weights belong to the mixing matrix.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};

pub type Edge = (usize, usize);

/// Retries allowed when sampling a connected random graph.
pub const RANDOM_GRAPH_RETRIES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
enum Schedule {
    Static(Vec<Edge>),
    /// Round `t` uses entry `t % len`; an empty list means no edges ever.
    Periodic(Vec<Vec<Edge>>),
    /// Independent per-edge drops, full edge set every `window`-th round.
    Dropout {
        base: Vec<Edge>,
        drop_prob: f64,
        window: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// Connected (undirected) or strongly connected (directed).
    Connected,
    /// Directed graph whose underlying undirected graph is connected.
    WeaklyConnected,
    Disconnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GraphKind {
    Path,
    Ring,
    Complete,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    num_robots: usize,
    directed: bool,
    schedule: Schedule,
}

/// Neighbor lists of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    /// `in_neighbors[i]`: robots that send to `i`, ascending.
    pub in_neighbors: Vec<Vec<usize>>,
    /// `out_neighbors[i]`: robots that receive from `i`, ascending.
    pub out_neighbors: Vec<Vec<usize>>,
}

fn normalize(num_robots: usize, directed: bool, edges: &[Edge]) -> Result<Vec<Edge>> {
    let mut out = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        for idx in [a, b] {
            if idx >= num_robots {
                return Err(Error::RobotIndex {
                    index: idx,
                    num_robots,
                });
            }
        }
        if a == b {
            return Err(Error::InvalidParameter(alloc::format!(
                "self-loop on robot {a}"
            )));
        }
        out.push(if directed || a < b { (a, b) } else { (b, a) });
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

impl CommGraph {
    pub fn undirected(num_robots: usize, edges: &[Edge]) -> Result<Self> {
        Self::with_schedule(num_robots, false, edges)
    }

    pub fn directed(num_robots: usize, edges: &[Edge]) -> Result<Self> {
        Self::with_schedule(num_robots, true, edges)
    }

    fn with_schedule(num_robots: usize, directed: bool, edges: &[Edge]) -> Result<Self> {
        if num_robots == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one robot".into(),
            ));
        }
        Ok(Self {
            num_robots,
            directed,
            schedule: Schedule::Static(normalize(num_robots, directed, edges)?),
        })
    }

    /// Time-varying graph cycling through `rounds`.
    pub fn periodic(num_robots: usize, directed: bool, rounds: &[Vec<Edge>]) -> Result<Self> {
        if num_robots == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one robot".into(),
            ));
        }
        let rounds = rounds
            .iter()
            .map(|e| normalize(num_robots, directed, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            num_robots,
            directed,
            schedule: Schedule::Periodic(rounds),
        })
    }

    pub fn num_robots(&self) -> usize {
        self.num_robots
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn is_static(&self) -> bool {
        matches!(self.schedule, Schedule::Static(_))
    }

    /// Edge set active at round `t`.
    pub fn edges_at(&self, t: usize) -> Vec<Edge> {
        match &self.schedule {
            Schedule::Static(e) => e.clone(),
            Schedule::Periodic(rounds) if rounds.is_empty() => Vec::new(),
            Schedule::Periodic(rounds) => rounds[t % rounds.len()].clone(),
            Schedule::Dropout {
                base,
                drop_prob,
                window,
                seed,
            } => {
                if t.is_multiple_of(*window) {
                    return base.clone();
                }
                let mut rng = rng_from_seed(derive_seed(*seed, t as u64));
                base.iter()
                    .copied()
                    .filter(|_| rng.random::<f64>() >= *drop_prob)
                    .collect()
            }
        }
    }

    fn check_robot(&self, i: usize) -> Result<()> {
        if i >= self.num_robots {
            return Err(Error::RobotIndex {
                index: i,
                num_robots: self.num_robots,
            });
        }
        Ok(())
    }

    pub fn topology(&self, t: usize) -> Topology {
        topology_of(self.num_robots, self.directed, &self.edges_at(t))
    }

    /// `N_i(t)` for undirected graphs, in-neighbors `N_i^+(t)` for directed
    /// ones. Never contains `i`.
    pub fn neighbors(&self, i: usize, t: usize) -> Result<Vec<usize>> {
        self.check_robot(i)?;
        Ok(self.topology(t).in_neighbors.swap_remove(i))
    }

    /// Out-neighbors `N_i^-(t)`; equals [`neighbors`](Self::neighbors) when
    /// undirected.
    pub fn out_neighbors(&self, i: usize, t: usize) -> Result<Vec<usize>> {
        self.check_robot(i)?;
        Ok(self.topology(t).out_neighbors.swap_remove(i))
    }

    pub fn is_connected(&self, t: usize) -> Connectivity {
        connectivity(self.num_robots, self.directed, &self.edges_at(t))
    }

    /// Whether the union of the edge sets over rounds `t0..t0 + window` is
    /// connected (strongly, if directed).
    pub fn union_connected_over_window(&self, t0: usize, window: usize) -> Result<bool> {
        if window == 0 {
            return Err(Error::InvalidParameter("window length must be >= 1".into()));
        }
        let mut union: Vec<Edge> = (t0..t0 + window).flat_map(|t| self.edges_at(t)).collect();
        union.sort_unstable();
        union.dedup();
        Ok(connectivity(self.num_robots, self.directed, &union) == Connectivity::Connected)
    }

    /// Time-varying copy of a static connected graph where every round drops
    /// each edge independently with `drop_prob`, except rounds `t % window == 0`
    /// which keep every edge. Any `window` consecutive rounds therefore
    /// contain the full graph.
    pub fn dropout_schedule(&self, drop_prob: f64, window: usize, seed: u64) -> Result<Self> {
        let Schedule::Static(base) = &self.schedule else {
            return Err(Error::Precondition(
                "dropout needs a static base graph".into(),
            ));
        };
        if !(0.0..1.0).contains(&drop_prob) {
            return Err(Error::InvalidParameter(alloc::format!(
                "drop probability {drop_prob} outside [0, 1)"
            )));
        }
        if window == 0 {
            return Err(Error::InvalidParameter(
                "dropout window must be >= 1".into(),
            ));
        }
        if self.is_connected(0) != Connectivity::Connected {
            return Err(Error::Precondition(
                "dropout base graph must be connected".into(),
            ));
        }
        Ok(Self {
            num_robots: self.num_robots,
            directed: self.directed,
            schedule: Schedule::Dropout {
                base: base.clone(),
                drop_prob,
                window,
                seed,
            },
        })
    }
}

fn topology_of(n: usize, directed: bool, edges: &[Edge]) -> Topology {
    let mut ins = vec![Vec::new(); n];
    let mut outs = vec![Vec::new(); n];
    for &(a, b) in edges {
        ins[b].push(a);
        outs[a].push(b);
        if !directed {
            ins[a].push(b);
            outs[b].push(a);
        }
    }
    for l in ins.iter_mut().chain(outs.iter_mut()) {
        l.sort_unstable();
        l.dedup();
    }
    Topology {
        in_neighbors: ins,
        out_neighbors: outs,
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

fn connectivity(n: usize, directed: bool, edges: &[Edge]) -> Connectivity {
    let topo = topology_of(n, directed, edges);
    if !directed {
        return if reaches_all(&topo.out_neighbors) {
            Connectivity::Connected
        } else {
            Connectivity::Disconnected
        };
    }
    if reaches_all(&topo.out_neighbors) && reaches_all(&topo.in_neighbors) {
        return Connectivity::Connected;
    }
    let undirected = topology_of(n, false, edges);
    if reaches_all(&undirected.out_neighbors) {
        Connectivity::WeaklyConnected
    } else {
        Connectivity::Disconnected
    }
}

/// Builds a static undirected graph. `edge_prob` and `seed` only matter for
/// [`GraphKind::Random`], which is resampled with seed offsets `seed + r`
/// until connected.
pub fn make_graph(kind: GraphKind, n: usize, edge_prob: f64, seed: u64) -> Result<CommGraph> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "graph needs at least one robot".into(),
        ));
    }
    let edges: Vec<Edge> = match kind {
        GraphKind::Path => (1..n).map(|i| (i - 1, i)).collect(),
        GraphKind::Ring => {
            let mut e: Vec<Edge> = (1..n).map(|i| (i - 1, i)).collect();
            if n > 2 {
                e.push((0, n - 1));
            }
            e
        }
        GraphKind::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        GraphKind::Random => {
            if !(0.0..=1.0).contains(&edge_prob) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "edge probability {edge_prob} outside [0, 1]"
                )));
            }
            for attempt in 0..RANDOM_GRAPH_RETRIES {
                let mut rng = rng_from_seed(seed.wrapping_add(attempt as u64));
                let mut e = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < edge_prob {
                            e.push((i, j));
                        }
                    }
                }
                if connectivity(n, false, &e) == Connectivity::Connected {
                    return CommGraph::undirected(n, &e);
                }
            }
            return Err(Error::RetryBudget {
                budget: RANDOM_GRAPH_RETRIES,
            });
        }
    };
    CommGraph::undirected(n, &edges)
}
