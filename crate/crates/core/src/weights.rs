//! Mixing matrices `W` aligned to the communication graph.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::CommGraph;
use crate::{Error, Result};

/// Absolute tolerance on row/column sums and symmetry.
pub const STOCHASTIC_TOL: f64 = 1e-10;

/// Sparse rows of `W`: for robot `i`, the pairs `(j, w_ij)` with
/// `j in N_i(t) ∪ {i}`, ascending in `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    round: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StochasticityReport {
    pub nonnegative: bool,
    pub row: bool,
    pub column: bool,
    pub doubly: bool,
    pub symmetric: bool,
}

impl MixingMatrix {
    /// Builds from dense rows, keeping the diagonal and every nonzero entry.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut sparse = Vec::with_capacity(n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: r.len(),
                });
            }
            sparse.push(
                r.iter()
                    .enumerate()
                    .filter(|&(j, w)| j == i || *w != 0.0)
                    .map(|(j, w)| (j, *w))
                    .collect(),
            );
        }
        Ok(Self {
            round: 0,
            rows: sparse,
        })
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// Round the matrix was built for.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(0.0, |(_, w)| *w)
    }

    pub fn self_weight(&self, i: usize) -> f64 {
        self.weight(i, i)
    }

    /// Entry of `W̄ = I - W`.
    pub fn complement_weight(&self, i: usize, j: usize) -> f64 {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - self.weight(i, j)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut d = vec![vec![0.0; n]; n];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, w) in r {
                d[i][j] = w;
            }
        }
        d
    }

    /// `W v` for one scalar per robot.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, w)| w * v[j]).sum())
            .collect()
    }

    /// `W^T v`
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, w) in r {
                out[j] += w * v[i];
            }
        }
        out
    }
}

/// Metropolis–Hastings weights `w_ij = 1 / (1 + max(d_i, d_j))` on edges and
/// `w_ii = 1 - sum_j w_ij`. Each robot needs only its neighbors' degrees.
pub fn metropolis_weights(g: &CommGraph, t: usize) -> Result<MixingMatrix> {
    if g.is_directed() {
        return Err(Error::UnsupportedTopology(
            "Metropolis weights need an undirected graph".into(),
        ));
    }
    let topo = g.topology(t);
    let degree: Vec<usize> = topo.in_neighbors.iter().map(Vec::len).collect();
    let rows = topo
        .in_neighbors
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let mut row: Vec<(usize, f64)> = nbrs
                .iter()
                .map(|&j| (j, 1.0 / (1 + degree[i].max(degree[j])) as f64))
                .collect();
            let off: f64 = row.iter().map(|(_, w)| w).sum();
            row.push((i, 1.0 - off));
            row.sort_unstable_by_key(|(j, _)| *j);
            row
        })
        .collect();
    Ok(MixingMatrix { round: t, rows })
}

pub fn check_stochasticity(w: &MixingMatrix) -> StochasticityReport {
    let n = w.size();
    let dense = w.to_dense();
    let nonnegative = dense.iter().flatten().all(|&v| v >= 0.0);
    let row = dense
        .iter()
        .all(|r| libm::fabs(r.iter().sum::<f64>() - 1.0) <= STOCHASTIC_TOL);
    let column = (0..n).all(|j| {
        let s: f64 = dense.iter().map(|r| r[j]).sum();
        libm::fabs(s - 1.0) <= STOCHASTIC_TOL
    });
    let symmetric =
        (0..n).all(|i| (0..i).all(|j| libm::fabs(dense[i][j] - dense[j][i]) <= STOCHASTIC_TOL));
    StochasticityReport {
        nonnegative,
        row,
        column,
        doubly: row && column,
        symmetric,
    }
}

/// Second-largest singular value `σ₂(W)`: the contraction factor of
/// consensus on the subspace orthogonal to the all-ones vector.
///
/// Power iteration on `WᵀW` deflated against `1`, to relative tolerance 1e-8.
pub fn consensus_contraction(w: &MixingMatrix) -> Result<f64> {
    let report = check_stochasticity(w);
    if !(report.doubly && report.nonnegative) {
        return Err(Error::Precondition(
            "consensus contraction needs a doubly stochastic matrix".into(),
        ));
    }
    let n = w.size();
    let deflate = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    let mut v: Vec<f64> = (0..n)
        .map(|i| libm::sin(1.0 + 2.3 * i as f64) + 0.01 * i as f64)
        .collect();
    deflate(&mut v);
    let mut nv = crate::linalg::norm(&v);
    if nv < 1e-300 {
        return Ok(0.0);
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..1_000_000 {
        let mut u = w.apply_transpose(&w.apply(&v));
        deflate(&mut u);
        let rayleigh = crate::linalg::dot(&u, &v);
        nv = crate::linalg::norm(&u);
        if nv < 1e-300 {
            return Ok(0.0);
        }
        u.iter_mut().for_each(|x| *x /= nv);
        let done = libm::fabs(rayleigh - lambda) <= 1e-12 * libm::fabs(rayleigh);
        lambda = rayleigh;
        v = u;
        if done {
            break;
        }
    }
    Ok(libm::sqrt(lambda.max(0.0)).min(1.0))
}
