//! Distributed optimization over round-synchronous peer-to-peer networks.
//!
//! Every robot holds a private local objective `f_i` and feasible set `X_i`
//! and the network jointly minimizes `sum_i f_i(x)` subject to `x in X_i`.
//! Robots only talk to their one-hop neighbours, one exchange at a time.
//!
//! The crate is `no_std` (it needs `alloc`) and contains:
//!
//! * [`graph`]: static and time-varying communication graphs.
//! * [`weights`]: Metropolis mixing matrices and stochasticity diagnostics.
//! * [`problems`]: separable problems, canonical instances and a centralized
//!   ground-truth solver.
//! * [`algorithms`]: per-robot state machines for DGD, DSGD, DIGing, DDA,
//!   Network Newton-K, NEXT, C-ADMM and SOVA.
//! * [`executor`]: the synchronous round driver, trace metrics and rate
//!   estimation.
//!
//! File formats, threading and the command line live in the `distopt` crate.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod algorithms;
mod error;
pub mod executor;
pub mod graph;
pub mod linalg;
pub mod problems;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
