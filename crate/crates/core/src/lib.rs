//! Simulation and numerical verification toolkit for stochastic averaging of
//! multiscale Markov processes.
//!
//! The crate covers branching random walk in a fast-switching global random
//! environment (BRWRE), the random-speed walker, the limiting interacting
//! branching diffusion, and a battery of exact generator evaluations and
//! Monte Carlo diagnostics that check the averaging hypotheses numerically.
//!
//! Module map:
//!
//! * [`env`]: offspring laws, environment laws and their exact moments.
//! * [`lattice`]: deme sets, migration kernels and the weighted `l_gamma` norm.
//! * [`simulate`]: exact event-driven simulation of the BRWRE and the walker.
//! * [`limits`]: Euler–Maruyama for the limiting SDE, exact drifted Brownian motion.
//! * [`generators`]: generator triples, averaged operators, condition reports.
//! * [`stats`]: closed-form oracles, KS tests, martingale residuals, summaries.
//! * [`io`]: CSV and binary ensemble formats.

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod error;
pub mod generators;
pub mod io;
pub mod lattice;
pub mod limits;
pub mod numeric;
pub mod path;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
