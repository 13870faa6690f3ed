//! Exact lattice analysis, simulation and statistical verification for
//! compound Poisson jump processes and their bridges.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: jump sets as exact layered rational matrices.
//! - [`lattice`]: integer kernel bases, lattice membership, fibers of the
//!   jump map, and the exact shift combinatorics on jump counts.
//! - [`fiber`]: connectivity of fiber graphs and generating-set verdicts
//!   with machine-checkable certificates.
//! - [`poisson`]: truncated Poisson count distributions, the shift identity
//!   they satisfy, and the reference counterexample separating the shift
//!   identity from class membership.
//! - [`process`]: time-inhomogeneous rates, path simulation, time changes
//!   and their path-space densities, and the time invariant.
//! - [`stats`]: the small statistical toolkit used by the Monte Carlo
//!   verifiers (Welch comparisons, Wilson intervals, chi-square goodness of
//!   fit).
//! - [`bridge`]: exact bridge distributions on fibers, endpoint mixtures,
//!   the space invariant, same-class decisions, and small-time cycle
//!   asymptotics.
//! - [`verify`]: seeded, reproducible Monte Carlo verification of the
//!   characterizing identities, with reports.

pub mod bridge;
pub mod error;
pub mod fiber;
pub mod lattice;
pub mod model;
pub mod poisson;
pub mod process;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
