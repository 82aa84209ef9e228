//! Quickest detection of a change in drift when observing costs `b` per unit
//! time.
//!
//! The crate computes the optimal two-threshold policy (sensor off below `A`,
//! on in `]A, B[`, alarm at `B`), the value function in every cost regime,
//! the ε-smoothed strategies together with their exact cost and expected
//! hitting time, and checks all of it by Monte Carlo simulation of the
//! controlled posterior.

// `!(x > y)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod epsilon;
pub mod error;
pub mod filter;
pub mod free_boundary;
pub mod model;
pub mod quadrature;
pub mod simulator;

pub use epsilon::EpsilonPolicy;
pub use error::{QdoError, Result};
pub use free_boundary::{FreeBoundarySolution, Piece, Side, SolverConfig};
pub use model::{DerivedParams, ProblemParams, Regime};
