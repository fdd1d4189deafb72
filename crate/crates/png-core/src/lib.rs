//! Polynuclear growth (PNG) toolkit.
//!
//! The crate is organized around the equivalence between the PNG droplet and
//! Poissonian last-passage percolation: `geometry` holds the coordinate maps,
//! `sampling` produces Poisson point clouds, `lpp` computes longest weakly
//! increasing chains, `dynamics` runs the event-driven surface (single and
//! multilayer), `kernels` evaluates the discrete Bessel kernel and its
//! Fredholm determinants, and `stats` has the estimators used by experiments.

pub mod dynamics;
pub mod geometry;
pub mod kernels;
pub mod lpp;
pub mod sampling;
pub mod stats;
