//! Monitored single-particle dynamics and multifractal scaling analysis.
//!
//! A particle on a one-dimensional lattice is spread by brick-wall circuits
//! (Haar-random or fixed unitaries, random or fixed stochastic transfers)
//! and localized by sparse occupation measurements. Ensembles of final
//! wave functions or Bayesian position estimates are summarized by their
//! inverse participation ratios and position variance, and power-law fits
//! against the lattice length give the exponents `tau_q`, `tau*_q`, `D_q`
//! and `tau_Var`.
//!
//! - [`qdyn`]: quantum trajectories with projective, generalized and
//!   no-click measurements
//! - [`cdyn`]: classical transfer circuits with Bayesian estimation
//! - [`observables`]: IPR, coarse-graining, variance, recentering, running
//!   statistics
//! - [`analytic`]: single-shot and stochastic-resetting reference models
//! - [`ensemble`]: protocols, seeding and parallel ensemble runs
//! - [`scaling`]: power-law fits and exponent tables

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cdyn;
pub mod ensemble;
pub mod error;
pub mod lattice;
pub mod observables;
pub mod qdyn;
pub mod scaling;

pub use error::{Error, Result};
