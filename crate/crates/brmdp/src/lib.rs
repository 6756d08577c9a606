//! Solvers and experiment tooling for Markov decision processes whose outcome
//! distribution carries an unknown parameter, planned against a Bayesian
//! posterior with a nested risk functional applied at every stage.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`] — parameter spaces, outcome families, environment dynamics;
//! * [`posterior`] — finite-support and conjugate normal-mean beliefs plus the
//!   quantized keys used to memoize value tables;
//! * [`risk`] — expectation, value-at-risk and conditional value-at-risk over
//!   sample vectors and weighted atoms;
//! * [`solvers`] — exact dynamic programming over reachable augmented states,
//!   nested-simulation optimization, and adaptive-sampling (UCB) estimation
//!   for finite horizons;
//! * [`bandit`] — the risk-adjusted multi-armed bandit that underlies the
//!   adaptive-sampling solver, with its regret accounting;
//! * [`infinite`] — the discounted Bellman operator on a fixed augmented-state
//!   universe and value iteration on top of it;
//! * [`envs`] — two ready-made environments: an inventory control problem and
//!   a grid maze with unreliable cells;
//! * [`harness`] — replicated experiments, true-performance evaluation,
//!   maximum-likelihood baselines, CSV emission.

pub mod bandit;
pub mod envs;
pub mod error;
pub mod harness;
pub mod infinite;
pub mod model;
pub mod numeric;
pub mod posterior;
pub mod risk;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
