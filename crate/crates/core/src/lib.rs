//! Formalizes control tasks as POMDPs, decides task reductions and computes
//! relative complexity exactly on finite tasks, and estimates relative
//! complexity on neural-policy tasks by adversarial minimax training.
//!
//! The crate is organized around the pipeline:
//!
//! * [`taskcore`] — tasks, policies, rollout/return evaluation, admissibility.
//! * [`reduction`] — encoders, decoders, function spaces, policy composition,
//!   exact reduction/equivalence verdicts, and order-axiom audits.
//! * [`complexity`] — exact relative complexity by sup-inf enumeration.
//! * [`diffnet`] — minimal MLPs with reverse-mode gradients and optimizers.
//! * [`advest`] — the adversarial relative-complexity estimator and sweeps.
//! * [`envs`] — desk-scale task generators (gridworld, cartpole, speed tracker).
//! * [`props`] — the cross-module invariant battery run by the CLI.

pub mod advest;
pub mod complexity;
pub mod diffnet;
pub mod envs;
pub mod error;
pub mod props;
pub mod reduction;
pub mod taskcore;

pub use error::{Error, Result};
