//! Time-varying Gaussian-process bandit optimization.
//!
//! The reward function follows a Markov GP model: `f_1 = g_1` and
//! `f_{t+1} = sqrt(1 - eps) f_t + sqrt(eps) g_{t+1}` with independent
//! `g_t ~ GP(0, k)`. This crate provides:
//!
//! * [`kernel`]: spatial kernels (SE, Matérn, empirical) and temporal decay factors.
//! * [`gp`]: exact time-invariant and time-varying posteriors, mutual information.
//! * [`environment`]: a seeded simulator of the reward model on a finite grid.
//! * [`algorithms`]: GP-UCB, R-GP-UCB, TV-GP-UCB, the random baseline, beta schedules.
//! * [`hyperlearn`]: marginal-likelihood learning of the forgetting rate.
//! * [`theory`]: regret-bound evaluators and randomized inequality checks.
//! * [`harness`]: configuration, experiment orchestration, CSV input and output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod environment;
pub mod error;
pub mod gp;
pub mod harness;
pub mod hyperlearn;
pub mod kernel;
pub mod linalg;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
pub use kernel::{KernelSpec, Location};
