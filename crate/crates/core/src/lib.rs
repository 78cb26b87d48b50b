//! Kernelized optimistic Q-learning for discounted MDPs with continuous
//! states and finite actions.
//!
//! - [`features`]: state normalization, action one-hot embedding, kernels.
//! - [`regressor`]: incremental-Cholesky kernel ridge regression and widths.
//! - [`agent`]: the online learner.
//! - [`dimension`]: effective/pseudo dimension, closed-form bounds, checks.
//! - [`envs`]: control tasks and finite MDPs with exact solvers.
//! - [`harness`]: experiment runner, regret curves, check suites, tables.

// `!(x > 0.0)` guards are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod dimension;
pub mod envs;
pub mod error;
pub mod features;
pub mod harness;
pub mod par;
pub mod regressor;

pub use agent::{AgentConfig, EvalPolicy, KqlAgent};
pub use error::{KqlError, Result};
pub use features::{FeatureVector, KernelKind, KernelSpec, StateBounds};
pub use par::Exec;
pub use regressor::DualRegressor;
