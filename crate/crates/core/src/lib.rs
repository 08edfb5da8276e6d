//! Hyperbolically-discounted temporal-difference learning on the
//! reward-punishment framework.
//!
//! The crate is organised bottom-up:
//!
//! - [`td`]: the numerical kernel (effective discount, TD error, scale
//!   compensation, online signal statistics).
//! - [`approximator`]: small tanh networks used as rectified value heads and
//!   as a softmax policy.
//! - [`agent`]: the reward-punishment actor-critic in hyperbolic and
//!   exponential modes.
//! - [`envs`]: CartPole and Acrobot with split reward/punishment channels.
//! - [`harness`]: seeded multi-trial runs, the three-case comparison and CSV
//!   output.

pub mod agent;
pub mod approximator;
pub mod envs;
pub mod error;
pub mod harness;
pub mod td;

pub use error::{Error, Result};
