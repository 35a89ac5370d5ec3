//! Deep deterministic policy gradient (DDPG) and its prioritized-replay
//! variant, trained end to end on small closed-form control tasks.
//!
//! - [`nn`]: dense networks with exact backpropagation and Adam.
//! - [`replay`]: ring buffer with sum-tree proportional prioritization.
//! - [`agent`]: actor-critic learner (targets, critic/actor updates, soft updates).
//! - [`noise`]: exploration strategies (none, Gaussian, Ornstein-Uhlenbeck, adaptive parameter noise).
//! - [`envs`]: pendulum, continuous mountain car and point-mass reacher.
//! - [`harness`]: run orchestration, epoch metrics, CSV output and seed-wise comparison.

pub mod agent;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod noise;
pub mod replay;

pub use error::{Error, Result};

/// The single generator type threaded through every stochastic operation.
pub type RunRng = rand_chacha::ChaCha8Rng;

/// Builds a [`RunRng`] from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> RunRng {
    use rand::SeedableRng;
    RunRng::seed_from_u64(seed)
}
