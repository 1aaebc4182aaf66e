//! `stochq`: value-based reinforcement learning with sub-linear stochastic
//! maximization over large discrete action spaces.
//!
//! Instead of scanning all `n` actions for `max`/`argmax`, the agents here
//! maximize over a small candidate set `C = R ∪ M`: a fresh uniform random
//! subset `R` of (by default) `⌈log₂ n⌉` actions, plus a memory `M` of
//! recently exploited actions.
//!
//! Modules:
//! - [`stochmax`]: subset sampling, action memory, `stoch_max` / `stoch_argmax`.
//! - [`tabular`]: Q-learning, Double Q-learning and Sarsa, exact and stochastic.
//! - [`envs`]: generated MDP, CliffWalking, FrozenLake, cart-pole balance.
//! - [`approx`]: MLP value network, replay buffer, (Stoch)DQN / (Stoch)DDQN.
//! - [`analysis`]: β/ω metrics, sampling bounds, the randomized Bellman
//!   operator and its fixed point.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod approx;
pub mod envs;
mod error;
pub mod mdp;
pub mod seeding;
pub mod stochmax;
pub mod tabular;

pub use error::{Error, Result};
pub use mdp::{FiniteMdp, QValues};
pub use stochmax::{
    ActionId, ActionMemory, CandidateSet, MemoryMode, StochMaximizer, SubsetSampler,
};
