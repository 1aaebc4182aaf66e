//! Native benchmark environments.
//!
//! Discrete-state environments ([`GeneratedMdp`], [`CliffWalking`],
//! [`FrozenLake`]) expose their tables as a [`FiniteMdp`] so tests can
//! compute exact optima. [`CartPole`] has a continuous 4-dimensional state
//! and a discretized 1-D force, with per-action feature vectors for
//! state-action value networks.

mod action_map;
mod cliff;
mod frozen_lake;
mod generated;
mod pendulum;

pub use action_map::DiscretizedActionMap;
pub use cliff::CliffWalking;
pub use frozen_lake::FrozenLake;
pub use generated::{GeneratedMdp, GeneratedMdpSpec};
pub use pendulum::{CartPole, CartPoleParams};

use crate::stochmax::ActionId;
use crate::{FiniteMdp, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Discrete(usize),
    Continuous(usize),
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S> {
    pub next_state: S,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl<S> Step<S> {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Environment {
    type State: Clone;

    fn n_actions(&self) -> usize;
    fn state_kind(&self) -> StateKind;
    fn reset(&mut self) -> Self::State;
    /// Errors with [`crate::Error::StepAfterDone`] once the episode ended,
    /// and with [`crate::Error::IndexOutOfRange`] for an invalid action.
    fn step(&mut self, action: ActionId) -> Result<Step<Self::State>>;
}

/// Environment with states `0..n_states`.
pub trait DiscreteEnv: Environment<State = usize> {
    fn n_states(&self) -> usize;
    /// Exact reward and transition tables.
    fn tables(&self) -> FiniteMdp;
}

/// Environment with a real-valued state vector and per-action features.
pub trait FeatureEnv: Environment<State = Vec<f64>> {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Network input features of `action`, each in `[-1, 1]`.
    fn action_features(&self, action: ActionId) -> Vec<f64>;
}

pub(crate) fn check_action(action: ActionId, n: usize) -> Result<()> {
    if action.index() >= n {
        Err(crate::Error::IndexOutOfRange {
            index: action.index(),
            size: n,
        })
    } else {
        Ok(())
    }
}
