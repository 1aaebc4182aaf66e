//! Randomly generated MDP with a large action set.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, DiscreteEnv, Environment, StateKind, Step};
use crate::mdp::RewardDistribution;
use crate::stochmax::ActionId;
use crate::{Error, FiniteMdp, Result};

/// Generated MDP description. Rewards `r(s,a) ~ N(mean, std²)` are drawn once
/// from `seed`; each `P(·|s,a)` is an independent Dirichlet(1) draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratedMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for GeneratedMdpSpec {
    fn default() -> Self {
        Self {
            n_states: 3,
            n_actions: 256,
            reward_mean: -50.0,
            reward_std: 50.0,
            horizon: 200,
            seed: 0,
        }
    }
}

impl GeneratedMdpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::InvalidSpec(
                "generated MDP needs states and actions".into(),
            ));
        }
        if !(self.reward_std >= 0.0)
            || !self.reward_mean.is_finite()
            || !self.reward_std.is_finite()
        {
            return Err(Error::InvalidSpec(format!(
                "reward law N({}, {}²)",
                self.reward_mean, self.reward_std
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Episodic wrapper around a generated [`FiniteMdp`]: no terminal states,
/// episodes truncate after `horizon` steps, start states are uniform.
#[derive(Debug, Clone)]
pub struct GeneratedMdp {
    mdp: FiniteMdp,
    horizon: usize,
    state: usize,
    t: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl GeneratedMdp {
    /// `env_seed` drives start states and transitions; the tables come from `spec.seed`.
    pub fn new(spec: &GeneratedMdpSpec, env_seed: u64) -> Result<Self> {
        Self::with_rng(spec, ChaCha8Rng::seed_from_u64(env_seed))
    }

    pub fn with_rng(spec: &GeneratedMdpSpec, mut rng: ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let mdp = FiniteMdp::random(
            spec.n_states,
            spec.n_actions,
            RewardDistribution::Normal {
                mean: spec.reward_mean,
                std: spec.reward_std,
            },
            spec.seed,
        )?;
        let state = rng.random_range(0..spec.n_states);
        Ok(Self {
            mdp,
            horizon: spec.horizon,
            state,
            t: 0,
            done: false,
            rng,
        })
    }

    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }
}

impl Environment for GeneratedMdp {
    type State = usize;

    fn n_actions(&self) -> usize {
        self.mdp.n_actions()
    }

    fn state_kind(&self) -> StateKind {
        StateKind::Discrete(self.mdp.n_states())
    }

    fn reset(&mut self) -> usize {
        self.state = self.rng.random_range(0..self.mdp.n_states());
        self.t = 0;
        self.done = false;
        self.state
    }

    fn step(&mut self, action: ActionId) -> Result<Step<usize>> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        check_action(action, self.mdp.n_actions())?;
        let reward = self.mdp.reward(self.state, action.index());
        let next = self
            .mdp
            .sample_next(self.state, action.index(), &mut self.rng);
        self.state = next;
        self.t += 1;
        self.done = self.t >= self.horizon;
        Ok(Step {
            next_state: next,
            reward,
            terminated: false,
            truncated: self.done,
        })
    }
}

impl DiscreteEnv for GeneratedMdp {
    fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    fn tables(&self) -> FiniteMdp {
        self.mdp.clone()
    }
}
