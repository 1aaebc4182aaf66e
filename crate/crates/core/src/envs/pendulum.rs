//! Cart-pole balance task with a discretized horizontal force.
//!
//! State `[x, ẋ, θ, θ̇]` (cart position and velocity, pole angle from upright
//! and angular velocity). Dynamics are the classic frictionless cart-pole
//! equations for a uniform rod, integrated with semi-implicit Euler: the
//! velocities are updated first and the new velocities move the positions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, DiscretizedActionMap, Environment, FeatureEnv, StateKind, Step};
use crate::stochmax::ActionId;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleParams {
    pub granularity: usize,
    pub max_force: f64,
    pub dt: f64,
    /// Full pole length in metres.
    pub pole_length: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub gravity: f64,
    pub max_angle: f64,
    pub max_position: f64,
    pub max_steps: usize,
    /// Half-width of the uniform noise applied to each state component on reset.
    pub reset_noise: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            granularity: 512,
            max_force: 3.0,
            dt: 0.02,
            pole_length: 0.6,
            cart_mass: 1.0,
            pole_mass: 0.1,
            gravity: 9.81,
            max_angle: 0.2,
            max_position: 1.0,
            max_steps: 1000,
            reset_noise: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    params: CartPoleParams,
    actions: DiscretizedActionMap,
    state: [f64; 4],
    t: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl CartPole {
    pub fn new(params: CartPoleParams, seed: u64) -> Result<Self> {
        Self::with_rng(params, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(params: CartPoleParams, rng: ChaCha8Rng) -> Result<Self> {
        if params.granularity < 2 {
            return Err(Error::InvalidGranularity(params.granularity));
        }
        let positive = [
            params.max_force,
            params.dt,
            params.pole_length,
            params.cart_mass,
            params.pole_mass,
            params.max_angle,
            params.max_position,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || params.max_steps == 0 {
            return Err(Error::InvalidSpec(
                "cart-pole parameters must be positive".into(),
            ));
        }
        let actions = DiscretizedActionMap::uniform(
            1,
            params.granularity,
            -params.max_force,
            params.max_force,
        )?;
        let mut env = Self {
            params,
            actions,
            state: [0.0; 4],
            t: 0,
            done: false,
            rng,
        };
        env.reset();
        Ok(env)
    }

    /// Default parameters with `granularity` force levels.
    pub fn with_granularity(granularity: usize, seed: u64) -> Result<Self> {
        Self::new(
            CartPoleParams {
                granularity,
                ..Default::default()
            },
            seed,
        )
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    pub fn action_map(&self) -> &DiscretizedActionMap {
        &self.actions
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    /// Overrides the physical state and restarts the step counter.
    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.t = 0;
        self.done = false;
    }

    pub fn force(&self, action: ActionId) -> Result<f64> {
        Ok(self.actions.decode(action)?[0])
    }

    fn integrate(&mut self, force: f64) {
        let p = &self.params;
        let [x, x_dot, theta, theta_dot] = self.state;
        let half = 0.5 * p.pole_length;
        let total = p.cart_mass + p.pole_mass;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + p.pole_mass * half * theta_dot * theta_dot * sin) / total;
        let theta_acc =
            (p.gravity * sin - cos * temp) / (half * (4.0 / 3.0 - p.pole_mass * cos * cos / total));
        let x_acc = temp - p.pole_mass * half * theta_acc * cos / total;

        let x_dot = x_dot + p.dt * x_acc;
        let theta_dot = theta_dot + p.dt * theta_acc;
        self.state = [x + p.dt * x_dot, x_dot, theta + p.dt * theta_dot, theta_dot];
    }
}

impl Environment for CartPole {
    type State = Vec<f64>;

    fn n_actions(&self) -> usize {
        self.actions.n_actions()
    }

    fn state_kind(&self) -> StateKind {
        StateKind::Continuous(4)
    }

    fn reset(&mut self) -> Vec<f64> {
        let eps = self.params.reset_noise;
        for v in self.state.iter_mut() {
            *v = if eps > 0.0 {
                self.rng.random_range(-eps..=eps)
            } else {
                0.0
            };
        }
        self.t = 0;
        self.done = false;
        self.state.to_vec()
    }

    fn step(&mut self, action: ActionId) -> Result<Step<Vec<f64>>> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        check_action(action, self.n_actions())?;
        let force = self.force(action)?;
        self.integrate(force);
        self.t += 1;
        let [x, _, theta, _] = self.state;
        let terminated =
            !(theta.abs() <= self.params.max_angle && x.abs() <= self.params.max_position);
        let truncated = !terminated && self.t >= self.params.max_steps;
        self.done = terminated || truncated;
        Ok(Step {
            next_state: self.state.to_vec(),
            reward: 1.0,
            terminated,
            truncated,
        })
    }
}

impl FeatureEnv for CartPole {
    fn state_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_features(&self, action: ActionId) -> Vec<f64> {
        self.actions
            .scaled(action)
            .expect("action index checked by caller")
    }
}
