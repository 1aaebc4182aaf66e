//! DQN and Double DQN agents with exact or stochastic action maximization.
//!
//! Stochastic variants maximize over `C = R ∪ M` where `M` is drawn from the
//! actions stored in the replay buffer. Every forward pass is counted, split
//! into selection, target and metric evaluations.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, NetPair, RngState, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
use super::mlp::MlpParams;
use super::replay::{Experience, ReplayBuffer};
use crate::envs::FeatureEnv;
use crate::seeding::{stream_rng, Stream};
use crate::stochmax::{
    default_subset_size, ActionId, ActionMemory, MemoryMode, Recall, StochMaximizer, SubsetSampler,
};
use crate::tabular::{Decision, Maximization};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeepAlgorithm {
    Dqn,
    Ddqn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeepConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    /// Multiplicative decay of ε per finished episode.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    /// Soft target rate: `θ⁻ ← τθ + (1−τ)θ⁻` after every gradient step.
    pub tau: f64,
    pub algorithm: DeepAlgorithm,
    pub maximization: Maximization,
    /// `None` means `⌈log₂ n⌉`.
    pub subset_size: Option<usize>,
    /// `global` or `none`; continuous states have no per-state memory.
    pub memory: MemoryMode,
    pub hidden: Vec<usize>,
    /// `None` means `2⌈log₂ n⌉`.
    pub buffer_capacity: Option<usize>,
    /// `None` means `⌈log₂ n⌉`.
    pub batch_size: Option<usize>,
    pub track_stochmax: bool,
}

impl Default for DeepConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 0.001,
            epsilon_start: 1.0,
            epsilon_decay: 0.995,
            epsilon_min: 0.01,
            tau: 0.01,
            algorithm: DeepAlgorithm::Dqn,
            maximization: Maximization::Stochastic,
            subset_size: None,
            memory: MemoryMode::Global,
            hidden: vec![64, 64],
            buffer_capacity: None,
            batch_size: None,
            track_stochmax: true,
        }
    }
}

impl DeepConfig {
    pub fn validate(&self, n_actions: usize) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} {v} outside [0, 1]")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("epsilon_start", self.epsilon_start)?;
        unit("epsilon_decay", self.epsilon_decay)?;
        unit("epsilon_min", self.epsilon_min)?;
        unit("tau", self.tau)?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if n_actions == 0 {
            return Err(Error::InvalidConfig("empty action space".into()));
        }
        if let Some(k) = self.subset_size {
            if k < 1 || k > n_actions {
                return Err(Error::InvalidConfig(format!(
                    "subset size {k} outside [1, {n_actions}]"
                )));
            }
        }
        if self.memory == MemoryMode::PerState {
            return Err(Error::InvalidConfig(
                "deep agents use global memory or none".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer of width 0".into()));
        }
        if self.buffer_capacity == Some(0) || self.batch_size == Some(0) {
            return Err(Error::InvalidConfig(
                "buffer and batch sizes must be positive".into(),
            ));
        }
        if self.batch_size(n_actions) > self.buffer_capacity(n_actions) {
            return Err(Error::InvalidConfig(
                "batch larger than replay capacity".into(),
            ));
        }
        Ok(())
    }

    pub fn subset_size(&self, n_actions: usize) -> usize {
        self.subset_size
            .unwrap_or_else(|| default_subset_size(n_actions))
    }

    pub fn buffer_capacity(&self, n_actions: usize) -> usize {
        self.buffer_capacity
            .unwrap_or(2 * default_subset_size(n_actions))
    }

    pub fn batch_size(&self, n_actions: usize) -> usize {
        self.batch_size.unwrap_or(default_subset_size(n_actions))
    }
}

/// `max(ε_min, ε_start · decay^episode)`.
pub fn epsilon_schedule(episode: u64, cfg: &DeepConfig) -> f64 {
    (cfg.epsilon_start * cfg.epsilon_decay.powf(episode as f64)).max(cfg.epsilon_min)
}

/// Network forward passes, by purpose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounters {
    pub selection: u64,
    pub target: u64,
    pub metrics: u64,
}

#[derive(Debug, Clone)]
// only one per agent, so boxing the large variant buys nothing
#[allow(clippy::large_enum_variant)]
enum Maximizer {
    Exact,
    Stochastic(StochMaximizer),
}

/// Online network and its slowly tracking target copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub online: MlpParams,
    pub target: MlpParams,
}

#[derive(Debug, Clone)]
pub struct DeepAgent {
    cfg: DeepConfig,
    n_actions: usize,
    state_dim: usize,
    action_dim: usize,
    /// Scaled features of every action, `n_actions × action_dim`.
    features: Vec<f64>,
    nets: Vec<Net>,
    buffer: ReplayBuffer,
    maximizer: Maximizer,
    rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    episode: u64,
    updates: u64,
    counters: CallCounters,
    last_selection_calls: u64,
}

/// `(argmax, max)` of `values` aligned with `actions`, ties to the lowest id.
fn best_of(actions: &[ActionId], values: &[f64]) -> (ActionId, f64) {
    let mut best = (actions[0], values[0]);
    for (&a, &v) in actions.iter().zip(values).skip(1) {
        if v > best.1 || (v == best.1 && a < best.0) {
            best = (a, v);
        }
    }
    best
}

impl DeepAgent {
    pub fn new<E: FeatureEnv>(cfg: DeepConfig, env: &E, seed: u64) -> Result<Self> {
        let n = env.n_actions();
        cfg.validate(n)?;
        let mut init_rng = stream_rng(seed, Stream::Init);
        let sizes = Self::layer_sizes(&cfg, env.state_dim(), env.action_dim());
        let n_nets = if cfg.algorithm == DeepAlgorithm::Ddqn {
            2
        } else {
            1
        };
        let mut nets = Vec::with_capacity(n_nets);
        for _ in 0..n_nets {
            let online = MlpParams::init(&sizes, &mut init_rng)?;
            nets.push(Net {
                target: online.clone(),
                online,
            });
        }
        let maximizer = Self::build_maximizer(&cfg, n, stream_rng(seed, Stream::Sampler))?;
        Ok(Self {
            n_actions: n,
            state_dim: env.state_dim(),
            action_dim: env.action_dim(),
            features: Self::collect_features(env)?,
            nets,
            buffer: ReplayBuffer::new(cfg.buffer_capacity(n))?,
            maximizer,
            rng: stream_rng(seed, Stream::Agent),
            replay_rng: stream_rng(seed, Stream::Replay),
            episode: 0,
            updates: 0,
            counters: CallCounters::default(),
            last_selection_calls: 0,
            cfg,
        })
    }

    fn layer_sizes(cfg: &DeepConfig, state_dim: usize, action_dim: usize) -> Vec<usize> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        sizes
    }

    fn collect_features<E: FeatureEnv>(env: &E) -> Result<Vec<f64>> {
        let mut features = Vec::with_capacity(env.n_actions() * env.action_dim());
        for a in 0..env.n_actions() {
            let f = env.action_features(ActionId(a));
            if f.len() != env.action_dim() {
                return Err(Error::ShapeMismatch {
                    expected: env.action_dim(),
                    got: f.len(),
                });
            }
            features.extend(f);
        }
        Ok(features)
    }

    fn build_maximizer(cfg: &DeepConfig, n: usize, sampler_rng: ChaCha8Rng) -> Result<Maximizer> {
        Ok(match cfg.maximization {
            Maximization::Exact => Maximizer::Exact,
            Maximization::Stochastic => {
                let k = cfg.subset_size(n);
                let memory = match cfg.memory {
                    MemoryMode::Global => ActionMemory::global(default_subset_size(n)),
                    _ => ActionMemory::None,
                };
                Maximizer::Stochastic(StochMaximizer::new(
                    SubsetSampler::with_rng(n, k, sampler_rng)?,
                    memory,
                ))
            }
        })
    }

    pub fn config(&self) -> &DeepConfig {
        &self.cfg
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut [Net] {
        &mut self.nets
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn counters(&self) -> CallCounters {
        self.counters
    }

    /// Forward passes spent on the most recent action selection.
    pub fn last_selection_calls(&self) -> u64 {
        self.last_selection_calls
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_schedule(self.episode, &self.cfg)
    }

    pub fn end_episode(&mut self) {
        self.episode += 1;
    }

    pub fn action_features(&self, a: ActionId) -> &[f64] {
        &self.features[a.index() * self.action_dim..(a.index() + 1) * self.action_dim]
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::ShapeMismatch {
                expected: self.state_dim,
                got: state.len(),
            });
        }
        Ok(())
    }

    /// `Q(state, a)` for each `a` in `actions` (every action when `None`).
    fn eval(
        net: &MlpParams,
        features: &[f64],
        dim: usize,
        state: &[f64],
        actions: Option<&[ActionId]>,
        out: &mut [f64],
    ) {
        match actions {
            Some(acts) => net.forward_many(
                state,
                acts.iter()
                    .map(|a| &features[a.index() * dim..(a.index() + 1) * dim]),
                out,
            ),
            None => net.forward_many(state, features.chunks(dim), out),
        }
    }

    /// Policy values (online, or `Q_A + Q_B` for Double DQN); returns forward passes spent.
    fn policy_values(&self, state: &[f64], actions: Option<&[ActionId]>, out: &mut [f64]) -> u64 {
        let dim = self.action_dim;
        Self::eval(
            &self.nets[0].online,
            &self.features,
            dim,
            state,
            actions,
            out,
        );
        if let Some(second) = self.nets.get(1) {
            let mut extra = vec![0.0; out.len()];
            Self::eval(
                &second.online,
                &self.features,
                dim,
                state,
                actions,
                &mut extra,
            );
            for (o, e) in out.iter_mut().zip(extra) {
                *o += e;
            }
        }
        (out.len() * self.nets.len()) as u64
    }

    /// Builds `C` for a query, with global memory drawn from the buffer's actions.
    fn candidates(&mut self) -> Option<Vec<ActionId>> {
        match &mut self.maximizer {
            Maximizer::Exact => None,
            Maximizer::Stochastic(m) => {
                let pool = match m.memory() {
                    ActionMemory::Global { .. } => self.buffer.actions(),
                    _ => Vec::new(),
                };
                let ctx = if pool.is_empty() {
                    Recall::Nothing
                } else {
                    Recall::Pool(&pool)
                };
                Some(m.candidates(ctx).as_slice().to_vec())
            }
        }
    }

    /// Exact greedy action over all actions; uncounted, for evaluation.
    pub fn greedy_action(&self, state: &[f64]) -> Result<ActionId> {
        self.check_state(state)?;
        let mut vals = vec![0.0; self.n_actions];
        self.policy_values(state, None, &mut vals);
        Ok(crate::stochmax::exact_argmax(self.n_actions, |a| vals[a.index()]).0)
    }

    /// ε-greedy selection with the greedy part over `C` (or all actions).
    pub fn select_action(&mut self, state: &[f64]) -> Result<Decision> {
        self.check_state(state)?;
        let epsilon = self.epsilon();
        let explore = self.rng.random::<f64>() < epsilon;
        let random_action = explore.then(|| ActionId(self.rng.random_range(0..self.n_actions)));

        let cands = self.candidates();
        let (greedy, stoch_value, size, exact_max) = match &cands {
            None => {
                let mut vals = vec![0.0; self.n_actions];
                let calls = self.policy_values(state, None, &mut vals);
                self.last_selection_calls = calls;
                let (a, v) = crate::stochmax::exact_argmax(self.n_actions, |a| vals[a.index()]);
                (a, v, self.n_actions, Some(v))
            }
            Some(c) => {
                let mut vals = vec![0.0; c.len()];
                let calls = self.policy_values(state, Some(c), &mut vals);
                self.last_selection_calls = calls;
                let (a, v) = best_of(c, &vals);
                (a, v, c.len(), None)
            }
        };
        self.counters.selection += self.last_selection_calls;

        let (beta, omega) = if self.cfg.track_stochmax {
            let max = match exact_max {
                Some(m) => m,
                None => {
                    let mut all = vec![0.0; self.n_actions];
                    self.counters.metrics += self.policy_values(state, None, &mut all);
                    all.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                }
            };
            let beta = max - stoch_value;
            (Some(beta), (max > 0.0).then(|| stoch_value / max))
        } else {
            (None, None)
        };

        Ok(Decision {
            action: random_action.unwrap_or(greedy),
            greedy: !explore,
            epsilon,
            beta,
            omega,
            candidates: size,
        })
    }

    /// Regression target for `e` when training network `update`.
    ///
    /// DQN bootstraps from its target network at the target network's
    /// (stoch)argmax; Double DQN selects with the online network being
    /// trained and evaluates with the other network's target copy.
    pub fn compute_target(&mut self, e: &Experience, update: usize) -> f64 {
        if e.terminal {
            return e.reward;
        }
        let cands = self.candidates();
        let dim = self.action_dim;
        let (selector, evaluator) = match self.cfg.algorithm {
            DeepAlgorithm::Dqn => (&self.nets[0].target, None),
            DeepAlgorithm::Ddqn => (
                &self.nets[update].online,
                Some(&self.nets[1 - update].target),
            ),
        };
        let (best, value) = match &cands {
            None => {
                let mut vals = vec![0.0; self.n_actions];
                Self::eval(
                    selector,
                    &self.features,
                    dim,
                    &e.next_state,
                    None,
                    &mut vals,
                );
                self.counters.target += self.n_actions as u64;
                crate::stochmax::exact_argmax(self.n_actions, |a| vals[a.index()])
            }
            Some(c) => {
                let mut vals = vec![0.0; c.len()];
                Self::eval(
                    selector,
                    &self.features,
                    dim,
                    &e.next_state,
                    Some(c),
                    &mut vals,
                );
                self.counters.target += c.len() as u64;
                best_of(c, &vals)
            }
        };
        let bootstrap = match evaluator {
            None => value,
            Some(net) => {
                self.counters.target += 1;
                net.forward_split(&e.next_state, self.action_features(best))
            }
        };
        e.reward + self.cfg.gamma * bootstrap
    }

    /// Stores `e` and, once a batch is available, takes one gradient step and
    /// soft-updates the target networks. Returns the batch loss.
    pub fn observe(&mut self, e: Experience) -> Result<Option<f64>> {
        self.check_state(&e.state)?;
        self.check_state(&e.next_state)?;
        if e.action.index() >= self.n_actions || !e.reward.is_finite() {
            return Err(Error::InvalidParams("malformed experience".into()));
        }
        self.buffer.push(e);
        let batch = self.cfg.batch_size(self.n_actions);
        if self.buffer.len() < batch {
            return Ok(None);
        }
        let idx = self.buffer.sample_indices(&mut self.replay_rng, batch)?;
        let update = match self.cfg.algorithm {
            DeepAlgorithm::Dqn => 0,
            DeepAlgorithm::Ddqn => usize::from(!self.rng.random_bool(0.5)),
        };
        let mut pairs = Vec::with_capacity(batch);
        for i in idx {
            let e = self.buffer.get(i).expect("sampled index in range").clone();
            let y = self.compute_target(&e, update);
            let mut x = e.state;
            x.extend_from_slice(self.action_features(e.action));
            pairs.push((x, y));
        }
        let (loss, grad) = self.nets[update].online.gradient(&pairs)?;
        self.nets[update]
            .online
            .sgd_step(&grad, self.cfg.learning_rate);
        for net in &mut self.nets {
            net.target.soft_update(&net.online, self.cfg.tau);
        }
        self.updates += 1;
        Ok(Some(loss))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.cfg.clone(),
            n_actions: self.n_actions,
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            episode: self.episode,
            updates: self.updates,
            counters: self.counters,
            networks: self
                .nets
                .iter()
                .map(|n| NetPair {
                    online: n.online.clone(),
                    target: n.target.clone(),
                })
                .collect(),
            buffer: self.buffer.clone(),
            agent_rng: RngState::capture(&self.rng),
            replay_rng: RngState::capture(&self.replay_rng),
            sampler_rng: match &self.maximizer {
                Maximizer::Exact => None,
                Maximizer::Stochastic(m) => Some(RngState::capture(m.sampler().rng())),
            },
        }
    }

    /// Rebuilds an agent from a checkpoint; `env` supplies the action features.
    pub fn restore<E: FeatureEnv>(ckpt: Checkpoint, env: &E) -> Result<Self> {
        ckpt.validate()?;
        if env.n_actions() != ckpt.n_actions
            || env.state_dim() != ckpt.state_dim
            || env.action_dim() != ckpt.action_dim
        {
            return Err(Error::Checkpoint(
                "environment does not match checkpoint".into(),
            ));
        }
        let sizes = Self::layer_sizes(&ckpt.config, ckpt.state_dim, ckpt.action_dim);
        let n_nets = if ckpt.config.algorithm == DeepAlgorithm::Ddqn {
            2
        } else {
            1
        };
        if ckpt.networks.len() != n_nets
            || ckpt
                .networks
                .iter()
                .any(|n| n.online.sizes() != sizes || n.target.sizes() != sizes)
        {
            return Err(Error::Checkpoint(
                "network shapes do not match config".into(),
            ));
        }
        let sampler_rng = match (&ckpt.config.maximization, &ckpt.sampler_rng) {
            (Maximization::Exact, _) => stream_rng(0, Stream::Sampler),
            (Maximization::Stochastic, Some(s)) => s.restore()?,
            (Maximization::Stochastic, None) => {
                return Err(Error::Checkpoint("missing sampler state".into()))
            }
        };
        Ok(Self {
            maximizer: Self::build_maximizer(&ckpt.config, ckpt.n_actions, sampler_rng)?,
            features: Self::collect_features(env)?,
            nets: ckpt
                .networks
                .into_iter()
                .map(|n| Net {
                    online: n.online,
                    target: n.target,
                })
                .collect(),
            buffer: ckpt.buffer,
            rng: ckpt.agent_rng.restore()?,
            replay_rng: ckpt.replay_rng.restore()?,
            n_actions: ckpt.n_actions,
            state_dim: ckpt.state_dim,
            action_dim: ckpt.action_dim,
            episode: ckpt.episode,
            updates: ckpt.updates,
            counters: ckpt.counters,
            last_selection_calls: 0,
            cfg: ckpt.config,
        })
    }
}

/// Per-step record emitted by [`train`], with the three timed spans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeepStepInfo {
    pub step: u64,
    pub episode: u64,
    pub decision: Decision,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub loss: Option<f64>,
    pub select_ns: u64,
    pub env_ns: u64,
    pub update_ns: u64,
}

/// Step-by-step driver over a borrowed environment, so callers can act on
/// the agent (checkpointing, inspection) between steps.
pub struct Rollout<'e, E: FeatureEnv> {
    env: &'e mut E,
    state: Vec<f64>,
    step: u64,
}

impl<'e, E: FeatureEnv> Rollout<'e, E> {
    /// Resets `env` and starts counting steps at zero.
    pub fn new(env: &'e mut E) -> Self {
        let state = env.reset();
        Self {
            env,
            state,
            step: 0,
        }
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    /// One interaction: select, act, store and learn; resets the env at episode end.
    pub fn step(&mut self, agent: &mut DeepAgent) -> Result<DeepStepInfo> {
        let t0 = Instant::now();
        let decision = agent.select_action(&self.state)?;
        let t1 = Instant::now();
        let out = self.env.step(decision.action)?;
        let t2 = Instant::now();
        let episode = agent.episode();
        let done = out.done();
        let loss = agent.observe(Experience {
            state: std::mem::take(&mut self.state),
            action: decision.action,
            reward: out.reward,
            next_state: out.next_state.clone(),
            terminal: out.terminated,
        })?;
        let t3 = Instant::now();
        let info = DeepStepInfo {
            step: self.step,
            episode,
            decision,
            reward: out.reward,
            terminated: out.terminated,
            truncated: out.truncated,
            loss,
            select_ns: ((t1 - t0).as_nanos() as u64).max(1),
            env_ns: ((t2 - t1).as_nanos() as u64).max(1),
            update_ns: ((t3 - t2).as_nanos() as u64).max(1),
        };
        if done {
            agent.end_episode();
            self.state = self.env.reset();
        } else {
            self.state = out.next_state;
        }
        self.step += 1;
        Ok(info)
    }
}

/// Runs `steps` interactions, resetting the environment at episode ends.
pub fn train<E, F>(agent: &mut DeepAgent, env: &mut E, steps: u64, mut on_step: F) -> Result<()>
where
    E: FeatureEnv,
    F: FnMut(&DeepStepInfo),
{
    let mut rollout = Rollout::new(env);
    for _ in 0..steps {
        on_step(&rollout.step(agent)?);
    }
    Ok(())
}

/// Length of one exact-greedy episode, capped at `max_steps`.
pub fn greedy_episode_length<E: FeatureEnv>(
    agent: &DeepAgent,
    env: &mut E,
    max_steps: usize,
) -> Result<usize> {
    let mut state = env.reset();
    for t in 0..max_steps {
        let out = env.step(agent.greedy_action(&state)?)?;
        if out.done() {
            return Ok(t + 1);
        }
        state = out.next_state;
    }
    Ok(max_steps)
}
