//! Tabular Q-learning, Double Q-learning and Sarsa, each with an exact or a
//! stochastic maximizer.
//!
//! Schedules: the learning rate of a pair is `z(s,a)^-0.8` where `z(s,a)`
//! counts its updates (starting at 1), and exploration in state `s` is
//! `ε(s) = 1/√z(s)` with `z(s)` the state's visit count (starting at 1).
//!
//! The stochastic variants draw a fresh random subset for every max/argmax,
//! so the subset behind a value update is independent of the one used to
//! select the action. Only greedy actions enter the per-state memory.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::DiscreteEnv;
use crate::seeding::{stream_rng, Stream};
use crate::stochmax::{
    default_subset_size, exact_argmax, exact_max, ActionId, ActionMemory, MemoryMode, Recall,
    StochMaximizer, SubsetSampler,
};
use crate::{Error, QValues, Result};

/// `α = z^-exponent`.
pub fn learning_rate(z: u64, exponent: f64) -> f64 {
    debug_assert!(z >= 1);
    (z as f64).powf(-exponent)
}

/// `ε(s) = 1/√z(s)`.
pub fn exploration_rate(state_visits: u64) -> f64 {
    debug_assert!(state_visits >= 1);
    1.0 / (state_visits as f64).sqrt()
}

/// Action values with per-pair update counts and per-state visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: QValues,
    visits: Vec<u64>,
    state_visits: Vec<u64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            values: QValues::zeros(n_states, n_actions),
            visits: vec![1; n_states * n_actions],
            state_visits: vec![1; n_states],
        }
    }

    pub fn values(&self) -> &QValues {
        &self.values
    }

    pub fn n_states(&self) -> usize {
        self.values.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.values.n_actions()
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values.get(s, a)
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values.set(s, a, v);
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.n_actions() + a]
    }

    pub fn state_visits(&self, s: usize) -> u64 {
        self.state_visits[s]
    }

    /// `Q(s,a) ← (1-α) Q(s,a) + α·target` with `α = z(s,a)^-exponent`, then `z(s,a) += 1`.
    pub fn blend(&mut self, s: usize, a: usize, target: f64, lr_exponent: f64) {
        let idx = s * self.n_actions() + a;
        let alpha = learning_rate(self.visits[idx], lr_exponent);
        let old = self.values.get(s, a);
        self.values.set(s, a, (1.0 - alpha) * old + alpha * target);
        self.visits[idx] += 1;
    }

    pub fn visit_state(&mut self, s: usize) {
        self.state_visits[s] += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    QLearning,
    DoubleQ,
    Sarsa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Maximization {
    Exact,
    Stochastic,
}

/// Exploration schedule of the ε-greedy policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exploration {
    /// `ε(s) = 1/√z(s)`.
    Decaying,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TabularConfig {
    pub gamma: f64,
    pub lr_exponent: f64,
    pub algorithm: Algorithm,
    pub maximization: Maximization,
    /// Random subset size; `None` means `⌈log₂ n⌉`.
    pub subset_size: Option<usize>,
    pub memory: MemoryMode,
    pub memory_capacity: usize,
    pub exploration: Exploration,
    /// Compute β/ω for every decision (costs an exact max per step).
    pub track_stochmax: bool,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            lr_exponent: 0.8,
            algorithm: Algorithm::QLearning,
            maximization: Maximization::Stochastic,
            subset_size: None,
            memory: MemoryMode::PerState,
            memory_capacity: 2,
            exploration: Exploration::Decaying,
            track_stochmax: true,
        }
    }
}

impl TabularConfig {
    pub fn validate(&self, n_actions: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        // Σα = ∞ and Σα² < ∞ along each pair need 0.5 < exponent <= 1
        if !(self.lr_exponent > 0.5 && self.lr_exponent <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning-rate exponent {} outside (0.5, 1]",
                self.lr_exponent
            )));
        }
        if let Exploration::Fixed(eps) = self.exploration {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::InvalidConfig(format!(
                    "epsilon {eps} outside [0, 1]"
                )));
            }
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
        if self.memory == MemoryMode::Global {
            return Err(Error::InvalidConfig(
                "tabular agents use per-state memory or none".into(),
            ));
        }
        if self.memory == MemoryMode::PerState && self.memory_capacity == 0 {
            return Err(Error::InvalidConfig(
                "per-state memory capacity must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One observed transition; `terminal` means `next_state` has no future value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: usize,
    pub terminal: bool,
}

/// Max/argmax over a row of values, either exact or stochastic.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Maximizer {
    Exact { n_actions: usize },
    Stochastic(StochMaximizer),
}

impl Maximizer {
    pub fn exact(n_actions: usize) -> Self {
        Maximizer::Exact { n_actions }
    }

    pub fn stochastic(sampler: SubsetSampler, memory: ActionMemory) -> Self {
        Maximizer::Stochastic(StochMaximizer::new(sampler, memory))
    }

    /// `(arg)max` of `values` in `state`, memory keyed by `state`.
    pub fn argmax<F: Fn(usize) -> f64>(&mut self, state: usize, values: F) -> (ActionId, f64) {
        match self {
            Maximizer::Exact { n_actions } => exact_argmax(*n_actions, |a| values(a.index())),
            Maximizer::Stochastic(m) => m.argmax(Recall::State(state), |a| values(a.index())),
        }
    }

    pub fn max<F: Fn(usize) -> f64>(&mut self, state: usize, values: F) -> f64 {
        self.argmax(state, values).1
    }

    fn record_exploited(&mut self, state: usize, action: ActionId) {
        if let Maximizer::Stochastic(m) = self {
            m.record_exploited(state, action);
        }
    }
}

/// Q-learning update with `max` replaced by the maximizer's (stoch)max over `Q(s', ·)`.
pub fn q_update(q: &mut QTable, tr: &Transition, cfg: &TabularConfig, maximizer: &mut Maximizer) {
    let target = if tr.terminal {
        tr.reward
    } else {
        let next = tr.next_state;
        let bootstrap = maximizer.max(next, |b| q.get(next, b));
        tr.reward + cfg.gamma * bootstrap
    };
    q.blend(tr.state, tr.action.index(), target, cfg.lr_exponent);
    q.visit_state(tr.state);
}

/// Which table a Double Q-learning step updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Updated {
    A,
    B,
}

/// Double Q-learning step: with probability ½ update `A` toward
/// `r + γ Q_B(s', argmax_b Q_A(s', b))`, otherwise the mirror image.
pub fn double_q_update<R: Rng + ?Sized>(
    qa: &mut QTable,
    qb: &mut QTable,
    tr: &Transition,
    cfg: &TabularConfig,
    maximizer: &mut Maximizer,
    rng: &mut R,
) -> Updated {
    let which = if rng.random_bool(0.5) {
        Updated::A
    } else {
        Updated::B
    };
    let (upd, other) = match which {
        Updated::A => (qa, qb),
        Updated::B => (qb, qa),
    };
    let target = if tr.terminal {
        tr.reward
    } else {
        let next = tr.next_state;
        let (b_star, _) = maximizer.argmax(next, |b| upd.get(next, b));
        tr.reward + cfg.gamma * other.get(next, b_star.index())
    };
    upd.blend(tr.state, tr.action.index(), target, cfg.lr_exponent);
    upd.visit_state(tr.state);
    other.visit_state(tr.state);
    which
}

/// On-policy update toward `r + γ Q(s', a')` for the action actually chosen at `s'`.
pub fn sarsa_update(
    q: &mut QTable,
    tr: &Transition,
    next_action: Option<ActionId>,
    cfg: &TabularConfig,
) {
    let target = match (tr.terminal, next_action) {
        (false, Some(a2)) => tr.reward + cfg.gamma * q.get(tr.next_state, a2.index()),
        _ => tr.reward,
    };
    q.blend(tr.state, tr.action.index(), target, cfg.lr_exponent);
    q.visit_state(tr.state);
}

/// An action choice with the stochastic-maximization diagnostics at that state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: ActionId,
    pub greedy: bool,
    pub epsilon: f64,
    /// `max_A Q(s,·) − max_C Q(s,·)`, when tracked.
    pub beta: Option<f64>,
    /// `max_C Q(s,·) / max_A Q(s,·)`, when tracked and the exact max is positive.
    pub omega: Option<f64>,
    pub candidates: usize,
}

#[derive(Debug, Clone)]
enum Tables {
    Single(QTable),
    Double(QTable, QTable),
}

/// A tabular agent owning its tables, maximizer and exploration stream.
#[derive(Debug, Clone)]
pub struct TabularAgent {
    cfg: TabularConfig,
    n_actions: usize,
    tables: Tables,
    maximizer: Maximizer,
    rng: ChaCha8Rng,
    pending: Option<Decision>,
}

impl TabularAgent {
    /// Randomness for exploration and for the subset sampler comes from
    /// separate streams of `seed`.
    pub fn new(cfg: TabularConfig, n_states: usize, n_actions: usize, seed: u64) -> Result<Self> {
        cfg.validate(n_actions)?;
        let maximizer = match cfg.maximization {
            Maximization::Exact => Maximizer::exact(n_actions),
            Maximization::Stochastic => {
                let k = cfg
                    .subset_size
                    .unwrap_or_else(|| default_subset_size(n_actions));
                let sampler =
                    SubsetSampler::with_rng(n_actions, k, stream_rng(seed, Stream::Sampler))?;
                let memory = match cfg.memory {
                    MemoryMode::PerState => ActionMemory::per_state(cfg.memory_capacity),
                    _ => ActionMemory::None,
                };
                Maximizer::stochastic(sampler, memory)
            }
        };
        let tables = match cfg.algorithm {
            Algorithm::DoubleQ => Tables::Double(
                QTable::new(n_states, n_actions),
                QTable::new(n_states, n_actions),
            ),
            _ => Tables::Single(QTable::new(n_states, n_actions)),
        };
        Ok(Self {
            cfg,
            n_actions,
            tables,
            maximizer,
            rng: stream_rng(seed, Stream::Agent),
            pending: None,
        })
    }

    pub fn config(&self) -> &TabularConfig {
        &self.cfg
    }

    /// Primary table (table `A` for Double Q-learning).
    pub fn table(&self) -> &QTable {
        match &self.tables {
            Tables::Single(q) | Tables::Double(q, _) => q,
        }
    }

    pub fn second_table(&self) -> Option<&QTable> {
        match &self.tables {
            Tables::Double(_, b) => Some(b),
            Tables::Single(_) => None,
        }
    }

    /// Values the policy acts on: `Q`, or `Q_A + Q_B` for Double Q-learning.
    pub fn policy_values(&self) -> QValues {
        match &self.tables {
            Tables::Single(q) => q.values().clone(),
            Tables::Double(a, b) => QValues::from_fn(a.n_states(), a.n_actions(), |s, x| {
                a.get(s, x) + b.get(s, x)
            }),
        }
    }

    #[inline]
    fn policy_value(tables: &Tables, s: usize, a: usize) -> f64 {
        match tables {
            Tables::Single(q) => q.get(s, a),
            Tables::Double(qa, qb) => qa.get(s, a) + qb.get(s, a),
        }
    }

    pub fn epsilon(&self, state: usize) -> f64 {
        match self.cfg.exploration {
            Exploration::Fixed(e) => e,
            Exploration::Decaying => exploration_rate(self.table().state_visits(state)),
        }
    }

    /// Exact greedy action for evaluation; does not touch memory or randomness.
    pub fn greedy_action(&self, state: usize) -> ActionId {
        exact_argmax(self.n_actions, |a| {
            Self::policy_value(&self.tables, state, a.index())
        })
        .0
    }

    /// ε-greedy choice with (stoch)argmax as the greedy part.
    pub fn select_action(&mut self, state: usize) -> Decision {
        let epsilon = self.epsilon(state);
        let explore = self.rng.random::<f64>() < epsilon;
        let random_action = explore.then(|| ActionId(self.rng.random_range(0..self.n_actions)));

        let tables = &self.tables;
        let value = |a: usize| Self::policy_value(tables, state, a);
        let (greedy, stoch_value, candidates) = match &mut self.maximizer {
            Maximizer::Exact { n_actions } => {
                let (a, v) = exact_argmax(*n_actions, |a| value(a.index()));
                (a, v, *n_actions)
            }
            Maximizer::Stochastic(m) => {
                let c = m.candidates(Recall::State(state));
                let (a, v) =
                    crate::stochmax::stoch_argmax(c, |a| value(a.index())).expect("non-empty");
                (a, v, c.len())
            }
        };
        let (beta, omega) = if self.cfg.track_stochmax {
            let max = exact_max(self.n_actions, |a| value(a.index()));
            let beta = max - stoch_value;
            (Some(beta), (max > 0.0).then(|| stoch_value / max))
        } else {
            (None, None)
        };

        let action = match random_action {
            Some(a) => a,
            None => {
                self.maximizer.record_exploited(state, greedy);
                greedy
            }
        };
        Decision {
            action,
            greedy: !explore,
            epsilon,
            beta,
            omega,
            candidates,
        }
    }

    /// Next action to play in `state`: the Sarsa look-ahead choice if one is pending.
    pub fn act(&mut self, state: usize) -> Decision {
        match self.pending.take() {
            Some(d) => d,
            None => self.select_action(state),
        }
    }

    /// Learns from a transition. `episode_over` clears any Sarsa look-ahead.
    pub fn learn(&mut self, tr: &Transition, episode_over: bool) {
        match self.cfg.algorithm {
            Algorithm::QLearning => {
                if let Tables::Single(q) = &mut self.tables {
                    q_update(q, tr, &self.cfg, &mut self.maximizer);
                }
            }
            Algorithm::DoubleQ => {
                if let Tables::Double(qa, qb) = &mut self.tables {
                    double_q_update(qa, qb, tr, &self.cfg, &mut self.maximizer, &mut self.rng);
                }
            }
            Algorithm::Sarsa => {
                let next = (!tr.terminal).then(|| self.select_action(tr.next_state));
                if let Tables::Single(q) = &mut self.tables {
                    sarsa_update(q, tr, next.map(|d| d.action), &self.cfg);
                }
                self.pending = if episode_over { None } else { next };
            }
        }
    }
}

/// Per-step record emitted by [`train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: u64,
    pub episode: u64,
    pub state: usize,
    pub decision: Decision,
    pub reward: f64,
    pub next_state: usize,
    pub terminated: bool,
    pub truncated: bool,
    /// Agent time for the step (selection and update, environment excluded).
    pub agent_ns: u64,
    pub env_ns: u64,
}

/// Runs `steps` interactions, resetting the environment at episode ends.
pub fn train<E, F>(agent: &mut TabularAgent, env: &mut E, steps: u64, mut on_step: F) -> Result<()>
where
    E: DiscreteEnv,
    F: FnMut(&StepInfo),
{
    let mut state = env.reset();
    let mut episode = 0;
    for step in 0..steps {
        let t0 = Instant::now();
        let decision = agent.act(state);
        let select_ns = t0.elapsed().as_nanos() as u64;
        let t_env = Instant::now();
        let out = env.step(decision.action)?;
        let t1 = Instant::now();
        let env_ns = (t1 - t_env).as_nanos() as u64;
        let tr = Transition {
            state,
            action: decision.action,
            reward: out.reward,
            next_state: out.next_state,
            terminal: out.terminated,
        };
        agent.learn(&tr, out.done());
        let agent_ns = select_ns + t1.elapsed().as_nanos() as u64;
        on_step(&StepInfo {
            step,
            episode,
            state,
            decision,
            reward: out.reward,
            next_state: out.next_state,
            terminated: out.terminated,
            truncated: out.truncated,
            agent_ns: agent_ns.max(1),
            env_ns: env_ns.max(1),
        });
        if out.done() {
            state = env.reset();
            episode += 1;
        } else {
            state = out.next_state;
        }
    }
    Ok(())
}

/// Undiscounted return of the exact greedy policy from a fresh episode,
/// capped at `max_steps` steps.
pub fn greedy_return<E: DiscreteEnv>(
    agent: &TabularAgent,
    env: &mut E,
    max_steps: usize,
) -> Result<f64> {
    let mut state = env.reset();
    let mut ret = 0.0;
    for _ in 0..max_steps {
        let out = env.step(agent.greedy_action(state))?;
        ret += out.reward;
        if out.done() {
            break;
        }
        state = out.next_state;
    }
    Ok(ret)
}

/// `Σ_{t≥1} t^-exponent` diverges and `Σ t^-2·exponent` converges exactly
/// when `0.5 < exponent <= 1`.
pub fn robbins_monro(exponent: f64) -> bool {
    exponent > 0.5 && exponent <= 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{CliffWalking, Environment, FrozenLake};
    use crate::FiniteMdp;
    use proptest::prelude::*;

    fn tr(s: usize, a: usize, r: f64, s2: usize, terminal: bool) -> Transition {
        Transition {
            state: s,
            action: ActionId(a),
            reward: r,
            next_state: s2,
            terminal,
        }
    }

    #[test]
    fn learning_rate_values() {
        assert_eq!(learning_rate(1, 0.8), 1.0);
        assert!((learning_rate(32, 0.8) - 0.0625).abs() < 1e-15);
        assert!((learning_rate(1024, 0.8) - 0.00390625).abs() < 1e-15);
    }

    #[test]
    fn exploration_rate_values() {
        assert_eq!(exploration_rate(1), 1.0);
        assert_eq!(exploration_rate(4), 0.5);
        assert!((exploration_rate(100) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn schedule_summability() {
        assert!(robbins_monro(0.8));
        assert!(robbins_monro(1.0));
        assert!(!robbins_monro(0.5));
        assert!(!robbins_monro(1.2));
        assert!(TabularConfig {
            lr_exponent: 0.5,
            ..Default::default()
        }
        .validate(4)
        .is_err());
    }

    #[test]
    fn first_update_copies_target() {
        let cfg = TabularConfig {
            gamma: 0.0,
            ..Default::default()
        };
        let mut q = QTable::new(2, 2);
        q_update(
            &mut q,
            &tr(0, 1, 3.0, 1, false),
            &cfg,
            &mut Maximizer::exact(2),
        );
        assert_eq!(q.get(0, 1), 3.0);
        assert_eq!(q.visits(0, 1), 2);
        assert_eq!(q.state_visits(0), 2);

        let mut q = QTable::new(2, 2);
        sarsa_update(&mut q, &tr(0, 0, -1.0, 1, false), Some(ActionId(1)), &cfg);
        assert_eq!(q.get(0, 0), -1.0);
    }

    /// With `r = 1` the gap to `1/(1−γ)` shrinks by `1 − (1−γ)α_z` per update.
    #[test]
    fn single_pair_follows_closed_form() {
        let cfg = TabularConfig::default();
        let mut q = QTable::new(1, 1);
        let mut m = Maximizer::exact(1);
        let mut gap = 20.0;
        for z in 1..=10_000u64 {
            q_update(&mut q, &tr(0, 0, 1.0, 0, false), &cfg, &mut m);
            gap *= 1.0 - 0.05 * learning_rate(z, 0.8);
        }
        assert!(
            (q.get(0, 0) - (20.0 - gap)).abs() < 1e-9,
            "{} vs {}",
            q.get(0, 0),
            20.0 - gap
        );
    }

    #[test]
    fn single_pair_converges_to_geometric_sum() {
        let cfg = TabularConfig::default();
        let mut q = QTable::new(1, 1);
        let mut m = Maximizer::exact(1);
        for _ in 0..200_000_000u64 {
            q_update(&mut q, &tr(0, 0, 1.0, 0, false), &cfg, &mut m);
        }
        assert!((q.get(0, 0) - 20.0).abs() < 1e-3, "{}", q.get(0, 0));
    }

    #[test]
    fn terminal_target_is_reward() {
        let cfg = TabularConfig::default();
        let mut q = QTable::new(2, 1);
        q.set(1, 0, 100.0);
        q_update(
            &mut q,
            &tr(0, 0, 2.0, 1, true),
            &cfg,
            &mut Maximizer::exact(1),
        );
        assert_eq!(q.get(0, 0), 2.0);
    }

    #[test]
    fn sarsa_self_loop_decays() {
        let cfg = TabularConfig {
            gamma: 0.9,
            lr_exponent: 1.0,
            ..Default::default()
        };
        let mut q = QTable::new(1, 1);
        q.set(0, 0, 5.0);
        let mut last = 5.0;
        for _ in 0..2000 {
            sarsa_update(&mut q, &tr(0, 0, 0.0, 0, false), Some(ActionId(0)), &cfg);
            assert!(q.get(0, 0) <= last);
            last = q.get(0, 0);
        }
        assert!(last < 5.0 * 0.9f64.powi(1) && last >= 0.0);
    }

    /// Chain 0 → 1 → 2 → terminal with one action; the final move pays 1.
    #[test]
    fn sarsa_chain_backs_up_reward() {
        let cfg = TabularConfig {
            gamma: 1.0,
            algorithm: Algorithm::Sarsa,
            maximization: Maximization::Exact,
            exploration: Exploration::Fixed(0.0),
            ..Default::default()
        };
        let mut q = QTable::new(3, 1);
        let sweeps = 10_000;
        for _ in 0..sweeps {
            for s in 0..3 {
                let terminal = s == 2;
                let r = if terminal { 1.0 } else { 0.0 };
                sarsa_update(
                    &mut q,
                    &tr(s, 0, r, s + 1, terminal),
                    (!terminal).then_some(ActionId(0)),
                    &cfg,
                );
            }
        }
        // Q(2) = 1 after its first update; Q(1) sees targets 0, 1, 1, ...
        // so its gap to 1 is Π_{z=2..N} (1 − z^-0.8)
        assert_eq!(q.get(2, 0), 1.0);
        let gap: f64 = (2..=sweeps as u64)
            .map(|z| 1.0 - learning_rate(z, 0.8))
            .product();
        assert!((q.get(1, 0) - (1.0 - gap)).abs() < 1e-12, "{}", q.get(1, 0));
        assert!((q.get(0, 0) - 1.0).abs() < 1e-2, "{}", q.get(0, 0));
    }

    #[test]
    fn double_q_zero_discount_tracks_mean_reward() {
        let cfg = TabularConfig {
            gamma: 0.0,
            lr_exponent: 1.0,
            algorithm: Algorithm::DoubleQ,
            ..Default::default()
        };
        let mut qa = QTable::new(1, 1);
        let mut qb = QTable::new(1, 1);
        let mut rng = stream_rng(3, Stream::Agent);
        let mut m = Maximizer::stochastic(SubsetSampler::new(1, 1, 0).unwrap(), ActionMemory::None);
        for i in 0..20_000 {
            let r = if i % 2 == 0 { 1.0 } else { 3.0 };
            double_q_update(
                &mut qa,
                &mut qb,
                &tr(0, 0, r, 0, false),
                &cfg,
                &mut m,
                &mut rng,
            );
        }
        assert!((qa.get(0, 0) - 2.0).abs() < 0.05);
        assert!((qb.get(0, 0) - 2.0).abs() < 0.05);
    }

    #[test]
    fn double_q_choice_is_fair() {
        let cfg = TabularConfig::default();
        let mut qa = QTable::new(1, 2);
        let mut qb = QTable::new(1, 2);
        let mut rng = stream_rng(11, Stream::Agent);
        let mut m = Maximizer::exact(2);
        let n = 100_000;
        let a_count = (0..n)
            .filter(|_| {
                double_q_update(
                    &mut qa,
                    &mut qb,
                    &tr(0, 0, 1.0, 0, false),
                    &cfg,
                    &mut m,
                    &mut rng,
                ) == Updated::A
            })
            .count();
        assert!((a_count as f64 / n as f64 - 0.5).abs() < 0.01);
        assert_eq!(qa.visits(0, 0) + qb.visits(0, 0), n as u64 + 2);
    }

    #[test]
    fn double_q_full_cover_matches_exact() {
        let cfg = TabularConfig::default();
        let mut base = QTable::new(2, 4);
        for a in 0..4 {
            base.set(1, a, [0.5, 2.0, -1.0, 2.0][a]);
        }
        let t = tr(0, 3, 1.0, 1, false);
        let (mut a1, mut b1) = (base.clone(), base.clone());
        let (mut a2, mut b2) = (base.clone(), base.clone());
        let mut r1 = stream_rng(4, Stream::Agent);
        let mut r2 = stream_rng(4, Stream::Agent);
        let mut stoch =
            Maximizer::stochastic(SubsetSampler::new(4, 4, 9).unwrap(), ActionMemory::None);
        double_q_update(&mut a1, &mut b1, &t, &cfg, &mut stoch, &mut r1);
        double_q_update(
            &mut a2,
            &mut b2,
            &t,
            &cfg,
            &mut Maximizer::exact(4),
            &mut r2,
        );
        assert_eq!((a1, b1), (a2, b2));
    }

    #[test]
    fn forced_exploration_is_uniform() {
        let cfg = TabularConfig {
            exploration: Exploration::Fixed(1.0),
            ..Default::default()
        };
        let n = 16;
        let mut agent = TabularAgent::new(cfg, 1, n, 5).unwrap();
        let draws = 100_000;
        let mut counts = vec![0f64; n];
        for _ in 0..draws {
            let d = agent.select_action(0);
            assert!(!d.greedy);
            counts[d.action.index()] += 1.0;
        }
        let expected = draws as f64 / n as f64;
        let chi2: f64 = counts
            .iter()
            .map(|c| (c - expected).powi(2) / expected)
            .sum();
        // χ²(15) upper 0.001 quantile
        assert!(chi2 < 37.697, "chi2 = {chi2}");
    }

    #[test]
    fn greedy_exact_and_full_cover_stochastic_agree() {
        let mut q = QValues::zeros(1, 3);
        for (a, v) in [1.0, 5.0, 2.0].into_iter().enumerate() {
            q.set(0, a, v);
        }
        for maximization in [Maximization::Exact, Maximization::Stochastic] {
            let cfg = TabularConfig {
                exploration: Exploration::Fixed(0.0),
                maximization,
                subset_size: Some(3),
                ..Default::default()
            };
            let mut agent = TabularAgent::new(cfg, 1, 3, 0).unwrap();
            if let Tables::Single(t) = &mut agent.tables {
                for a in 0..3 {
                    t.set(0, a, q.get(0, a));
                }
            }
            let d = agent.select_action(0);
            assert_eq!(d.action, ActionId(1));
            assert_eq!(d.beta, Some(0.0));
            assert_eq!(d.omega, Some(1.0));
        }
    }

    #[test]
    fn memory_records_only_greedy_actions() {
        let cfg = TabularConfig {
            exploration: Exploration::Fixed(1.0),
            subset_size: Some(1),
            ..Default::default()
        };
        let mut agent = TabularAgent::new(cfg, 1, 8, 1).unwrap();
        for _ in 0..100 {
            agent.select_action(0);
        }
        if let Maximizer::Stochastic(m) = &agent.maximizer {
            assert!(m.memory().remembered(0).is_empty());
        }
        agent.cfg.exploration = Exploration::Fixed(0.0);
        let d = agent.select_action(0);
        if let Maximizer::Stochastic(m) = &agent.maximizer {
            assert_eq!(m.memory().remembered(0), vec![d.action]);
        }
    }

    #[test]
    fn cliff_walking_exact_q_learning_finds_shortest_path() {
        let cfg = TabularConfig {
            maximization: Maximization::Exact,
            ..Default::default()
        };
        let mut env = CliffWalking::new();
        let mut agent = TabularAgent::new(cfg, 48, 4, 0).unwrap();
        train(&mut agent, &mut env, 100_000, |_| {}).unwrap();
        assert_eq!(greedy_return(&agent, &mut env, 100).unwrap(), -13.0);
    }

    fn full_cover_trajectory(maximization: Maximization, seed: u64) -> Vec<(usize, usize, u64)> {
        let cfg = TabularConfig {
            maximization,
            memory: MemoryMode::None,
            subset_size: Some(4),
            ..Default::default()
        };
        let mut env = FrozenLake::with_rng(true, stream_rng(seed, Stream::Env));
        let mut agent = TabularAgent::new(cfg, 16, 4, seed).unwrap();
        let mut out = Vec::new();
        train(&mut agent, &mut env, 2_000, |s| {
            out.push((s.state, s.decision.action.index(), s.reward.to_bits()))
        })
        .unwrap();
        let bits: Vec<u64> = agent
            .table()
            .values()
            .as_slice()
            .iter()
            .map(|v| v.to_bits())
            .collect();
        out.extend(bits.into_iter().map(|b| (0, 0, b)));
        out
    }

    #[test]
    fn full_cover_matches_q_learning() {
        assert_eq!(
            full_cover_trajectory(Maximization::Exact, 8),
            full_cover_trajectory(Maximization::Stochastic, 8)
        );
    }

    #[test]
    fn env_reset_state_matches_train_start() {
        let mut env = CliffWalking::new();
        assert_eq!(env.reset(), CliffWalking::START);
    }

    proptest! {
        #[test]
        fn q_values_stay_bounded(
            rewards in prop::collection::vec(-5.0f64..5.0, 2 * 3),
            gamma in 0.0f64..0.99,
            seed: u64,
            algorithm in prop_oneof![Just(Algorithm::QLearning), Just(Algorithm::DoubleQ), Just(Algorithm::Sarsa)],
            maximization in prop_oneof![Just(Maximization::Exact), Just(Maximization::Stochastic)],
        ) {
            let mdp = FiniteMdp::random(2, 3, crate::mdp::RewardDistribution::Uniform { low: 0.0, high: 1.0 }, seed).unwrap();
            let (rmin, rmax) = rewards.iter().fold((0.0f64, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
            let cfg = TabularConfig { gamma, algorithm, maximization, ..Default::default() };
            let mut agent = TabularAgent::new(cfg, 2, 3, seed).unwrap();
            let mut rng = stream_rng(seed, Stream::Env);
            let mut s = 0;
            for _ in 0..300 {
                let a = agent.act(s).action.index();
                let s2 = mdp.sample_next(s, a, &mut rng);
                agent.learn(&tr(s, a, rewards[s * 3 + a], s2, false), false);
                s = s2;
            }
            let lo = rmin / (1.0 - gamma) - 1e-9;
            let hi = rmax / (1.0 - gamma) + 1e-9;
            for table in std::iter::once(agent.table()).chain(agent.second_table()) {
                for &v in table.values().as_slice() {
                    prop_assert!(v.is_finite() && v >= lo && v <= hi, "{v} outside [{lo}, {hi}]");
                }
            }
        }
    }
}
