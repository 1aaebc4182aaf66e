//! Finite MDP tables and dense state-action value matrices.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::stochmax::{exact_argmax, ActionId};
use crate::{Error, Result};

/// Dense `|S| × |A|` array of values, row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QValues {
    n_states: usize,
    n_actions: usize,
    data: Vec<f64>,
}

impl QValues {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, v: f64) -> Self {
        Self {
            n_states,
            n_actions,
            data: vec![v; n_states * n_actions],
        }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(
        n_states: usize,
        n_actions: usize,
        mut f: F,
    ) -> Self {
        let mut data = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                data.push(f(s, a));
            }
        }
        Self {
            n_states,
            n_actions,
            data,
        }
    }

    pub fn from_vec(n_states: usize, n_actions: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch {
                expected: n_states * n_actions,
                got: data.len(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            data,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.data[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.data[s * self.n_actions + a] = v;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_row(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action in state `s`, ties to the lowest id.
    pub fn argmax_row(&self, s: usize) -> ActionId {
        let row = self.row(s);
        exact_argmax(self.n_actions, |a| row[a.index()]).0
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &QValues) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn greedy_policy(&self) -> Vec<ActionId> {
        (0..self.n_states).map(|s| self.argmax_row(s)).collect()
    }
}

/// Reward law for randomly generated MDPs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardDistribution {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std: f64 },
}

/// Tabular MDP: rewards `r(s,a)`, transitions `P(s'|s,a)` and terminal flags.
///
/// Terminal states contribute no bootstrap value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    rewards: Vec<f64>,
    transitions: Vec<f64>,
    terminal: Vec<bool>,
}

impl FiniteMdp {
    /// `rewards[s * |A| + a]`, `transitions[(s * |A| + a) * |S| + s']`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidSpec(
                "MDP needs at least one state and one action".into(),
            ));
        }
        if rewards.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch {
                expected: n_states * n_actions,
                got: rewards.len(),
            });
        }
        if transitions.len() != n_states * n_actions * n_states {
            return Err(Error::ShapeMismatch {
                expected: n_states * n_actions * n_states,
                got: transitions.len(),
            });
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidSpec("rewards must be finite".into()));
        }
        for (i, row) in transitions.chunks(n_states).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidSpec(format!(
                    "transition row for (s={}, a={}) sums to {sum}",
                    i / n_actions,
                    i % n_actions
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            rewards,
            transitions,
            terminal: vec![false; n_states],
        })
    }

    pub fn with_terminals(mut self, terminal: Vec<bool>) -> Result<Self> {
        if terminal.len() != self.n_states {
            return Err(Error::ShapeMismatch {
                expected: self.n_states,
                got: terminal.len(),
            });
        }
        self.terminal = terminal;
        Ok(self)
    }

    /// Random MDP: i.i.d. rewards and a Dirichlet(1) next-state law per pair.
    pub fn random(
        n_states: usize,
        n_actions: usize,
        rewards: RewardDistribution,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r: Vec<f64> = match rewards {
            RewardDistribution::Uniform { low, high } => {
                if !(low < high) {
                    return Err(Error::InvalidSpec(format!(
                        "uniform reward bounds [{low}, {high}]"
                    )));
                }
                (0..n_states * n_actions)
                    .map(|_| rng.random_range(low..high))
                    .collect()
            }
            RewardDistribution::Normal { mean, std } => {
                let dist = Normal::new(mean, std).map_err(|e| Error::InvalidSpec(e.to_string()))?;
                (0..n_states * n_actions)
                    .map(|_| dist.sample(&mut rng))
                    .collect()
            }
        };
        let mut p = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let draws: Vec<f64> = (0..n_states).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            p.extend(draws.into_iter().map(|x| x / total));
        }
        Self::new(n_states, n_actions, r, p)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transitions[base..base + self.n_states]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Samples `s'` by inverse CDF.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = self.transition_row(s, a);
        for (next, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return next;
            }
        }
        // rounding slack: last state with positive mass
        row.iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.n_states - 1)
    }

    /// Classical optimal action values by value iteration,
    /// `Q(s,a) = r(s,a) + γ Σ P(s'|s,a) max_b Q(s',b)`.
    pub fn optimal_q(&self, gamma: f64, tol: f64, max_iters: usize) -> Result<QValues> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParams(format!(
                "value iteration needs gamma in [0,1), got {gamma}"
            )));
        }
        let mut q = QValues::zeros(self.n_states, self.n_actions);
        let mut v = vec![0.0; self.n_states];
        for _ in 0..max_iters {
            for (s, vs) in v.iter_mut().enumerate() {
                *vs = if self.terminal[s] { 0.0 } else { q.max_row(s) };
            }
            let mut step: f64 = 0.0;
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    let backup: f64 = self
                        .transition_row(s, a)
                        .iter()
                        .zip(&v)
                        .map(|(p, vn)| p * vn)
                        .sum();
                    let new = self.reward(s, a) + gamma * backup;
                    step = step.max((new - q.get(s, a)).abs());
                    q.set(s, a, new);
                }
            }
            if step <= tol {
                return Ok(q);
            }
        }
        Err(Error::NonConvergence {
            iters: max_iters,
            last_step: f64::NAN,
        })
    }
}

impl FiniteMdp {
    /// State values of a deterministic policy by iterating
    /// `V(s) = r(s,π(s)) + γ Σ P(s'|s,π(s)) V(s')`, with `V = 0` on terminals.
    pub fn evaluate_policy(
        &self,
        policy: &[ActionId],
        gamma: f64,
        tol: f64,
        max_iters: usize,
    ) -> Result<Vec<f64>> {
        if policy.len() != self.n_states {
            return Err(Error::ShapeMismatch {
                expected: self.n_states,
                got: policy.len(),
            });
        }
        if let Some(a) = policy.iter().find(|a| a.index() >= self.n_actions) {
            return Err(Error::IndexOutOfRange {
                index: a.index(),
                size: self.n_actions,
            });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParams(format!(
                "policy evaluation needs gamma in [0,1), got {gamma}"
            )));
        }
        let mut v = vec![0.0; self.n_states];
        let mut last_step = f64::NAN;
        for _ in 0..max_iters {
            let mut step: f64 = 0.0;
            let next: Vec<f64> = (0..self.n_states)
                .map(|s| {
                    if self.terminal[s] {
                        return 0.0;
                    }
                    let a = policy[s].index();
                    let backup: f64 = self
                        .transition_row(s, a)
                        .iter()
                        .zip(&v)
                        .map(|(p, vn)| p * vn)
                        .sum();
                    self.reward(s, a) + gamma * backup
                })
                .collect();
            for (old, new) in v.iter().zip(&next) {
                step = step.max((new - old).abs());
            }
            v = next;
            last_step = step;
            if step <= tol {
                return Ok(v);
            }
        }
        Err(Error::NonConvergence {
            iters: max_iters,
            last_step,
        })
    }
}
