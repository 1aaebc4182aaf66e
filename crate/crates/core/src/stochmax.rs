//! Stochastic maximization primitives.
//!
//! `stoch_max` and `stoch_argmax` look for the maximum of a value oracle over
//! a candidate set `C = R ∪ M` rather than over all `n` actions:
//!
//! - `R` is a uniform random `k`-subset of the action space drawn without
//!   replacement (Floyd's algorithm, `O(k)` expected work regardless of `n`).
//! - `M` is an [`ActionMemory`]: the most recently exploited actions of the
//!   current state (discrete states), or a random sample of actions stored in
//!   a replay buffer (continuous states).
//!
//! With `k = ⌈log₂ n⌉` and a memory of the same order, each query costs
//! `O(log n)` oracle evaluations.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Index of an action in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for ActionId {
    fn from(i: usize) -> Self {
        ActionId(i)
    }
}

/// `⌈log₂ n⌉` for `n ≥ 1`.
pub fn ceil_log2(n: usize) -> usize {
    assert!(n >= 1, "ceil_log2 of zero");
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// Default random-subset size `⌈log₂ n⌉`, at least 1.
pub fn default_subset_size(n: usize) -> usize {
    ceil_log2(n).max(1)
}

/// Appends `k` distinct uniform indices from `[0, n)` to `out`.
///
/// Floyd's algorithm: every `k`-subset is equally likely. Small `k` uses a
/// linear membership scan over the freshly written tail of `out`.
pub fn sample_distinct<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize, out: &mut Vec<usize>) {
    debug_assert!(k <= n);
    let start = out.len();
    if k <= 32 {
        for j in (n - k)..n {
            let t = rng.random_range(0..=j);
            let pick = if out[start..].contains(&t) { j } else { t };
            out.push(pick);
        }
    } else {
        let mut seen = HashSet::with_capacity(k);
        for j in (n - k)..n {
            let t = rng.random_range(0..=j);
            let pick = if seen.contains(&t) { j } else { t };
            seen.insert(pick);
            out.push(pick);
        }
    }
}

/// Uniform sampler of `k`-subsets of `n` actions, deterministic under its seed.
#[derive(Debug, Clone)]
pub struct SubsetSampler {
    n: usize,
    k: usize,
    rng: ChaCha8Rng,
    scratch: Vec<usize>,
}

impl SubsetSampler {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        Self::with_rng(n, k, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(n: usize, k: usize, rng: ChaCha8Rng) -> Result<Self> {
        if k < 1 || k > n {
            return Err(Error::InvalidConfig(format!(
                "subset size k={k} must satisfy 1 <= k <= n={n}"
            )));
        }
        Ok(Self {
            n,
            k,
            rng,
            scratch: Vec::with_capacity(k),
        })
    }

    /// Sampler with the default subset size `⌈log₂ n⌉`.
    pub fn with_default_k(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("action space is empty".into()));
        }
        Self::new(n, default_subset_size(n), seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Draws a fresh random subset `R`.
    pub fn sample(&mut self) -> CandidateSet {
        let mut set = CandidateSet::with_capacity(self.k);
        self.sample_into(&mut set);
        set
    }

    /// Appends a fresh random subset to `set` (skipping ids already present).
    pub fn sample_into(&mut self, set: &mut CandidateSet) {
        self.scratch.clear();
        sample_distinct(&mut self.rng, self.n, self.k, &mut self.scratch);
        for &i in &self.scratch {
            set.push(ActionId(i));
        }
    }
}

/// How the memory part `M` of the candidate set is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryMode {
    /// Most recently exploited actions, tracked per discrete state.
    #[default]
    PerState,
    /// Random sample of actions held in a shared pool (the replay buffer).
    Global,
    None,
}

impl std::str::FromStr for MemoryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-state" => Ok(MemoryMode::PerState),
            "global" => Ok(MemoryMode::Global),
            "none" => Ok(MemoryMode::None),
            other => Err(Error::InvalidConfig(format!(
                "unknown memory mode '{other}'"
            ))),
        }
    }
}

/// Default number of exploited actions remembered per state.
pub const DEFAULT_PER_STATE_CAPACITY: usize = 2;

/// Context needed to recall memory entries.
#[derive(Debug, Clone, Copy)]
pub enum Recall<'a> {
    /// Discrete state index (per-state memory).
    State(usize),
    /// Pool of stored actions to sample from (global memory).
    Pool(&'a [ActionId]),
    /// No memory context; recalls nothing.
    Nothing,
}

/// The memory set `M` of recently exploited actions.
#[derive(Debug, Clone)]
pub enum ActionMemory {
    None,
    PerState {
        capacity: usize,
        recent: HashMap<usize, VecDeque<ActionId>>,
    },
    Global {
        sample_size: usize,
    },
}

impl ActionMemory {
    /// Memory for `mode` with default sizes for an action space of `n_actions`.
    pub fn new(mode: MemoryMode, n_actions: usize) -> Self {
        match mode {
            MemoryMode::None => ActionMemory::None,
            MemoryMode::PerState => Self::per_state(DEFAULT_PER_STATE_CAPACITY),
            MemoryMode::Global => Self::global(default_subset_size(n_actions)),
        }
    }

    pub fn per_state(capacity: usize) -> Self {
        ActionMemory::PerState {
            capacity: capacity.max(1),
            recent: HashMap::new(),
        }
    }

    pub fn global(sample_size: usize) -> Self {
        ActionMemory::Global { sample_size }
    }

    pub fn mode(&self) -> MemoryMode {
        match self {
            ActionMemory::None => MemoryMode::None,
            ActionMemory::PerState { .. } => MemoryMode::PerState,
            ActionMemory::Global { .. } => MemoryMode::Global,
        }
    }

    /// Upper bound on how many actions a recall can contribute.
    pub fn max_recall(&self) -> usize {
        match self {
            ActionMemory::None => 0,
            ActionMemory::PerState { capacity, .. } => *capacity,
            ActionMemory::Global { sample_size } => *sample_size,
        }
    }

    /// Records an exploited (greedy) action. Only per-state memory stores anything.
    pub fn record(&mut self, state: usize, action: ActionId) {
        if let ActionMemory::PerState { capacity, recent } = self {
            let slot = recent.entry(state).or_default();
            if let Some(pos) = slot.iter().position(|&a| a == action) {
                slot.remove(pos);
            }
            slot.push_front(action);
            slot.truncate(*capacity);
        }
    }

    /// Actions currently remembered for `state`, most recent first.
    pub fn remembered(&self, state: usize) -> Vec<ActionId> {
        match self {
            ActionMemory::PerState { recent, .. } => recent
                .get(&state)
                .map(|d| d.iter().copied().collect())
                .unwrap_or_default(),
            _ => Vec::new(),
        }
    }

    /// Appends the memory set for `ctx` to `out`.
    ///
    /// Global memory returns exactly `min(sample_size, pool.len())` actions,
    /// drawn from distinct pool positions.
    pub fn recall<R: Rng + ?Sized>(&self, ctx: Recall<'_>, rng: &mut R, out: &mut Vec<ActionId>) {
        match (self, ctx) {
            (ActionMemory::PerState { recent, .. }, Recall::State(s)) => {
                if let Some(slot) = recent.get(&s) {
                    out.extend(slot.iter().copied());
                }
            }
            (ActionMemory::Global { sample_size }, Recall::Pool(pool)) => {
                let m = (*sample_size).min(pool.len());
                if m == 0 {
                    return;
                }
                let mut idx = Vec::with_capacity(m);
                sample_distinct(rng, pool.len(), m, &mut idx);
                out.extend(idx.into_iter().map(|i| pool[i]));
            }
            _ => {}
        }
    }
}

/// Ordered list of distinct candidate actions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateSet {
    actions: Vec<ActionId>,
}

impl CandidateSet {
    pub fn with_capacity(cap: usize) -> Self {
        Self {
            actions: Vec::with_capacity(cap),
        }
    }

    /// The whole action space `{0, …, n-1}`.
    pub fn full(n: usize) -> Self {
        Self {
            actions: (0..n).map(ActionId).collect(),
        }
    }

    /// Builds a set from `actions`, dropping repeats and keeping first occurrences.
    pub fn from_actions<I: IntoIterator<Item = ActionId>>(actions: I) -> Self {
        let mut set = Self::default();
        for a in actions {
            set.push(a);
        }
        set
    }

    /// `r ∪ m`, with `r`'s order first.
    pub fn union(r: &[ActionId], m: &[ActionId]) -> Self {
        Self::from_actions(r.iter().chain(m.iter()).copied())
    }

    /// Inserts `a` unless already present. Returns whether it was inserted.
    pub fn push(&mut self, a: ActionId) -> bool {
        if self.actions.contains(&a) {
            false
        } else {
            self.actions.push(a);
            true
        }
    }

    pub fn clear(&mut self) {
        self.actions.clear();
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn contains(&self, a: ActionId) -> bool {
        self.actions.contains(&a)
    }

    pub fn as_slice(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn iter(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.actions.iter().copied()
    }
}

/// Fills `out` with `C = R ∪ M`: a fresh random subset plus recalled memory.
pub fn build_candidates_into(
    sampler: &mut SubsetSampler,
    memory: &ActionMemory,
    ctx: Recall<'_>,
    out: &mut CandidateSet,
) {
    out.clear();
    sampler.sample_into(out);
    let mut recalled = Vec::with_capacity(memory.max_recall());
    memory.recall(ctx, sampler.rng_mut(), &mut recalled);
    for a in recalled {
        out.push(a);
    }
}

pub fn build_candidates(
    sampler: &mut SubsetSampler,
    memory: &ActionMemory,
    ctx: Recall<'_>,
) -> CandidateSet {
    let mut out = CandidateSet::with_capacity(sampler.k() + memory.max_recall());
    build_candidates_into(sampler, memory, ctx, &mut out);
    out
}

/// Maximizer over `candidates`: `(argmax, max)`, ties to the lowest action id.
pub fn stoch_argmax<F>(candidates: &CandidateSet, mut values: F) -> Result<(ActionId, f64)>
where
    F: FnMut(ActionId) -> f64,
{
    let mut iter = candidates.iter();
    let first = iter.next().ok_or(Error::EmptyCandidates)?;
    let mut best = (first, values(first));
    for a in iter {
        let v = values(a);
        if v > best.1 || (v == best.1 && a < best.0) {
            best = (a, v);
        }
    }
    Ok(best)
}

/// Maximum of `values` over `candidates`.
pub fn stoch_max<F>(candidates: &CandidateSet, values: F) -> Result<f64>
where
    F: FnMut(ActionId) -> f64,
{
    stoch_argmax(candidates, values).map(|(_, v)| v)
}

/// Exact `(argmax, max)` over all `n` actions, ties to the lowest id.
pub fn exact_argmax<F>(n: usize, mut values: F) -> (ActionId, f64)
where
    F: FnMut(ActionId) -> f64,
{
    assert!(n > 0, "exact_argmax over an empty action space");
    let mut best = (ActionId(0), values(ActionId(0)));
    for i in 1..n {
        let v = values(ActionId(i));
        if v > best.1 {
            best = (ActionId(i), v);
        }
    }
    best
}

pub fn exact_max<F>(n: usize, values: F) -> f64
where
    F: FnMut(ActionId) -> f64,
{
    exact_argmax(n, values).1
}

/// A subset sampler and an action memory, drawing a fresh `R` on every query.
#[derive(Debug, Clone)]
pub struct StochMaximizer {
    sampler: SubsetSampler,
    memory: ActionMemory,
    scratch: CandidateSet,
}

impl StochMaximizer {
    pub fn new(sampler: SubsetSampler, memory: ActionMemory) -> Self {
        let cap = sampler.k() + memory.max_recall();
        Self {
            sampler,
            memory,
            scratch: CandidateSet::with_capacity(cap),
        }
    }

    pub fn sampler(&self) -> &SubsetSampler {
        &self.sampler
    }

    pub fn memory(&self) -> &ActionMemory {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut ActionMemory {
        &mut self.memory
    }

    /// Largest candidate set this maximizer can produce.
    pub fn max_candidates(&self) -> usize {
        (self.sampler.k() + self.memory.max_recall()).min(self.sampler.n())
    }

    /// Builds a fresh candidate set.
    pub fn candidates(&mut self, ctx: Recall<'_>) -> &CandidateSet {
        build_candidates_into(&mut self.sampler, &self.memory, ctx, &mut self.scratch);
        &self.scratch
    }

    /// `stoch_argmax` over a fresh candidate set.
    pub fn argmax<F>(&mut self, ctx: Recall<'_>, values: F) -> (ActionId, f64)
    where
        F: FnMut(ActionId) -> f64,
    {
        let c = self.candidates(ctx);
        stoch_argmax(c, values).expect("candidate set holds at least k >= 1 actions")
    }

    pub fn max<F>(&mut self, ctx: Recall<'_>, values: F) -> f64
    where
        F: FnMut(ActionId) -> f64,
    {
        self.argmax(ctx, values).1
    }

    pub fn record_exploited(&mut self, state: usize, action: ActionId) {
        self.memory.record(state, action);
    }
}
