//! Training runs: one worker per seed, one curve file per seed, one summary
//! JSON per run, and deep-agent checkpoints.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;
use stochq::approx::{greedy_episode_length, DeepAgent, Rollout};
use stochq::envs::{CartPole, CliffWalking, DiscreteEnv, FrozenLake, GeneratedMdp};
use stochq::seeding::{stream_rng, Stream};
use stochq::tabular::{self, greedy_return, TabularAgent};

use crate::config::{EnvSpec, RunConfig};
use crate::curve::{CurveRow, CurveWriter};
use crate::error::{HarnessError, Result};
use crate::summarize::MeanStd;

/// Reward smoothing windows: 1000 steps for tabular runs, 100 for deep runs.
pub const TABULAR_WINDOW: usize = 1000;
pub const DEEP_WINDOW: usize = 100;
/// Final stretch of a deep run over which ω is averaged.
pub const OMEGA_TAIL: usize = 10_000;
const EVAL_TOL: f64 = 1e-10;
const EVAL_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub steps: u64,
    pub episodes: u64,
    pub curve: PathBuf,
    pub final_cumulative_reward: f64,
    /// Mean instantaneous reward over the last smoothing window.
    pub mean_last_window_reward: f64,
    /// Undiscounted return of one exact-greedy evaluation episode.
    pub greedy_return: f64,
    /// Tabular: `max_s V*(s) − V^π(s)` for the greedy policy under the exact tables.
    pub policy_gap: Option<f64>,
    /// Deep: mean length of the last (up to) 50 finished episodes.
    pub mean_last_50_episode_length: Option<f64>,
    /// Mean ω over the final (up to) 10⁴ steps where ω is defined.
    pub mean_tail_omega: Option<f64>,
    /// Smallest β seen; `None` when β is not tracked.
    pub min_beta: Option<f64>,
    pub all_beta_finite: bool,
    pub checkpoint: Option<PathBuf>,
    pub mean_step_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub final_cumulative_reward: MeanStd,
    pub greedy_return: MeanStd,
    pub mean_step_ns: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub variant: String,
    pub config: RunConfig,
    pub seeds: Vec<SeedSummary>,
    pub aggregate: Aggregate,
}

pub fn curve_path(out: &Path, variant: &str, seed: u64) -> PathBuf {
    out.join(format!("{variant}_seed{seed}.csv"))
}

pub fn summary_path(out: &Path, variant: &str) -> PathBuf {
    out.join(format!("{variant}_summary.json"))
}

pub fn checkpoint_path(out: &Path, variant: &str, seed: u64, step: Option<u64>) -> PathBuf {
    match step {
        Some(s) => out.join(format!("{variant}_seed{seed}_step{s}.ckpt.json")),
        None => out.join(format!("{variant}_seed{seed}.ckpt.json")),
    }
}

/// Streaming statistics collected while the curve is written.
struct Tracker {
    cumulative: f64,
    rewards: Vec<f64>,
    omegas: Vec<Option<f64>>,
    min_beta: Option<f64>,
    beta_finite: bool,
    step_ns: u128,
    episode_lengths: Vec<u64>,
    current_length: u64,
}

impl Tracker {
    fn new() -> Self {
        Self {
            cumulative: 0.0,
            rewards: Vec::new(),
            omegas: Vec::new(),
            min_beta: None,
            beta_finite: true,
            step_ns: 0,
            episode_lengths: Vec::new(),
            current_length: 0,
        }
    }

    fn push(&mut self, reward: f64, beta: Option<f64>, omega: Option<f64>, ns: u64, done: bool) {
        self.cumulative += reward;
        self.rewards.push(reward);
        self.omegas.push(omega);
        if let Some(b) = beta {
            self.beta_finite &= b.is_finite();
            self.min_beta = Some(self.min_beta.map_or(b, |m| m.min(b)));
        }
        self.step_ns += ns as u128;
        self.current_length += 1;
        if done {
            self.episode_lengths.push(self.current_length);
            self.current_length = 0;
        }
    }

    fn tail_mean_reward(&self, window: usize) -> f64 {
        let tail = &self.rewards[self.rewards.len().saturating_sub(window)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    fn tail_omega(&self) -> Option<f64> {
        let tail: Vec<f64> = self.omegas[self.omegas.len().saturating_sub(OMEGA_TAIL)..]
            .iter()
            .flatten()
            .copied()
            .collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

/// Runs `work` for every seed on up to `available_parallelism` threads;
/// results come back in seed order.
fn fan_out<F>(seeds: &[u64], work: F) -> Result<Vec<SeedSummary>>
where
    F: Fn(u64) -> Result<SeedSummary> + Sync,
{
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(seeds.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SeedSummary>>>> =
        Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let r = work(seeds[i]);
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect()
}

fn finish(cfg: &RunConfig, seeds: Vec<SeedSummary>) -> Result<RunSummary> {
    let stat =
        |f: &dyn Fn(&SeedSummary) -> f64| MeanStd::of(&seeds.iter().map(f).collect::<Vec<_>>());
    let mean_step_ns = if seeds.iter().all(|s| s.mean_step_ns.is_some()) {
        Some(stat(&|s| s.mean_step_ns.unwrap_or_default()))
    } else {
        None
    };
    let summary = RunSummary {
        variant: cfg.variant.name().to_string(),
        config: cfg.clone(),
        aggregate: Aggregate {
            final_cumulative_reward: stat(&|s| s.final_cumulative_reward),
            greedy_return: stat(&|s| s.greedy_return),
            mean_step_ns,
        },
        seeds,
    };
    write_json(&summary_path(&cfg.out_dir, cfg.variant.name()), &summary)?;
    Ok(summary)
}

/// Dispatches on the variant family.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    if cfg.variant.is_deep() {
        run_deep(cfg)
    } else {
        run_tabular(cfg)
    }
}

pub fn run_tabular(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    if cfg.variant.is_deep() {
        return Err(HarnessError::Config(format!(
            "{} is not a tabular variant",
            cfg.variant
        )));
    }
    ensure_dir(&cfg.out_dir)?;
    let seeds = fan_out(&cfg.seeds(), |seed| match &cfg.env {
        EnvSpec::CliffWalking => tabular_seed(cfg, seed, CliffWalking::new(), CliffWalking::new()),
        EnvSpec::FrozenLake { slippery } => tabular_seed(
            cfg,
            seed,
            FrozenLake::with_rng(*slippery, stream_rng(seed, Stream::Env)),
            FrozenLake::with_rng(*slippery, stream_rng(seed, Stream::Eval)),
        ),
        EnvSpec::Generated(spec) => tabular_seed(
            cfg,
            seed,
            GeneratedMdp::with_rng(spec, stream_rng(seed, Stream::Env))?,
            GeneratedMdp::with_rng(spec, stream_rng(seed, Stream::Eval))?,
        ),
        EnvSpec::CartPole(_) => Err(HarnessError::Config(
            "tabular variants need a discrete-state environment".into(),
        )),
    })?;
    finish(cfg, seeds)
}

fn tabular_seed<E: DiscreteEnv>(
    cfg: &RunConfig,
    seed: u64,
    mut env: E,
    mut eval_env: E,
) -> Result<SeedSummary> {
    let tcfg = cfg.tabular_config()?;
    let mut agent = TabularAgent::new(tcfg.clone(), env.n_states(), env.n_actions(), seed)?;
    let path = curve_path(&cfg.out_dir, cfg.variant.name(), seed);
    let mut writer = CurveWriter::create(&path)?;
    let mut tracker = Tracker::new();
    let mut episodes = 0;
    let mut write_err = None;
    tabular::train(&mut agent, &mut env, cfg.steps, |info| {
        let d = &info.decision;
        let ns = info.agent_ns + info.env_ns;
        tracker.push(
            info.reward,
            d.beta,
            d.omega,
            ns,
            info.terminated || info.truncated,
        );
        episodes = info.episode + u64::from(info.terminated || info.truncated);
        if write_err.is_some() {
            return;
        }
        let row = CurveRow {
            step: info.step,
            episode: info.episode,
            reward: info.reward,
            cumulative_reward: tracker.cumulative,
            epsilon: d.epsilon,
            beta: d.beta,
            omega: d.omega,
            wall_time_ns: cfg.record_wall_time.then_some(ns),
            candidates: d.candidates,
        };
        if let Err(e) = writer.write(&row) {
            write_err = Some(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    writer.finish()?;

    let tables = env.tables();
    let v_star = tables.optimal_q(tcfg.gamma.min(1.0 - 1e-9), EVAL_TOL, EVAL_ITERS)?;
    let values = agent.policy_values();
    let v_pi = tables.evaluate_policy(
        &values.greedy_policy(),
        tcfg.gamma.min(1.0 - 1e-9),
        EVAL_TOL,
        EVAL_ITERS,
    )?;
    let policy_gap = (0..tables.n_states())
        .filter(|&s| !tables.is_terminal(s))
        .map(|s| v_star.max_row(s) - v_pi[s])
        .fold(0.0, f64::max);

    Ok(SeedSummary {
        seed,
        steps: cfg.steps,
        episodes,
        curve: path,
        final_cumulative_reward: tracker.cumulative,
        mean_last_window_reward: tracker.tail_mean_reward(TABULAR_WINDOW),
        greedy_return: greedy_return(&agent, &mut eval_env, cfg.eval_max_steps)?,
        policy_gap: Some(policy_gap),
        mean_last_50_episode_length: None,
        mean_tail_omega: tracker.tail_omega(),
        min_beta: tracker.min_beta,
        all_beta_finite: tracker.beta_finite,
        checkpoint: None,
        mean_step_ns: cfg
            .record_wall_time
            .then(|| tracker.step_ns as f64 / cfg.steps as f64),
    })
}

pub fn run_deep(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let EnvSpec::CartPole(params) = &cfg.env else {
        return Err(HarnessError::Config(
            "deep variants need the cart-pole environment".into(),
        ));
    };
    if !cfg.variant.is_deep() {
        return Err(HarnessError::Config(format!(
            "{} is not a deep variant",
            cfg.variant
        )));
    }
    ensure_dir(&cfg.out_dir)?;
    let seeds = fan_out(&cfg.seeds(), |seed| {
        let env = CartPole::with_rng(params.clone(), stream_rng(seed, Stream::Env))?;
        let eval_env = CartPole::with_rng(params.clone(), stream_rng(seed, Stream::Eval))?;
        deep_seed(cfg, seed, env, eval_env)
    })?;
    finish(cfg, seeds)
}

fn deep_seed(
    cfg: &RunConfig,
    seed: u64,
    mut env: CartPole,
    mut eval_env: CartPole,
) -> Result<SeedSummary> {
    let name = cfg.variant.name();
    let mut agent = DeepAgent::new(cfg.deep_config()?, &env, seed)?;
    let path = curve_path(&cfg.out_dir, name, seed);
    let mut writer = CurveWriter::create(&path)?;
    let mut tracker = Tracker::new();
    let mut rollout = Rollout::new(&mut env);
    let mut episodes = 0;
    for _ in 0..cfg.steps {
        let info = rollout.step(&mut agent)?;
        let d = &info.decision;
        let done = info.terminated || info.truncated;
        let ns = info.select_ns + info.env_ns + info.update_ns;
        tracker.push(info.reward, d.beta, d.omega, ns, done);
        episodes = info.episode + u64::from(done);
        writer.write(&CurveRow {
            step: info.step,
            episode: info.episode,
            reward: info.reward,
            cumulative_reward: tracker.cumulative,
            epsilon: d.epsilon,
            beta: d.beta,
            omega: d.omega,
            wall_time_ns: cfg.record_wall_time.then_some(ns),
            candidates: d.candidates,
        })?;
        let done_steps = info.step + 1;
        if cfg.checkpoint_interval.is_some_and(|k| done_steps % k == 0) && done_steps < cfg.steps {
            agent.checkpoint().save(&checkpoint_path(
                &cfg.out_dir,
                name,
                seed,
                Some(done_steps),
            ))?;
        }
    }
    writer.finish()?;
    let ckpt = checkpoint_path(&cfg.out_dir, name, seed, None);
    agent.checkpoint().save(&ckpt)?;

    let lengths = &tracker.episode_lengths;
    let last = &lengths[lengths.len().saturating_sub(50)..];
    let greedy = greedy_episode_length(&agent, &mut eval_env, cfg.eval_max_steps)?;
    Ok(SeedSummary {
        seed,
        steps: cfg.steps,
        episodes,
        curve: path,
        final_cumulative_reward: tracker.cumulative,
        mean_last_window_reward: tracker.tail_mean_reward(DEEP_WINDOW),
        // the pole pays one unit per step, so the greedy return is the episode length
        greedy_return: greedy as f64,
        policy_gap: None,
        mean_last_50_episode_length: (!last.is_empty())
            .then(|| last.iter().sum::<u64>() as f64 / last.len() as f64),
        mean_tail_omega: tracker.tail_omega(),
        min_beta: tracker.min_beta,
        all_beta_finite: tracker.beta_finite,
        checkpoint: Some(ckpt),
        mean_step_ns: cfg
            .record_wall_time
            .then(|| tracker.step_ns as f64 / cfg.steps as f64),
    })
}
