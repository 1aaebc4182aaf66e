//! Wall-time scaling of action selection and of full training steps.
//!
//! Each series is timed with a monotonic clock, one operation per sample,
//! on the calling thread only. Medians and quartiles summarize the samples
//! and a least-squares fit of `ln median` against `ln n` gives the scaling
//! exponent of each series.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use stochq::approx::{DeepAgent, DeepConfig, Rollout};
use stochq::envs::{CartPole, Environment};
use stochq::stochmax::ceil_log2;
use stochq::tabular::Maximization;

use crate::error::{HarnessError, Result};

pub const MIN_REPETITIONS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    /// Action counts, strictly ascending.
    pub n_list: Vec<usize>,
    pub repetitions: usize,
    /// Also time full training steps (select, env step, replay update) of DQN and StochDQN.
    pub train_step: bool,
    pub seed: u64,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            n_list: (6..=14).map(|e| 1usize << e).collect(),
            repetitions: MIN_REPETITIONS,
            train_step: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub series: String,
    pub median_ns: f64,
    pub q1_ns: f64,
    pub q3_ns: f64,
    /// Largest number of network forward passes in one sampled selection.
    pub max_calls: Option<u64>,
}

impl BenchRow {
    pub fn iqr_ns(&self) -> f64 {
        self.q3_ns - self.q1_ns
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// `(series, log-log slope)` in first-appearance order.
    pub slopes: Vec<(String, f64)>,
}

impl BenchReport {
    pub fn slope(&self, series: &str) -> Option<f64> {
        self.slopes
            .iter()
            .find(|(s, _)| s == series)
            .map(|(_, v)| *v)
    }

    pub fn series(&self, series: &str) -> impl Iterator<Item = &BenchRow> {
        let series = series.to_string();
        self.rows.iter().filter(move |r| r.series == series)
    }
}

pub const STOCH_SELECT: &str = "stoch-select";
pub const EXACT_SELECT: &str = "exact-select";

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn row(n: usize, series: &str, mut samples: Vec<f64>, max_calls: Option<u64>) -> BenchRow {
    samples.sort_by(f64::total_cmp);
    BenchRow {
        n,
        series: series.to_string(),
        median_ns: quantile(&samples, 0.5),
        q1_ns: quantile(&samples, 0.25),
        q3_ns: quantile(&samples, 0.75),
        max_calls,
    }
}

fn bench_config(maximization: Maximization) -> DeepConfig {
    DeepConfig {
        maximization,
        // pure greedy selection so every timed call runs the maximizer
        epsilon_start: 0.0,
        epsilon_min: 0.0,
        track_stochmax: false,
        ..Default::default()
    }
}

/// Times `reps` greedy selections at a fixed state after a short warm-up.
fn time_selection(agent: &mut DeepAgent, state: &[f64], reps: usize) -> Result<(Vec<f64>, u64)> {
    for _ in 0..3 {
        agent.select_action(state)?;
    }
    let mut samples = Vec::with_capacity(reps);
    let mut max_calls = 0;
    for _ in 0..reps {
        let t = Instant::now();
        let d = agent.select_action(state)?;
        samples.push(t.elapsed().as_nanos() as f64);
        std::hint::black_box(d);
        max_calls = max_calls.max(agent.last_selection_calls());
    }
    Ok((samples, max_calls))
}

/// Times full training steps after enough untimed steps that every timed
/// step includes a replay update; returns (total, select, env, update) samples.
fn time_train_steps(
    agent: &mut DeepAgent,
    env: &mut CartPole,
    reps: usize,
) -> Result<[Vec<f64>; 4]> {
    let mut rollout = Rollout::new(env);
    let batch = agent.config().batch_size(agent.n_actions());
    while agent.buffer().len() + 1 < batch {
        rollout.step(agent)?;
    }
    let mut spans: [Vec<f64>; 4] = Default::default();
    for _ in 0..reps {
        let t = Instant::now();
        let info = rollout.step(agent)?;
        spans[0].push(t.elapsed().as_nanos() as f64);
        spans[1].push(info.select_ns as f64);
        spans[2].push(info.env_ns as f64);
        spans[3].push(info.update_ns as f64);
    }
    Ok(spans)
}

pub fn bench_stochmax(params: &BenchParams) -> Result<BenchReport> {
    if params.n_list.is_empty() || params.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::Config(
            "n list must be non-empty and strictly ascending".into(),
        ));
    }
    if params.n_list[0] < 2 {
        return Err(HarnessError::Config("action counts start at 2".into()));
    }
    if params.repetitions < MIN_REPETITIONS {
        return Err(HarnessError::Config(format!(
            "at least {MIN_REPETITIONS} repetitions required, got {}",
            params.repetitions
        )));
    }
    let reps = params.repetitions;
    let mut rows = Vec::new();
    for &n in &params.n_list {
        let mut env = CartPole::with_granularity(n, params.seed)?;
        let state = env.reset();

        let mut stoch = DeepAgent::new(bench_config(Maximization::Stochastic), &env, params.seed)?;
        // fill the replay buffer so the global memory contributes its full share
        let fill = stoch.config().buffer_capacity(n);
        let mut fill_env = env.clone();
        let mut rollout = Rollout::new(&mut fill_env);
        for _ in 0..fill {
            rollout.step(&mut stoch)?;
        }
        let (samples, calls) = time_selection(&mut stoch, &state, reps)?;
        rows.push(row(n, STOCH_SELECT, samples, Some(calls)));

        let mut exact = DeepAgent::new(bench_config(Maximization::Exact), &env, params.seed)?;
        let (samples, calls) = time_selection(&mut exact, &state, reps)?;
        rows.push(row(n, EXACT_SELECT, samples, Some(calls)));

        if params.train_step {
            for (name, agent) in [("stoch-dqn", &mut stoch), ("dqn", &mut exact)] {
                let [total, select, env_ns, update] = time_train_steps(agent, &mut env, reps)?;
                rows.push(row(n, &format!("{name}-train-step"), total, None));
                rows.push(row(n, &format!("{name}-train-select"), select, None));
                rows.push(row(n, &format!("{name}-train-env"), env_ns, None));
                rows.push(row(n, &format!("{name}-train-update"), update, None));
            }
        }
    }
    let mut names: Vec<String> = Vec::new();
    for r in &rows {
        if !names.contains(&r.series) {
            names.push(r.series.clone());
        }
    }
    let slopes = names
        .into_iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.series == s)
                .map(|r| (r.n as f64, r.median_ns.max(1.0)))
                .collect();
            let slope = if pts.len() >= 2 {
                log_log_slope(&pts)
            } else {
                f64::NAN
            };
            (s, slope)
        })
        .collect();
    Ok(BenchReport { rows, slopes })
}

/// Upper bound on forward passes of one stochastic selection: `|R| + |M| ≤ 2⌈log₂ n⌉`.
pub fn stochastic_call_bound(n: usize) -> u64 {
    2 * ceil_log2(n) as u64
}

/// Writes `bench_stochmax.csv` and `bench_slopes.csv` into `out`.
pub fn write_report(report: &BenchReport, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let table = out.join("bench_stochmax.csv");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&table)?;
    w.write_record([
        "n",
        "series",
        "median_ns",
        "q1_ns",
        "q3_ns",
        "iqr_ns",
        "max_calls",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.n.to_string(),
            r.series.clone(),
            r.median_ns.to_string(),
            r.q1_ns.to_string(),
            r.q3_ns.to_string(),
            r.iqr_ns().to_string(),
            r.max_calls.map_or(String::new(), |c| c.to_string()),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(&table, e))?;
    let slopes = out.join("bench_slopes.csv");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&slopes)?;
    w.write_record(["series", "log_log_slope"])?;
    for (s, v) in &report.slopes {
        w.write_record([s.clone(), v.to_string()])?;
    }
    w.flush().map_err(|e| HarnessError::io(&slopes, e))?;
    Ok(())
}
