//! Analysis runs with pass/fail verdicts, written as JSON reports.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stochq::analysis::{
    contraction_check, fixed_values_memoryless, hitting_time, l_statistic_sd_uniform,
    lemma1_probability, qstar_fixed_point, subset_max_weights, uniform_expected_max,
    PhiOperatorSpec, SubsetDistribution,
};
use stochq::mdp::RewardDistribution;
use stochq::seeding::{stream_rng, Stream};
use stochq::stochmax::default_subset_size;
use stochq::tabular::{Exploration, Maximization, TabularAgent, TabularConfig, Transition};
use stochq::{FiniteMdp, MemoryMode};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    /// Inclusion probability of a fixed action in a uniform random subset.
    Lemma1,
    /// Expected subset maximum over uniform values, memoryless.
    Uniform,
    /// Sup-norm contraction of the randomized Bellman operator.
    Contraction,
    /// Stochastic Q-learning against the operator's fixed point.
    QstarConvergence,
    /// Queries until the memory-augmented candidate set holds the maximizer.
    HittingTime,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Lemma1 => "lemma1",
            Analysis::Uniform => "uniform",
            Analysis::Contraction => "contraction",
            Analysis::QstarConvergence => "qstar-convergence",
            Analysis::HittingTime => "hitting-time",
        }
    }
}

/// Optional overrides; each analysis fills in its own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisParams {
    /// Number of actions.
    pub n: Option<usize>,
    /// Random subset size; default `⌈log₂ n⌉`.
    pub k: Option<usize>,
    pub states: Option<usize>,
    /// Trials, queries or pairs, depending on the analysis.
    pub trials: Option<u64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub steps: Option<u64>,
    pub runs: Option<usize>,
    pub horizon: Option<u64>,
    /// Threshold on the sup-norm gap for `qstar-convergence`.
    pub tolerance: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub analysis: Analysis,
    pub passed: bool,
    pub statistics: Value,
}

fn bad(e: stochq::Error) -> HarnessError {
    match e {
        stochq::Error::InvalidParams(m) => HarnessError::Config(m),
        other => HarnessError::Core(other),
    }
}

/// `n` values uniform on `[0, b]` with the largest one set to exactly `b`.
pub fn pinned_uniform_values(n: usize, b: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Init);
    let mut values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * b).collect();
    let top = (0..n)
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("n > 0");
    values[top] = b;
    values
}

/// Memoryless stoch_max over fixed pinned values, plus a fresh-values estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformFixedReport {
    pub n: usize,
    pub k: usize,
    pub queries: u64,
    pub mean: f64,
    pub se: f64,
    /// `E[max]` given the drawn values.
    pub conditional_expectation: f64,
    /// `b − b/(k+1)` over the draw of the values.
    pub expected: f64,
    /// Spread of the conditional expectation across value draws.
    pub draw_sd: f64,
    /// `|mean − conditional| ≤ 3·se`.
    pub conditional_ok: bool,
    /// `|mean − expected| ≤ 3·√(se² + draw_sd²)`.
    pub unconditional_ok: bool,
}

pub fn uniform_fixed(
    n: usize,
    k: usize,
    b: f64,
    queries: u64,
    seed: u64,
) -> Result<UniformFixedReport> {
    let values = pinned_uniform_values(n, b, seed);
    let r = fixed_values_memoryless(&values, k, queries, seed.wrapping_add(1)).map_err(bad)?;
    let expected = b - b / (k as f64 + 1.0);
    let draw_sd = l_statistic_sd_uniform(&subset_max_weights(n, k).map_err(bad)?, b);
    let total_sd = (r.se * r.se + draw_sd * draw_sd).sqrt();
    Ok(UniformFixedReport {
        n,
        k,
        queries,
        mean: r.mean,
        se: r.se,
        conditional_expectation: r.conditional_expectation,
        expected,
        draw_sd,
        conditional_ok: (r.mean - r.conditional_expectation).abs() <= 3.0 * r.se,
        unconditional_ok: (r.mean - expected).abs() <= 3.0 * total_sd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QstarConvergenceReport {
    pub states: usize,
    pub actions: usize,
    pub k: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub steps: u64,
    /// `‖Q_learned − Q*_k‖∞`.
    pub gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Setup of [`qstar_convergence`].
#[derive(Debug, Clone, PartialEq)]
pub struct QstarSetup {
    pub states: usize,
    pub actions: usize,
    pub k: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub steps: u64,
    pub tolerance: f64,
    /// Draws the MDP and seeds the agent and the transitions.
    pub seed: u64,
}

impl Default for QstarSetup {
    fn default() -> Self {
        Self {
            states: 3,
            actions: 5,
            k: 2,
            gamma: 0.8,
            epsilon: 0.3,
            steps: 200_000,
            tolerance: 0.05,
            seed: 0,
        }
    }
}

/// Memoryless stochastic Q-learning with fixed ε on a random MDP (rewards
/// uniform on `[0,1]`), compared with the fixed point of the operator whose
/// max ranges over uniform `k`-subsets.
pub fn qstar_convergence(setup: &QstarSetup) -> Result<QstarConvergenceReport> {
    let QstarSetup {
        states,
        actions,
        k,
        gamma,
        epsilon,
        steps,
        tolerance,
        seed,
    } = *setup;
    let mdp = FiniteMdp::random(
        states,
        actions,
        RewardDistribution::Uniform {
            low: 0.0,
            high: 1.0,
        },
        seed,
    )
    .map_err(bad)?;
    let spec =
        PhiOperatorSpec::new(mdp.clone(), gamma, SubsetDistribution::UniformK(k)).map_err(bad)?;
    let q_star = qstar_fixed_point(&spec, 1e-12, 1_000_000)?;
    let cfg = TabularConfig {
        gamma,
        maximization: Maximization::Stochastic,
        subset_size: Some(k),
        memory: MemoryMode::None,
        exploration: Exploration::Fixed(epsilon),
        track_stochmax: false,
        ..Default::default()
    };
    let mut agent = TabularAgent::new(cfg, states, actions, seed).map_err(bad)?;
    let mut env_rng = stream_rng(seed, Stream::Env);
    let mut s = 0;
    for _ in 0..steps {
        let a = agent.act(s).action;
        let next = mdp.sample_next(s, a.index(), &mut env_rng);
        agent.learn(
            &Transition {
                state: s,
                action: a,
                reward: mdp.reward(s, a.index()),
                next_state: next,
                terminal: false,
            },
            false,
        );
        s = next;
    }
    let gap = agent.table().values().sup_distance(&q_star);
    Ok(QstarConvergenceReport {
        states,
        actions,
        k,
        gamma,
        epsilon,
        steps,
        gap,
        tolerance,
        passed: gap < tolerance,
    })
}

/// Hitting-time verdict: mean within `n/k + 3·se`, every run hits within the horizon and stays.
pub fn hitting_verdict(r: &stochq::analysis::HittingReport) -> bool {
    r.all_hit() && r.stayed && r.mean <= r.bound + 3.0 * r.se
}

pub fn run_analysis(which: Analysis, p: &AnalysisParams) -> Result<AnalysisReport> {
    let k_for = |n: usize| p.k.unwrap_or_else(|| default_subset_size(n));
    let (passed, statistics) = match which {
        Analysis::Lemma1 => {
            let n = p.n.unwrap_or(256);
            let r = lemma1_probability(n, k_for(n), p.trials.unwrap_or(1_000_000), p.seed)
                .map_err(bad)?;
            (r.passed, json!(r))
        }
        Analysis::Uniform => {
            let n = p.n.unwrap_or(5000);
            let queries = p.trials.unwrap_or(10_000);
            let fixed = uniform_fixed(n, k_for(n), 100.0, queries, p.seed)?;
            let fresh =
                uniform_expected_max(n, k_for(n), 100.0, 100.0, queries, p.seed).map_err(bad)?;
            (
                fixed.conditional_ok && fixed.unconditional_ok && fresh.passed,
                json!({ "fixed_values": fixed, "fresh_values": fresh }),
            )
        }
        Analysis::Contraction => {
            let (ns, na) = (p.states.unwrap_or(4), p.n.unwrap_or(6));
            let mdp = FiniteMdp::random(
                ns,
                na,
                RewardDistribution::Uniform {
                    low: 0.0,
                    high: 1.0,
                },
                p.seed,
            )
            .map_err(bad)?;
            let spec = PhiOperatorSpec::new(
                mdp,
                p.gamma.unwrap_or(0.95),
                SubsetDistribution::UniformK(k_for(na)),
            )
            .map_err(bad)?;
            let trials = p.trials.unwrap_or(1000) as usize;
            let r = contraction_check(&spec, trials, p.seed.wrapping_add(1)).map_err(bad)?;
            (r.passed, json!(r))
        }
        Analysis::QstarConvergence => {
            let d = QstarSetup::default();
            let r = qstar_convergence(&QstarSetup {
                states: p.states.unwrap_or(d.states),
                actions: p.n.unwrap_or(d.actions),
                k: p.k.unwrap_or(d.k),
                gamma: p.gamma.unwrap_or(d.gamma),
                epsilon: p.epsilon.unwrap_or(d.epsilon),
                steps: p.steps.unwrap_or(d.steps),
                tolerance: p.tolerance.unwrap_or(d.tolerance),
                seed: p.seed,
            })?;
            (r.passed, json!(r))
        }
        Analysis::HittingTime => {
            let n = p.n.unwrap_or(5000);
            let values = pinned_uniform_values(n, 100.0, p.seed);
            let r = hitting_time(
                &values,
                k_for(n),
                p.runs.unwrap_or(200),
                p.horizon.unwrap_or(n as u64),
                p.seed.wrapping_add(1),
            )
            .map_err(bad)?;
            (hitting_verdict(&r), json!(r))
        }
    };
    Ok(AnalysisReport {
        analysis: which,
        passed,
        statistics,
    })
}

pub fn report_path(out: &Path, which: Analysis) -> PathBuf {
    out.join(format!("analysis_{}.json", which.name()))
}

pub fn write_report(report: &AnalysisReport, out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let path = report_path(out, report.analysis);
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_values() {
        let v = pinned_uniform_values(100, 100.0, 4);
        assert_eq!(v.iter().cloned().fold(f64::MIN, f64::max), 100.0);
        assert!(v.iter().all(|&x| (0.0..=100.0).contains(&x)));
        assert_eq!(v, pinned_uniform_values(100, 100.0, 4));
    }

    #[test]
    fn inclusion_default_example() {
        let r = run_analysis(
            Analysis::Lemma1,
            &AnalysisParams {
                k: Some(8),
                trials: Some(200_000),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.passed);
        assert_eq!(r.statistics["expected"], 0.03125);
    }

    #[test]
    fn contraction_default_example() {
        let r = run_analysis(Analysis::Contraction, &AnalysisParams::default()).unwrap();
        assert!(r.passed);
        assert!(r.statistics["max_ratio"].as_f64().unwrap() <= 0.95);
    }

    #[test]
    fn bad_params_are_config_errors() {
        let e = run_analysis(
            Analysis::Lemma1,
            &AnalysisParams {
                n: Some(4),
                k: Some(9),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
