use std::path::Path;

use stochq::approx::{Checkpoint, DeepAgent};
use stochq::envs::{CartPole, CartPoleParams, GeneratedMdpSpec};
use stochq_harness::config::{DeepParams, EnvSpec, RunConfig, TabularParams, Variant};
use stochq_harness::curve::read_curve;
use stochq_harness::runner::{checkpoint_path, curve_path, run_deep, run_tabular, summary_path};
use stochq_harness::summarize::summarize;

fn cliff(out: &Path, variant: Variant) -> RunConfig {
    RunConfig {
        variant,
        seeds: Some(vec![3, 4]),
        steps: 5_000,
        out_dir: out.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for variant in [
        Variant::StochQLearning,
        Variant::StochDoubleQ,
        Variant::StochSarsa,
    ] {
        run_tabular(&cliff(a.path(), variant)).unwrap();
        run_tabular(&cliff(b.path(), variant)).unwrap();
        for seed in [3, 4] {
            let x = std::fs::read(curve_path(a.path(), variant.name(), seed)).unwrap();
            let y = std::fs::read(curve_path(b.path(), variant.name(), seed)).unwrap();
            assert_eq!(x, y, "{variant} seed {seed}");
            assert!(!x.contains(&b'\r'));
        }
    }
    let x = std::fs::read_to_string(summary_path(a.path(), "stoch-sarsa")).unwrap();
    let y = std::fs::read_to_string(summary_path(b.path(), "stoch-sarsa")).unwrap();
    // summaries name their own output directory; everything else matches
    assert_eq!(
        x.replace(a.path().to_str().unwrap(), "OUT"),
        y.replace(b.path().to_str().unwrap(), "OUT")
    );
}

#[test]
fn different_seeds_differ_and_wall_time_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = cliff(dir.path(), Variant::StochQLearning);
    cfg.record_wall_time = true;
    let s = run_tabular(&cfg).unwrap();
    let a = read_curve(&s.seeds[0].curve).unwrap();
    let b = read_curve(&s.seeds[1].curve).unwrap();
    assert_ne!(a, b);
    assert!(a.iter().all(|r| r.wall_time_ns.is_some_and(|t| t > 0)));
    assert!(s.aggregate.mean_step_ns.is_some());
    assert!(a.windows(2).all(|w| w[1].step == w[0].step + 1));
}

#[test]
fn generated_mdp_policies_reach_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    for variant in [Variant::QLearning, Variant::StochQLearning] {
        let cfg = RunConfig {
            env: EnvSpec::Generated(GeneratedMdpSpec {
                n_states: 3,
                n_actions: 16,
                seed: 5,
                ..Default::default()
            }),
            variant,
            seeds: Some(vec![0, 1, 2]),
            steps: 100_000,
            out_dir: dir.path().to_path_buf(),
            track_stochmax: false,
            tabular: TabularParams {
                gamma: 0.8,
                ..Default::default()
            },
            ..Default::default()
        };
        let s = run_tabular(&cfg).unwrap();
        for r in &s.seeds {
            assert!(
                r.policy_gap.unwrap() < 1e-9,
                "{variant} seed {}: {:?}",
                r.seed,
                r.policy_gap
            );
        }
    }
}

#[test]
fn stochastic_curves_track_beta_and_omega() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_tabular(&cliff(dir.path(), Variant::StochQLearning)).unwrap();
    let rows = read_curve(&s.seeds[0].curve).unwrap();
    assert!(rows.iter().all(|r| r.beta.is_some_and(|b| b >= 0.0)));
    assert!(rows.iter().all(|r| r.omega.is_none_or(|w| w <= 1.0)));
    assert!(rows.iter().all(|r| r.candidates <= 4));
}

fn pole(out: &Path, deep: DeepParams, steps: u64) -> RunConfig {
    RunConfig {
        env: EnvSpec::CartPole(CartPoleParams {
            granularity: 64,
            ..Default::default()
        }),
        variant: Variant::StochDqn,
        seeds: Some(vec![1]),
        steps,
        deep,
        out_dir: out.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn deep_run_writes_checkpoints_that_restore() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = pole(dir.path(), DeepParams::default(), 600);
    cfg.checkpoint_interval = Some(250);
    cfg.variant = Variant::StochDdqn;
    let s = run_deep(&cfg).unwrap();
    assert!(checkpoint_path(dir.path(), "stoch-ddqn", 1, Some(250)).exists());
    assert!(checkpoint_path(dir.path(), "stoch-ddqn", 1, Some(500)).exists());
    let last = Checkpoint::load(s.seeds[0].checkpoint.as_ref().unwrap()).unwrap();
    assert_eq!(last.networks.len(), 2);
    let env = CartPole::new(
        CartPoleParams {
            granularity: 64,
            ..Default::default()
        },
        0,
    )
    .unwrap();
    let agent = DeepAgent::restore(last.clone(), &env).unwrap();
    assert_eq!(agent.checkpoint(), last);
    assert_eq!(read_curve(&s.seeds[0].curve).unwrap().len(), 600);
}

#[test]
fn deep_runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_deep(&pole(a.path(), DeepParams::default(), 800)).unwrap();
    run_deep(&pole(b.path(), DeepParams::default(), 800)).unwrap();
    let x = std::fs::read(curve_path(a.path(), "stoch-dqn", 1)).unwrap();
    let y = std::fs::read(curve_path(b.path(), "stoch-dqn", 1)).unwrap();
    assert_eq!(x, y);
}

/// With no learning and no ε decay the process is stationary: early and late
/// episode lengths agree within sampling noise.
#[test]
fn zero_learning_rate_shows_no_trend() {
    let dir = tempfile::tempdir().unwrap();
    let deep = DeepParams {
        learning_rate: 0.0,
        epsilon_decay: 1.0,
        epsilon_start: 0.5,
        ..Default::default()
    };
    let s = run_deep(&pole(dir.path(), deep, 20_000)).unwrap();
    let rows = read_curve(&s.seeds[0].curve).unwrap();
    let mut lengths = vec![0u64];
    for w in rows.windows(2) {
        if w[1].episode != w[0].episode {
            lengths.push(0);
        }
        *lengths.last_mut().unwrap() += 1;
    }
    lengths.pop();
    assert!(lengths.len() >= 200, "{} episodes", lengths.len());
    let stats = |xs: &[u64]| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<u64>() as f64 / n;
        let v = xs.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v / n)
    };
    let (m1, v1) = stats(&lengths[..100]);
    let (m2, v2) = stats(&lengths[lengths.len() - 100..]);
    let z = (m1 - m2) / (v1 + v2).sqrt();
    assert!(z.abs() < 4.0, "first {m1}, last {m2}, z {z}");
    // parameters never moved
    let ckpt = Checkpoint::load(s.seeds[0].checkpoint.as_ref().unwrap()).unwrap();
    let env = CartPole::new(
        CartPoleParams {
            granularity: 64,
            ..Default::default()
        },
        0,
    )
    .unwrap();
    let fresh = DeepAgent::new(s.config.deep_config().unwrap(), &env, 1).unwrap();
    assert_eq!(ckpt.networks[0].online, fresh.nets()[0].online);
}

#[test]
fn summarize_merges_seed_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_tabular(&cliff(dir.path(), Variant::QLearning)).unwrap();
    let files: Vec<_> = s.seeds.iter().map(|r| r.curve.clone()).collect();
    let table = summarize(&files, None, &dir.path().join("sum")).unwrap();
    assert_eq!(table.len(), 1);
    let finals: Vec<f64> = s.seeds.iter().map(|r| r.final_cumulative_reward).collect();
    assert_eq!(
        table[0].final_cumulative_reward.mean,
        (finals[0] + finals[1]) / 2.0
    );
    assert_eq!(table[0].smoothed_mean.len(), 5_000);
    assert!(dir.path().join("sum/summary.csv").exists());
    assert!(dir.path().join("sum/q-learning_smoothed.csv").exists());
}

/// Indicative learning check on the 512-action pole, 10⁵ steps. Not gating;
/// run with `cargo test -p stochq-harness --test runs -- --ignored`.
#[test]
#[ignore]
fn pole_learning_indicative() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        env: EnvSpec::CartPole(CartPoleParams::default()),
        variant: Variant::StochDqn,
        seeds: Some(vec![0]),
        steps: 100_000,
        out_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let s = run_deep(&cfg).unwrap();
    let len = s.seeds[0].mean_last_50_episode_length.unwrap();
    println!("mean length of the last 50 episodes: {len:.1}");
    assert!(len >= 500.0, "{len}");
}
