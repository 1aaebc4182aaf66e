use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stochq::MemoryMode;
use stochq_harness::analyze::{self, Analysis, AnalysisParams};
use stochq_harness::bench::{self, BenchParams};
use stochq_harness::config::{RunConfig, Variant};
use stochq_harness::{runner, summarize, HarnessError, Result};

#[derive(Parser)]
#[command(
    name = "stochq",
    version,
    about = "Stochastic-maximization Q-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tabular variant on a discrete-state environment.
    RunTabular(RunArgs),
    /// Train a deep variant on the cart-pole environment.
    RunDeep(RunArgs),
    /// Time exact and stochastic action selection across action counts.
    BenchStochmax(BenchArgs),
    /// Run one analysis and write a pass/fail report.
    Analyze(AnalyzeArgs),
    /// Aggregate curve files across seeds.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    /// per-state, global or none.
    #[arg(long)]
    memory: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated ascending action counts; default powers of two 2^6..2^14.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, default_value_t = bench::MIN_REPETITIONS)]
    repetitions: usize,
    /// Skip the full training-step series.
    #[arg(long)]
    selection_only: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(value_enum)]
    which: Analysis,
    /// JSON file of analysis parameters; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "analysis")]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Curve files produced by run-tabular or run-deep.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Smoothing window; default 100 for deep variants, 1000 otherwise.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value = "summary")]
    out: PathBuf,
}

fn run_config(args: &RunArgs, deep: bool) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.variant {
        cfg.variant = v.parse::<Variant>()?;
    } else if deep && !cfg.variant.is_deep() {
        cfg.variant = Variant::StochDqn;
    }
    if deep && args.config.is_none() {
        cfg.env = stochq_harness::config::EnvSpec::CartPole(Default::default());
    }
    if let Some(s) = args.seed {
        cfg.seeds = Some(vec![s]);
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    if args.k.is_some() {
        cfg.k = args.k;
    }
    if let Some(m) = &args.memory {
        cfg.memory = Some(
            m.parse::<MemoryMode>()
                .map_err(|e| HarnessError::Config(e.to_string()))?,
        );
    }
    cfg.validate()?;
    if cfg.variant.is_deep() != deep {
        let cmd = if deep { "run-deep" } else { "run-tabular" };
        return Err(HarnessError::Config(format!(
            "{} cannot run under {cmd}",
            cfg.variant
        )));
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::RunTabular(args) => {
            let s = runner::run_tabular(&run_config(&args, false)?)?;
            for r in &s.seeds {
                println!(
                    "seed {}: cumulative reward {:.3}, greedy return {:.3}, policy gap {:.3e}",
                    r.seed,
                    r.final_cumulative_reward,
                    r.greedy_return,
                    r.policy_gap.unwrap_or(f64::NAN)
                );
            }
            println!(
                "summary: {}",
                runner::summary_path(&s.config.out_dir, &s.variant).display()
            );
        }
        Command::RunDeep(args) => {
            let s = runner::run_deep(&run_config(&args, true)?)?;
            for r in &s.seeds {
                println!(
                    "seed {}: episodes {}, last-50 episode length {:.1}, tail omega {:.4}",
                    r.seed,
                    r.episodes,
                    r.mean_last_50_episode_length.unwrap_or(f64::NAN),
                    r.mean_tail_omega.unwrap_or(f64::NAN)
                );
            }
            println!(
                "summary: {}",
                runner::summary_path(&s.config.out_dir, &s.variant).display()
            );
        }
        Command::BenchStochmax(args) => {
            let mut params = BenchParams {
                repetitions: args.repetitions,
                train_step: !args.selection_only,
                seed: args.seed,
                ..Default::default()
            };
            if let Some(n) = args.n {
                params.n_list = n;
            }
            let report = bench::bench_stochmax(&params)?;
            bench::write_report(&report, &args.out)?;
            for (series, slope) in &report.slopes {
                println!("{series}: log-log slope {slope:.3}");
            }
        }
        Command::Analyze(args) => {
            let mut p = match &args.config {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                    serde_json::from_str::<AnalysisParams>(&text)
                        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
                }
                None => AnalysisParams::default(),
            };
            if let Some(s) = args.seed {
                p.seed = s;
            }
            p.n = args.n.or(p.n);
            p.k = args.k.or(p.k);
            p.states = args.states.or(p.states);
            p.trials = args.trials.or(p.trials);
            p.gamma = args.gamma.or(p.gamma);
            p.steps = args.steps.or(p.steps);
            let report = analyze::run_analysis(args.which, &p)?;
            let path = analyze::write_report(&report, &args.out)?;
            let verdict = if report.passed { "PASS" } else { "FAIL" };
            println!("{} {verdict} ({})", args.which.name(), path.display());
            if !report.passed {
                return Err(HarnessError::AnalysisFailed(args.which.name().to_string()));
            }
        }
        Command::Summarize(args) => {
            let table = summarize::summarize(&args.files, args.window, &args.out)?;
            for s in &table {
                let f = s.final_cumulative_reward;
                println!(
                    "{}: {} seeds, final cumulative reward {:.3} ± {:.3}",
                    s.variant, f.n, f.mean, f.std
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
