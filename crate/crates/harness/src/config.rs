//! Run configuration: one JSON file, every field optional with defaults,
//! unknown keys rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use stochq::approx::{DeepAlgorithm, DeepConfig};
use stochq::envs::{CartPoleParams, GeneratedMdpSpec};
use stochq::tabular::{Algorithm, Exploration, Maximization, TabularConfig};
use stochq::MemoryMode;

use crate::error::{HarnessError, Result};

/// Default repetitions: ten seeds for tabular runs, five for deep runs.
pub const TABULAR_SEEDS: u64 = 10;
pub const DEEP_SEEDS: u64 = 5;
pub const DEFAULT_STEPS: u64 = 100_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    #[default]
    CliffWalking,
    FrozenLake {
        #[serde(default)]
        slippery: bool,
    },
    Generated(GeneratedMdpSpec),
    CartPole(CartPoleParams),
}

impl EnvSpec {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, EnvSpec::CartPole(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    QLearning,
    #[default]
    StochQLearning,
    DoubleQ,
    StochDoubleQ,
    Sarsa,
    StochSarsa,
    Dqn,
    StochDqn,
    Ddqn,
    StochDdqn,
}

impl Variant {
    pub const ALL: [Variant; 10] = [
        Variant::QLearning,
        Variant::StochQLearning,
        Variant::DoubleQ,
        Variant::StochDoubleQ,
        Variant::Sarsa,
        Variant::StochSarsa,
        Variant::Dqn,
        Variant::StochDqn,
        Variant::Ddqn,
        Variant::StochDdqn,
    ];

    pub fn is_deep(self) -> bool {
        matches!(
            self,
            Variant::Dqn | Variant::StochDqn | Variant::Ddqn | Variant::StochDdqn
        )
    }

    pub fn maximization(self) -> Maximization {
        match self {
            Variant::StochQLearning
            | Variant::StochDoubleQ
            | Variant::StochSarsa
            | Variant::StochDqn
            | Variant::StochDdqn => Maximization::Stochastic,
            _ => Maximization::Exact,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::QLearning => "q-learning",
            Variant::StochQLearning => "stoch-q-learning",
            Variant::DoubleQ => "double-q",
            Variant::StochDoubleQ => "stoch-double-q",
            Variant::Sarsa => "sarsa",
            Variant::StochSarsa => "stoch-sarsa",
            Variant::Dqn => "dqn",
            Variant::StochDqn => "stoch-dqn",
            Variant::Ddqn => "ddqn",
            Variant::StochDdqn => "stoch-ddqn",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown variant '{s}'")))
    }
}

/// Hyperparameters shared by the tabular variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TabularParams {
    pub gamma: f64,
    /// Learning rate `α = z^-lr_exponent` for the `z`-th visit of a pair.
    pub lr_exponent: f64,
    pub memory_capacity: usize,
    pub exploration: Exploration,
}

impl Default for TabularParams {
    fn default() -> Self {
        let c = TabularConfig::default();
        Self {
            gamma: c.gamma,
            lr_exponent: c.lr_exponent,
            memory_capacity: c.memory_capacity,
            exploration: c.exploration,
        }
    }
}

/// Hyperparameters shared by the deep variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeepParams {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub tau: f64,
    pub hidden: Vec<usize>,
    pub buffer_capacity: Option<usize>,
    pub batch_size: Option<usize>,
}

impl Default for DeepParams {
    fn default() -> Self {
        let c = DeepConfig::default();
        Self {
            gamma: c.gamma,
            learning_rate: c.learning_rate,
            epsilon_start: c.epsilon_start,
            epsilon_decay: c.epsilon_decay,
            epsilon_min: c.epsilon_min,
            tau: c.tau,
            hidden: c.hidden,
            buffer_capacity: c.buffer_capacity,
            batch_size: c.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub variant: Variant,
    /// `None`: seeds `0..10` for tabular variants, `0..5` for deep ones.
    pub seeds: Option<Vec<u64>>,
    pub steps: u64,
    /// Random subset size; `None` means `⌈log₂ n⌉`.
    pub k: Option<usize>,
    /// `None`: per-state memory for tabular variants, global for deep ones.
    pub memory: Option<MemoryMode>,
    pub out_dir: PathBuf,
    pub tabular: TabularParams,
    pub deep: DeepParams,
    /// Compute β/ω at every step (an extra exact max per step).
    pub track_stochmax: bool,
    /// Fill the `wall_time_ns` column. Off by default so that a
    /// (config, seed) pair determines every output byte.
    pub record_wall_time: bool,
    /// Deep runs: write a checkpoint every this many steps (the final one is always written).
    pub checkpoint_interval: Option<u64>,
    /// Step cap of the greedy evaluation episode at the end of each run.
    pub eval_max_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvSpec::default(),
            variant: Variant::default(),
            seeds: None,
            steps: DEFAULT_STEPS,
            k: None,
            memory: None,
            out_dir: PathBuf::from("runs"),
            tabular: TabularParams::default(),
            deep: DeepParams::default(),
            track_stochmax: true,
            record_wall_time: false,
            checkpoint_interval: None,
            eval_max_steps: 1000,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None if self.variant.is_deep() => (0..DEEP_SEEDS).collect(),
            None => (0..TABULAR_SEEDS).collect(),
        }
    }

    pub fn memory(&self) -> MemoryMode {
        self.memory.unwrap_or(if self.variant.is_deep() {
            MemoryMode::Global
        } else {
            MemoryMode::PerState
        })
    }

    /// Checks the pieces that do not depend on the environment's action count.
    pub fn validate(&self) -> Result<()> {
        let deep = self.variant.is_deep();
        if deep && self.env.is_discrete() {
            return Err(HarnessError::Config(format!(
                "variant {} needs an environment with action features (cart-pole)",
                self.variant
            )));
        }
        if !deep && !self.env.is_discrete() {
            return Err(HarnessError::Config(format!(
                "variant {} needs a discrete-state environment",
                self.variant
            )));
        }
        match (deep, self.memory()) {
            (true, MemoryMode::PerState) => {
                return Err(HarnessError::Config(
                    "deep variants use global memory or none".into(),
                ))
            }
            (false, MemoryMode::Global) => {
                return Err(HarnessError::Config(
                    "tabular variants use per-state memory or none".into(),
                ))
            }
            _ => {}
        }
        if self.steps == 0 {
            return Err(HarnessError::Config("steps must be positive".into()));
        }
        if self.seeds.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(HarnessError::Config("seed list is empty".into()));
        }
        if self.checkpoint_interval == Some(0) {
            return Err(HarnessError::Config(
                "checkpoint interval must be positive".into(),
            ));
        }
        if self.k == Some(0) {
            return Err(HarnessError::Config("k must be positive".into()));
        }
        Ok(())
    }

    pub fn tabular_config(&self) -> Result<TabularConfig> {
        let algorithm = match self.variant {
            Variant::QLearning | Variant::StochQLearning => Algorithm::QLearning,
            Variant::DoubleQ | Variant::StochDoubleQ => Algorithm::DoubleQ,
            Variant::Sarsa | Variant::StochSarsa => Algorithm::Sarsa,
            v => {
                return Err(HarnessError::Config(format!(
                    "{v} is not a tabular variant"
                )))
            }
        };
        let t = &self.tabular;
        Ok(TabularConfig {
            gamma: t.gamma,
            lr_exponent: t.lr_exponent,
            algorithm,
            maximization: self.variant.maximization(),
            subset_size: self.k,
            memory: self.memory(),
            memory_capacity: t.memory_capacity,
            exploration: t.exploration,
            track_stochmax: self.track_stochmax,
        })
    }

    pub fn deep_config(&self) -> Result<DeepConfig> {
        let algorithm = match self.variant {
            Variant::Dqn | Variant::StochDqn => DeepAlgorithm::Dqn,
            Variant::Ddqn | Variant::StochDdqn => DeepAlgorithm::Ddqn,
            v => return Err(HarnessError::Config(format!("{v} is not a deep variant"))),
        };
        let d = &self.deep;
        Ok(DeepConfig {
            gamma: d.gamma,
            learning_rate: d.learning_rate,
            epsilon_start: d.epsilon_start,
            epsilon_decay: d.epsilon_decay,
            epsilon_min: d.epsilon_min,
            tau: d.tau,
            algorithm,
            maximization: self.variant.maximization(),
            subset_size: self.k,
            memory: self.memory(),
            hidden: d.hidden.clone(),
            buffer_capacity: d.buffer_capacity,
            batch_size: d.batch_size,
            track_stochmax: self.track_stochmax,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"stpes": 10}"#).is_err());
        assert!(RunConfig::from_json(r#"{"tabular": {"alpha": 0.1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"env": {"kind": "generated", "states": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"env": {"kind": "moon-lander"}}"#).is_err());
        assert!(
            RunConfig::from_json(r#"{"env": {"kind": "frozen-lake", "slipery": true}}"#).is_err()
        );
    }

    #[test]
    fn env_variant_mismatch_is_config_error() {
        let e = RunConfig::from_json(r#"{"variant": "dqn"}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_json(r#"{"env": {"kind": "cart-pole"}, "variant": "sarsa"}"#)
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(RunConfig::from_json(
            r#"{"env": {"kind": "cart-pole"}, "variant": "stoch-dqn", "memory": "per-state"}"#
        )
        .is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(
                serde_json::to_string(&v).unwrap(),
                format!("\"{}\"", v.name())
            );
        }
        assert!("dqn2".parse::<Variant>().is_err());
    }

    #[test]
    fn default_seed_counts() {
        assert_eq!(RunConfig::default().seeds().len(), 10);
        let deep = RunConfig {
            env: EnvSpec::CartPole(Default::default()),
            variant: Variant::StochDqn,
            ..Default::default()
        };
        assert_eq!(deep.seeds().len(), 5);
        assert_eq!(deep.memory(), MemoryMode::Global);
    }

    fn arb_env() -> impl Strategy<Value = EnvSpec> {
        prop_oneof![
            Just(EnvSpec::CliffWalking),
            any::<bool>().prop_map(|slippery| EnvSpec::FrozenLake { slippery }),
            (
                1usize..10,
                1usize..600,
                -100.0f64..100.0,
                0.0f64..60.0,
                any::<u64>()
            )
                .prop_map(|(ns, na, m, sd, seed)| {
                    EnvSpec::Generated(GeneratedMdpSpec {
                        n_states: ns,
                        n_actions: na,
                        reward_mean: m,
                        reward_std: sd,
                        horizon: 100,
                        seed,
                    })
                }),
            (2usize..5000, 0.1f64..10.0, 1e-3f64..0.1).prop_map(|(g, f, dt)| EnvSpec::CartPole(
                CartPoleParams {
                    granularity: g,
                    max_force: f,
                    dt,
                    ..Default::default()
                }
            )),
        ]
    }

    proptest! {
        #[test]
        fn json_round_trip(
            env in arb_env(),
            vi in 0usize..10,
            seeds in proptest::option::of(proptest::collection::vec(any::<u64>(), 1..5)),
            steps in 1u64..u64::MAX,
            k in proptest::option::of(1usize..100),
            gamma in 0.0f64..1.0,
            lr in 0.0f64..1.0,
            eps in proptest::option::of(0.0f64..1.0),
            tau in 0.0f64..1.0,
            wall in any::<bool>(),
            interval in proptest::option::of(1u64..1000),
        ) {
            let cfg = RunConfig {
                env,
                variant: Variant::ALL[vi],
                seeds,
                steps,
                k,
                memory: None,
                out_dir: PathBuf::from("out/dir"),
                tabular: TabularParams {
                    gamma,
                    exploration: eps.map_or(Exploration::Decaying, Exploration::Fixed),
                    ..Default::default()
                },
                deep: DeepParams { learning_rate: lr, tau, ..Default::default() },
                track_stochmax: !wall,
                record_wall_time: wall,
                checkpoint_interval: interval,
                eval_max_steps: 17,
            };
            let text = serde_json::to_string(&cfg).unwrap();
            let back: RunConfig = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
    }
}
