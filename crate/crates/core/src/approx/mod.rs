//! Function approximation: an MLP value network over `[state, action]`
//! inputs, a replay buffer, and (Stoch)DQN / (Stoch)DDQN agents.

mod agent;
mod checkpoint;
mod mlp;
mod replay;

pub use agent::{
    epsilon_schedule, greedy_episode_length, train, CallCounters, DeepAgent, DeepAlgorithm,
    DeepConfig, DeepStepInfo, Net, Rollout,
};
pub use checkpoint::{Checkpoint, NetPair, RngState, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use mlp::{Layer, MlpParams};
pub use replay::{Experience, ReplayBuffer};
