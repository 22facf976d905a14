//! Outcome, policy and environment spaces, reward laws and proxy channels.

pub mod channel;
pub mod io;
pub mod model;
pub mod prior;
pub mod reward;

pub use channel::{
    identity_channel, joint_reward_proxy, make_noise_channel, make_quantizer_channel, NoiseLaw, NoiseMeta, NoiseSpec,
    ProxyChannel,
};
pub use io::{instance_digest, WorldDocument, WORLD_SCHEMA};
pub use model::{FiniteModel, OutcomePartition};
pub use prior::{
    build_cellwise_iid_ensemble, build_iid_reward_ensemble, check_reward_env_independence, compose_prior, Atom,
    Coupling, EnsembleOptions, EnsembleStructure, RewardEnsemble, WorldPrior,
};
pub use reward::{Codeword, RewardTable, DEFAULT_DENOM};
