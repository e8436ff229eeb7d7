//! Source selection policies: the random and traversal baselines, the
//! reputation-assignment baseline and the double-Q learning agent.

pub mod advantage;
pub mod agent;
pub mod baselines;
pub mod qnet;
pub mod replay;

pub use advantage::{state_from_matrix, state_from_row, update_advantage, AdvantageMatrix};
pub use agent::DdqnAgent;
pub use baselines::{daon_select, iot_assign, majority_value, simple_select};
pub use qnet::{compute_targets, Batch, Mlp, QNetwork, Real};
pub use replay::{Experience, ReplayBuffer};
