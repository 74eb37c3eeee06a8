//! Graph-RL agent: node featurization, a one-layer graph-convolution
//! encoder with per-node or pooled heads, a Dirichlet actor, twin critics,
//! and soft actor-critic training with replay.

pub mod buffer;
pub mod dirichlet;
pub mod features;
pub mod nn;
pub mod sac;
pub mod train;

pub use buffer::{ReplayBuffer, Transition};
pub use features::{feature_dim, featurize};
pub use nn::{GraphMatrices, GraphNet, Mat, OutputMode};
pub use sac::{RlError, SacAgent, SacHyper, SacLosses};
pub use train::{train, GraphRlPolicy, ModelFile, TrainConfig, Trainer, DEFAULT_LOOKAHEAD};
