//! Training loop for the graph-RL agent and the on-disk model container.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::SpaceChargeGraph;
use crate::scenario::{sample_realization, ScenarioConfig};
use crate::sim::reset;
use crate::trilevel::{compute_target, match_passengers, rebalance_residual, Action};

use super::buffer::{ReplayBuffer, Transition};
use super::features::{feature_dim, featurize};
use super::nn::{GraphMatrices, GraphNet, Mat};
use super::sac::{RlError, SacAgent, SacHyper};

pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_LOOKAHEAD: usize = 6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub seed: u64,
    pub lookahead: usize,
    pub hyper: SacHyper,
}

impl TrainConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        TrainConfig { episodes, seed, lookahead: DEFAULT_LOOKAHEAD, hyper: SacHyper::default() }
    }
}

/// Serialized model: architecture dimensions, all weight tensors, and an
/// echo of the training configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub lookahead: usize,
    pub feature_dim: usize,
    pub actor: GraphNet<f64>,
    pub critic1: GraphNet<f64>,
    pub critic2: GraphNet<f64>,
    pub log_temp: f64,
    pub training: TrainEcho,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainEcho {
    pub scenario: String,
    pub episodes_run: usize,
    pub seed: u64,
    pub hyper: SacHyper,
}

impl ModelFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RlError> {
        let text = serde_json::to_string(self).map_err(|e| RlError::ModelIo(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| RlError::ModelIo(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RlError> {
        let text = std::fs::read_to_string(path).map_err(|e| RlError::ModelIo(e.to_string()))?;
        let model: ModelFile =
            serde_json::from_str(&text).map_err(|e| RlError::ModelIo(e.to_string()))?;
        if model.version != MODEL_VERSION {
            return Err(RlError::ModelIo(format!("unsupported model version {}", model.version)));
        }
        Ok(model)
    }
}

/// A trained (or freshly initialized) actor usable as a Step-2 policy. The
/// parameters are size-agnostic across node counts; only the feature width,
/// fixed by the lookahead, must match the evaluation scenario.
#[derive(Debug, Clone)]
pub struct GraphRlPolicy {
    pub lookahead: usize,
    pub actor: GraphNet<f64>,
}

impl GraphRlPolicy {
    pub fn from_model(model: &ModelFile) -> Self {
        GraphRlPolicy { lookahead: model.lookahead, actor: model.actor.clone() }
    }

    pub fn check_compatible(&self, lookahead: usize) -> Result<(), RlError> {
        if self.lookahead != lookahead {
            return Err(RlError::FeatureShape(format!(
                "model was trained with lookahead {} ({} features), evaluation asked for {} ({})",
                self.lookahead,
                feature_dim(self.lookahead),
                lookahead,
                feature_dim(lookahead)
            )));
        }
        Ok(())
    }

    /// Deterministic evaluation action: the Dirichlet mean.
    pub fn action(&self, features: &Mat<f64>, mats: &GraphMatrices<f64>) -> Action {
        let (raw, _) = self.actor.forward(features, mats);
        let alpha: Vec<f64> = raw
            .iter()
            .map(|&z| {
                let sp = if z > 30.0 { z } else { (1.0 + z.exp()).ln() };
                sp + super::nn::ALPHA_FLOOR
            })
            .collect();
        let total: f64 = alpha.iter().sum();
        Action::new(alpha.iter().map(|a| a / total).collect()).expect("mean is on the simplex")
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutcome {
    /// Total profit per training episode.
    pub reward_curve: Vec<f64>,
}

/// Incremental trainer: run episodes in chunks, inspect the curve, stop
/// when a criterion is met, then freeze the model.
pub struct Trainer {
    config: ScenarioConfig,
    graph: SpaceChargeGraph,
    pub agent: SacAgent,
    buffer: ReplayBuffer,
    tc: TrainConfig,
    episodes_run: usize,
    env_steps: usize,
    action_rng: ChaCha8Rng,
    update_rng: ChaCha8Rng,
    pub curve: Vec<f64>,
}

impl Trainer {
    pub fn new(config: &ScenarioConfig, graph: &SpaceChargeGraph, tc: TrainConfig) -> Self {
        let mats = GraphMatrices::new(graph.node_count(), graph.adjacency());
        let agent = SacAgent::new(tc.lookahead, feature_dim(tc.lookahead), mats, tc.hyper.clone(), tc.seed);
        let buffer = ReplayBuffer::new(tc.hyper.buffer_capacity);
        Trainer {
            config: config.clone(),
            graph: graph.clone(),
            agent,
            buffer,
            action_rng: ChaCha8Rng::seed_from_u64(tc.seed.wrapping_add(0x5ac)),
            update_rng: ChaCha8Rng::seed_from_u64(tc.seed.wrapping_add(0xbadcafe)),
            tc,
            episodes_run: 0,
            env_steps: 0,
            curve: Vec::new(),
        }
    }

    pub fn episodes_run(&self) -> usize {
        self.episodes_run
    }

    /// Demand seed for a training episode; evaluation seeds live in a
    /// different stream so training never sees them.
    fn episode_seed(&self, episode: usize) -> u64 {
        self.tc.seed ^ (episode as u64).wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1)
    }

    pub fn run_episodes(&mut self, count: usize) -> Result<(), RlError> {
        for _ in 0..count {
            let episode = self.episodes_run;
            let realization = sample_realization(&self.config, self.episode_seed(episode));
            let mut state = reset(&self.config, &self.graph);
            let mut features = featurize(&state, &self.config, &self.graph, self.tc.lookahead);
            let mut episode_reward = 0.0;
            for t in 1..=self.config.horizon {
                let matched = match_passengers(&state, realization.step(t), t, &self.graph, &self.config)
                    .expect("matching is always feasible");
                let (action_vec, _logp) = self.agent.sample_action(&features, &mut self.action_rng)?;
                let action = Action::new(action_vec.clone()).expect("sample lies on the simplex");
                let target = compute_target(&action, &matched.residual_idle)
                    .expect("dirichlet actions are valid");
                let reb = rebalance_residual(
                    &matched.residual_idle,
                    &state,
                    &target,
                    t,
                    &self.graph,
                    &self.config,
                )
                .expect("rebalancing with slack is always feasible");
                let summary = state
                    .step(&matched.flows, &reb.flows, &self.graph, &self.config)
                    .expect("trilevel flows respect availability");
                let next_features = featurize(&state, &self.config, &self.graph, self.tc.lookahead);
                episode_reward += summary.reward;
                self.buffer.push(Transition {
                    features,
                    action: action_vec,
                    reward: summary.reward,
                    next_features: next_features.clone(),
                    done: t == self.config.horizon,
                });
                features = next_features;
                self.env_steps += 1;
                if self.buffer.len() >= self.tc.hyper.warmup_transitions
                    && self.env_steps % self.tc.hyper.update_every == 0
                {
                    let batch = self.buffer.sample(self.tc.hyper.batch_size, &mut self.update_rng);
                    self.agent.update(&batch, &mut self.update_rng)?;
                }
            }
            self.curve.push(episode_reward);
            self.episodes_run += 1;
        }
        Ok(())
    }

    pub fn policy(&self) -> GraphRlPolicy {
        GraphRlPolicy { lookahead: self.tc.lookahead, actor: self.agent.actor.clone() }
    }

    pub fn into_model(self) -> ModelFile {
        ModelFile {
            version: MODEL_VERSION,
            lookahead: self.tc.lookahead,
            feature_dim: feature_dim(self.tc.lookahead),
            actor: self.agent.actor,
            critic1: self.agent.critic1,
            critic2: self.agent.critic2,
            log_temp: self.agent.log_temp,
            training: TrainEcho {
                scenario: self.config.name.clone(),
                episodes_run: self.episodes_run,
                seed: self.tc.seed,
                hyper: self.tc.hyper.clone(),
            },
        }
    }
}

/// Trains for a fixed number of episodes and returns the model plus the
/// per-episode reward curve. Deterministic in the seed.
pub fn train(
    config: &ScenarioConfig,
    graph: &SpaceChargeGraph,
    tc: TrainConfig,
) -> Result<(ModelFile, TrainOutcome), RlError> {
    let episodes = tc.episodes;
    let mut trainer = Trainer::new(config, graph, tc);
    trainer.run_episodes(episodes)?;
    let outcome = TrainOutcome { reward_curve: trainer.curve.clone() };
    Ok((trainer.into_model(), outcome))
}
