//! Benchmark harness: seeded episode runs with paired demand realizations,
//! per-decision latency measurement, policy comparison tables with
//! percent-of-oracle, and zero-shot transfer evaluation.

mod table;

pub use table::{parse_table_csv, ComparisonRow, ComparisonTable};

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::SpaceChargeGraph;
use crate::policies::{
    heuristic_distribution, mpc_policy, oracle_plan, plan_window, MpcDemand, PolicyError,
    PolicyKind,
};
use crate::rl::{featurize, GraphMatrices, ModelFile, RlError};
use crate::scenario::{sample_realization, ScenarioConfig};
use crate::sim::{reset, SimError, TraceRow};
use crate::trilevel::{compute_target, rebalance_residual, match_passengers, TrilevelError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Trilevel(#[from] TrilevelError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error("comparison requires the mpc-oracle policy for percent-of-oracle")]
    MissingOracle,
    #[error("oracle profit is not positive on scenario {0}; percent-of-oracle undefined")]
    UnprofitableOracle(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Metrics for one seeded episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub profit: f64,
    pub revenue: f64,
    pub served_demand: u64,
    pub total_demand: u64,
    pub operating_cost: f64,
    /// Wall-clock seconds around the per-step decision code.
    pub decision_latencies: Vec<f64>,
}

impl EpisodeMetrics {
    pub fn median_latency(&self, warmup: usize) -> f64 {
        let mut lat: Vec<f64> = self.decision_latencies.iter().skip(warmup).copied().collect();
        if lat.is_empty() {
            lat = self.decision_latencies.clone();
        }
        lat.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if lat.is_empty() {
            0.0
        } else {
            lat[lat.len() / 2]
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Re-solve receding-horizon programs at every step so the measured
    /// per-decision cost is honest. Off by default: the oracle's plan is
    /// value-identical when executed from its cached full-horizon solve.
    pub latency_mode: bool,
}

/// Runs one episode of a policy under a seed. All policies see the demand
/// realization drawn from the seed alone, so runs pair across policies.
pub fn run_episode(
    policy: &PolicyKind,
    config: &ScenarioConfig,
    graph: &SpaceChargeGraph,
    seed: u64,
    options: RunOptions,
) -> Result<EpisodeMetrics, BenchError> {
    run_episode_impl(policy, config, graph, seed, options, None)
}

/// As [`run_episode`], also filling `trace` with every executed flow.
pub fn run_episode_traced(
    policy: &PolicyKind,
    config: &ScenarioConfig,
    graph: &SpaceChargeGraph,
    seed: u64,
    options: RunOptions,
    trace: &mut Vec<TraceRow>,
) -> Result<EpisodeMetrics, BenchError> {
    run_episode_impl(policy, config, graph, seed, options, Some(trace))
}

fn run_episode_impl(
    policy: &PolicyKind,
    config: &ScenarioConfig,
    graph: &SpaceChargeGraph,
    seed: u64,
    options: RunOptions,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<EpisodeMetrics, BenchError> {
    let realization = sample_realization(config, seed);
    let mut state = reset(config, graph);
    let mut latencies = Vec::with_capacity(config.horizon);

    let rl_setup = match policy {
        PolicyKind::GraphRl(p) => {
            Some((p, GraphMatrices::<f64>::new(graph.node_count(), graph.adjacency())))
        }
        _ => None,
    };
    let mut oracle_cache = None;
    if matches!(policy, PolicyKind::MpcOracle) && !options.latency_mode {
        oracle_cache = Some(oracle_plan(&state, config, graph, &realization)?);
    }

    for t in 1..=config.horizon {
        let demand = realization.step(t);
        let started = Instant::now();
        let (x, y) = match policy {
            PolicyKind::EmptyToFull | PolicyKind::OffPeakAbsolute | PolicyKind::OffPeakRelative => {
                let kind = policy.heuristic_kind().expect("heuristic variant");
                let matched = match_passengers(&state, demand, t, graph, config)?;
                let action = heuristic_distribution(kind, &matched.residual_idle, config, t);
                let target = compute_target(&action, &matched.residual_idle)?;
                let reb = rebalance_residual(&matched.residual_idle, &state, &target, t, graph, config)?;
                (matched.flows, reb.flows)
            }
            PolicyKind::GraphRl(_) => {
                let (rl_policy, mats) = rl_setup.as_ref().expect("rl setup");
                let features = featurize(&state, config, graph, rl_policy.lookahead);
                let matched = match_passengers(&state, demand, t, graph, config)?;
                let action = rl_policy.action(&features, mats);
                let target = compute_target(&action, &matched.residual_idle)?;
                let reb = rebalance_residual(&matched.residual_idle, &state, &target, t, graph, config)?;
                (matched.flows, reb.flows)
            }
            PolicyKind::Mpc { horizon } => {
                mpc_policy(&state, config, graph, *horizon, MpcDemand::Observed { current: demand })?
            }
            PolicyKind::MpcOracle => match &oracle_cache {
                Some(plan) => plan.flows_at_step(t),
                None => {
                    let h = config.horizon - t + 1;
                    plan_window(&state, config, graph, t, h, MpcDemand::Oracle(&realization))?
                        .flows_at_step(t)
                }
            },
        };
        latencies.push(started.elapsed().as_secs_f64());
        state.step_with_trace(&x, &y, graph, config, trace.as_deref_mut())?;
    }

    Ok(EpisodeMetrics {
        seed,
        profit: state.totals.profit(),
        revenue: state.totals.revenue,
        served_demand: state.totals.served,
        total_demand: realization.total(),
        operating_cost: state.totals.operating_cost,
        decision_latencies: latencies,
    })
}

/// Number of leading per-episode latency samples discarded as warm-up.
pub const LATENCY_WARMUP: usize = 5;

/// Runs every policy over every scenario and seed, pairing demand by seed,
/// and assembles the comparison table. The oracle must be in the policy
/// list; its profit is the denominator of percent-of-oracle. Episodes run
/// in parallel; latency measurements rerun sequentially afterward when
/// requested.
pub fn compare(
    policies: &[PolicyKind],
    scenarios: &[(String, ScenarioConfig)],
    seeds: &[u64],
    measure_latency: bool,
) -> Result<ComparisonTable, BenchError> {
    let oracle_pos = policies
        .iter()
        .position(|p| matches!(p, PolicyKind::MpcOracle))
        .ok_or(BenchError::MissingOracle)?;
    let _ = oracle_pos;

    let mut rows = Vec::new();
    for (scenario_name, config) in scenarios {
        let graph = crate::graph::build_graph(config).expect("scenario builds a graph");
        // Parallel over (policy, seed) pairs; results are re-sorted after.
        let jobs: Vec<(usize, u64)> = (0..policies.len())
            .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
            .collect();
        let metrics: Result<Vec<((usize, u64), EpisodeMetrics)>, BenchError> = jobs
            .par_iter()
            .map(|&(p, s)| {
                run_episode(&policies[p], config, &graph, s, RunOptions::default())
                    .map(|m| ((p, s), m))
            })
            .collect();
        let metrics = metrics?;

        let by_policy = |p: usize| -> Vec<&EpisodeMetrics> {
            let mut list: Vec<(&u64, &EpisodeMetrics)> = metrics
                .iter()
                .filter(|((pi, _), _)| *pi == p)
                .map(|((_, s), m)| (s, m))
                .collect();
            list.sort_by_key(|(s, _)| **s);
            list.into_iter().map(|(_, m)| m).collect()
        };
        let oracle_metrics = by_policy(oracle_pos);
        let oracle_mean: f64 =
            oracle_metrics.iter().map(|m| m.profit).sum::<f64>() / oracle_metrics.len() as f64;
        if oracle_mean <= 0.0 {
            return Err(BenchError::UnprofitableOracle(scenario_name.clone()));
        }

        for (p, policy) in policies.iter().enumerate() {
            let runs = by_policy(p);
            let n = runs.len() as f64;
            let mean_profit = runs.iter().map(|m| m.profit).sum::<f64>() / n;
            let var = runs.iter().map(|m| (m.profit - mean_profit).powi(2)).sum::<f64>() / n;
            let latency = if measure_latency {
                // Sequential rerun to keep timings free of thread contention.
                let mut pooled = Vec::new();
                for &s in seeds.iter().take(2) {
                    let m = run_episode(policy, config, &graph, s, RunOptions { latency_mode: true })?;
                    pooled.extend(m.decision_latencies);
                }
                median_after_warmup(&pooled, LATENCY_WARMUP)
            } else {
                let pooled: Vec<f64> =
                    runs.iter().flat_map(|m| m.decision_latencies.iter().copied()).collect();
                median_after_warmup(&pooled, LATENCY_WARMUP)
            };
            rows.push(ComparisonRow {
                scenario: scenario_name.clone(),
                policy: policy.name(),
                seeds: runs.len(),
                mean_profit,
                std_profit: var.sqrt(),
                mean_served: runs.iter().map(|m| m.served_demand as f64).sum::<f64>() / n,
                mean_operating_cost: runs.iter().map(|m| m.operating_cost).sum::<f64>() / n,
                percent_of_oracle: 100.0 * mean_profit / oracle_mean,
                median_latency_s: latency,
            });
        }
    }
    rows.sort_by(|a, b| (&a.scenario, &a.policy).cmp(&(&b.scenario, &b.policy)));
    Ok(ComparisonTable { rows })
}

pub(crate) fn median_after_warmup(samples: &[f64], warmup: usize) -> f64 {
    let mut rest: Vec<f64> = samples.iter().skip(warmup).copied().collect();
    if rest.is_empty() {
        rest = samples.to_vec();
    }
    if rest.is_empty() {
        return 0.0;
    }
    rest.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rest[rest.len() / 2]
}

/// Zero-shot transfer: evaluate a trained model on a target scenario it was
/// never trained on, reporting percent-of-oracle there. `lookahead` is the
/// evaluation-side feature window and must match the model's.
pub fn transfer_eval(
    model: &ModelFile,
    target: &(String, ScenarioConfig),
    seeds: &[u64],
    lookahead: usize,
) -> Result<ComparisonTable, BenchError> {
    let policy = crate::rl::GraphRlPolicy::from_model(model);
    policy.check_compatible(lookahead)?;
    let policies = vec![PolicyKind::GraphRl(policy), PolicyKind::MpcOracle];
    let mut table = compare(&policies, std::slice::from_ref(target), seeds, false)?;
    table.rows.retain(|r| r.policy == "graph-rl");
    Ok(table)
}
