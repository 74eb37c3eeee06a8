//! Baseline controllers: the three charging heuristics with uniform spatial
//! spreading for Step 2, and the receding-horizon MPC family that plans
//! directly on the global space-charge-time LP.

use thiserror::Error;

use crate::graph::SpaceChargeGraph;
use crate::lp::{assemble_global_lp, solve_lp_integral, LpError, SolveStatus, WindowBoundary};
use crate::scenario::{DemandRealization, ScenarioConfig};
use crate::sim::FleetState;
use crate::trilevel::{Action, TrilevelError};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Trilevel(#[from] TrilevelError),
    #[error("planning program came back {0:?}")]
    PlanStatus(SolveStatus),
    #[error("unknown policy `{0}`; expected empty-to-full|offpeak-abs|offpeak-rel|mpc:<h>|mpc-oracle|graph-rl:<model-path>")]
    UnknownPolicy(String),
    #[error(transparent)]
    Model(#[from] crate::rl::RlError),
}

/// A selectable controller. Heuristics and the graph-RL agent drive Step 2
/// of the tri-level pipeline; the MPC variants plan whole flow vectors on
/// the global LP.
#[derive(Debug, Clone)]
pub enum PolicyKind {
    EmptyToFull,
    OffPeakAbsolute,
    OffPeakRelative,
    Mpc { horizon: usize },
    MpcOracle,
    GraphRl(crate::rl::GraphRlPolicy),
}

impl PolicyKind {
    /// Parses the CLI policy syntax; `graph-rl:<path>` loads the model file.
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        match text {
            "empty-to-full" => Ok(PolicyKind::EmptyToFull),
            "offpeak-abs" => Ok(PolicyKind::OffPeakAbsolute),
            "offpeak-rel" => Ok(PolicyKind::OffPeakRelative),
            "mpc-oracle" => Ok(PolicyKind::MpcOracle),
            other => {
                if let Some(h) = other.strip_prefix("mpc:") {
                    let horizon: usize = h
                        .parse()
                        .map_err(|_| PolicyError::UnknownPolicy(other.to_string()))?;
                    if horizon < 1 {
                        return Err(PolicyError::UnknownPolicy(other.to_string()));
                    }
                    return Ok(PolicyKind::Mpc { horizon });
                }
                if let Some(path) = other.strip_prefix("graph-rl:") {
                    let model = crate::rl::ModelFile::load(path)?;
                    return Ok(PolicyKind::GraphRl(crate::rl::GraphRlPolicy::from_model(&model)));
                }
                Err(PolicyError::UnknownPolicy(other.to_string()))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            PolicyKind::EmptyToFull => "empty-to-full".into(),
            PolicyKind::OffPeakAbsolute => "offpeak-abs".into(),
            PolicyKind::OffPeakRelative => "offpeak-rel".into(),
            PolicyKind::Mpc { horizon } => format!("mpc:{horizon}"),
            PolicyKind::MpcOracle => "mpc-oracle".into(),
            PolicyKind::GraphRl(_) => "graph-rl".into(),
        }
    }

    pub fn heuristic_kind(&self) -> Option<HeuristicKind> {
        match self {
            PolicyKind::EmptyToFull => Some(HeuristicKind::EmptyToFull),
            PolicyKind::OffPeakAbsolute => Some(HeuristicKind::OffPeakAbsolute),
            PolicyKind::OffPeakRelative => Some(HeuristicKind::OffPeakRelative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    /// Vehicles below the mean trip energy recharge as far toward full as
    /// the charge ladder allows.
    EmptyToFull,
    /// Off-peak: vehicles below 30% of full charge gain one step of charge.
    /// Peak: only vehicles below the mean trip energy do.
    OffPeakAbsolute,
    /// Off-peak: the lowest 30% of vehicles by charge within each region
    /// gain one step of charge. Peak behaves like OffPeakAbsolute.
    OffPeakRelative,
}

/// Desired idle distribution for a heuristic at step `t`, computed over the
/// post-matching idle counts. Charging vehicles keep their region and move
/// up the ladder; everyone else spreads uniformly over regions at their
/// current charge level.
pub fn heuristic_distribution(
    kind: HeuristicKind,
    idle: &[u64],
    config: &ScenarioConfig,
    t: usize,
) -> Action {
    let a = config.region_count;
    let c_max = config.charge_levels;
    let t_c = config.charge_rate;
    let nodes = a * c_max;
    assert_eq!(idle.len(), nodes);
    let total: u64 = idle.iter().sum();
    if total == 0 {
        return Action::uniform(nodes);
    }
    let mean_energy = config.mean_trip_energy();
    let peak = config.is_peak_price(t);

    // Charging counts per node; the remainder spreads spatially.
    let mut desired = vec![0.0f64; nodes];
    let mut remaining_by_charge = vec![0u64; c_max + 1];

    // Highest ladder level reachable from `c`, or None when full enough.
    let ladder_top = |c: usize| -> Option<usize> {
        let k = (c_max - c) / t_c;
        (k > 0).then(|| c + k * t_c)
    };
    let one_step = |c: usize| -> Option<usize> {
        (c + t_c <= c_max).then(|| c + t_c)
    };

    for region in 0..a {
        // Off-peak relative: pick the lowest 30% by charge in this region.
        let mut relative_quota = if kind == HeuristicKind::OffPeakRelative && !peak {
            let in_region: u64 = (1..=c_max).map(|c| idle[region * c_max + (c - 1)]).sum();
            (0.30 * in_region as f64).floor() as u64
        } else {
            0
        };
        for charge in 1..=c_max {
            let node = region * c_max + (charge - 1);
            let count = idle[node];
            if count == 0 {
                continue;
            }
            let wants_charge = match kind {
                HeuristicKind::EmptyToFull => (charge as f64) < mean_energy,
                HeuristicKind::OffPeakAbsolute => {
                    if peak {
                        (charge as f64) < mean_energy
                    } else {
                        (charge as f64) < 0.30 * c_max as f64
                    }
                }
                HeuristicKind::OffPeakRelative => {
                    if peak {
                        (charge as f64) < mean_energy
                    } else {
                        relative_quota > 0
                    }
                }
            };
            let mut chargers = if wants_charge { count } else { 0 };
            if kind == HeuristicKind::OffPeakRelative && !peak {
                chargers = chargers.min(relative_quota);
                relative_quota -= chargers;
            }
            let target = if chargers > 0 {
                match kind {
                    HeuristicKind::EmptyToFull => ladder_top(charge),
                    _ => one_step(charge),
                }
            } else {
                None
            };
            match target {
                Some(level) => {
                    desired[region * c_max + (level - 1)] += chargers as f64;
                    remaining_by_charge[charge] += count - chargers;
                }
                None => remaining_by_charge[charge] += count,
            }
        }
    }
    for charge in 1..=c_max {
        let spread = remaining_by_charge[charge] as f64 / a as f64;
        if spread > 0.0 {
            for region in 0..a {
                desired[region * c_max + (charge - 1)] += spread;
            }
        }
    }
    Action::from_counts(&desired).expect("desired counts are non-negative")
}

/// Demand information available to the planner: the oracle sees the whole
/// realization, plain MPC sees this step's requests plus expected rates.
#[derive(Debug, Clone, Copy)]
pub enum MpcDemand<'a> {
    Oracle(&'a DemandRealization),
    Observed { current: &'a [u64] },
}

/// Sparse flow lists for one step: (edge index, count).
pub type StepFlows = (Vec<(usize, u64)>, Vec<(usize, u64)>);

/// Receding-horizon planning: assemble the global LP over the next `horizon`
/// steps from the current fleet state and return the first step's flows.
pub fn mpc_policy(
    state: &FleetState,
    config: &ScenarioConfig,
    graph: &SpaceChargeGraph,
    horizon: usize,
    demand: MpcDemand<'_>,
) -> Result<StepFlows, PolicyError> {
    let t0 = state.clock;
    if t0 > config.horizon {
        return Ok((Vec::new(), Vec::new()));
    }
    let h = horizon.min(config.horizon - t0 + 1).max(1);
    let plan = plan_window(state, config, graph, t0, h, demand)?;
    Ok(plan.flows_at_step(t0))
}

/// A solved planning window; the oracle executes it step by step since a
/// re-solve with perfect foresight reproduces the same value.
#[derive(Debug, Clone)]
pub struct PlannedFlows {
    lp: crate::lp::GlobalLp,
    values: Vec<f64>,
    pub objective: f64,
}

impl PlannedFlows {
    pub fn flows_at_step(&self, t: usize) -> StepFlows {
        self.lp.flows_at(&self.values, t)
    }
}

pub fn plan_window(
    state: &FleetState,
    config: &ScenarioConfig,
    graph: &SpaceChargeGraph,
    t0: usize,
    h: usize,
    demand: MpcDemand<'_>,
) -> Result<PlannedFlows, PolicyError> {
    let a = config.region_count;
    let mut window: Vec<Vec<u64>> = Vec::with_capacity(h);
    for k in 0..h {
        let t = t0 + k;
        let step = match demand {
            MpcDemand::Oracle(real) => real.step(t).to_vec(),
            MpcDemand::Observed { current } => {
                if k == 0 {
                    current.to_vec()
                } else {
                    // Expected rates rounded to the nearest whole trip.
                    let mut m = vec![0u64; a * a];
                    for i in 0..a {
                        for j in 0..a {
                            m[i * a + j] = config.demand_rate(i, j, t).round() as u64;
                        }
                    }
                    m
                }
            }
        };
        window.push(step);
    }
    let boundary = WindowBoundary {
        initial_idle: state.idle().to_vec(),
        arrivals: state
            .pending_arrivals()
            .into_iter()
            .filter(|&(_, step, _)| step < t0 + h)
            .collect(),
        plug_blocked: (0..a)
            .map(|region| (0..h).map(|k| state.plugs_blocked_at(region, t0 + k)).collect())
            .collect(),
    };
    let lp = assemble_global_lp(config, graph, &window, t0, h, &boundary)?;
    let solution = solve_lp_integral(&lp.spec, &lp.integral_mask)?;
    if solution.status != SolveStatus::Optimal {
        return Err(PolicyError::PlanStatus(solution.status));
    }
    Ok(PlannedFlows { lp, values: solution.values, objective: solution.objective_value })
}

/// Full-horizon plan with perfect foresight from the episode start.
pub fn oracle_plan(
    state: &FleetState,
    config: &ScenarioConfig,
    graph: &SpaceChargeGraph,
    realization: &DemandRealization,
) -> Result<PlannedFlows, PolicyError> {
    let t0 = state.clock;
    let h = config.horizon - t0 + 1;
    plan_window(state, config, graph, t0, h, MpcDemand::Oracle(realization))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, NodeId};
    use crate::scenario::test_fixtures::{manual_config, ManualScenario};
    use crate::scenario::{sample_realization, DemandRealization, TimeMatrix};
    use crate::sim::reset;

    fn four_region_config() -> ScenarioConfig {
        manual_config(ManualScenario {
            regions: 4,
            charge_levels: 19,
            charge_rate: 6,
            horizon: 48,
            travel_time: vec![vec![1; 4]; 4],
            energy: {
                let mut m = vec![vec![2; 4]; 4];
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = 0;
                }
                m
            },
            distance: vec![vec![3.0; 4]; 4],
            fleet_size: 8,
            chargers: vec![2; 4],
            demand_scale: 0.5,
        })
    }

    #[test]
    fn full_charge_fleet_spreads_uniformly() {
        let config = four_region_config();
        // 8 idle vehicles at full charge in two regions.
        let mut idle = vec![0u64; config.node_count()];
        idle[0 * 19 + 18] = 4;
        idle[1 * 19 + 18] = 4;
        let action = heuristic_distribution(HeuristicKind::EmptyToFull, &idle, &config, 1);
        for region in 0..4 {
            let w = action.weights()[region * 19 + 18];
            assert!((w - 0.25).abs() < 1e-12, "region {region} weight {w}");
        }
    }

    #[test]
    fn empty_to_full_targets_the_ladder_top() {
        let config = four_region_config();
        // Mean trip energy is 2 levels (uniform demand; eta off-diagonal 2,
        // intra zero): demand-weighted mean sits near 1.5, so charge 1 wants
        // charging. From charge 1 the ladder reaches 19.
        let mut idle = vec![0u64; config.node_count()];
        idle[2 * 19 + 0] = 1;
        let action = heuristic_distribution(HeuristicKind::EmptyToFull, &idle, &config, 1);
        assert!((action.weights()[2 * 19 + 18] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offpeak_absolute_peak_rule_spares_forty_percent_charge() {
        let config = four_region_config();
        // Step 40 sits in the 4-8pm peak tier of the shipped schedule.
        assert!(config.is_peak_price(40));
        let mut idle = vec![0u64; config.node_count()];
        let charge = (0.4 * 19.0) as usize; // level 7, above mean trip energy
        idle[19 + charge - 1] = 2;
        let action = heuristic_distribution(HeuristicKind::OffPeakAbsolute, &idle, &config, 40);
        // No charging: mass stays at level 7, spread over regions.
        for region in 0..4 {
            assert!((action.weights()[region * 19 + charge - 1] - 0.25).abs() < 1e-12);
        }
        // Off-peak the same vehicle is above 30% of C (5.7), so still no charge.
        let action = heuristic_distribution(HeuristicKind::OffPeakAbsolute, &idle, &config, 10);
        for region in 0..4 {
            assert!((action.weights()[region * 19 + charge - 1] - 0.25).abs() < 1e-12);
        }
        // A level-5 vehicle is below 30% and gains one charge step off-peak.
        let mut idle = vec![0u64; config.node_count()];
        idle[19 + 4] = 1; // region 1, charge 5
        let action = heuristic_distribution(HeuristicKind::OffPeakAbsolute, &idle, &config, 10);
        assert!((action.weights()[19 + 10] - 1.0).abs() < 1e-12, "expected mass at charge 11");
    }

    #[test]
    fn offpeak_relative_takes_lowest_third_per_region() {
        let config = four_region_config();
        let mut idle = vec![0u64; config.node_count()];
        // Region 0: 10 vehicles, charges 1..=10. floor(0.3 * 10) = 3 charge.
        for c in 1..=10 {
            idle[c - 1] = 1;
        }
        let action = heuristic_distribution(HeuristicKind::OffPeakRelative, &idle, &config, 10);
        assert!(!config.is_peak_price(10));
        // Lowest three (charges 1, 2, 3) move to 7, 8, 9 in region 0.
        for from in 1..=3 {
            let to = from + 6;
            let w = action.weights()[to - 1];
            assert!(w > 0.0, "charge {from} should land on {to}");
        }
        // Charge 4 stays and spreads: weight at region 0 charge 4 is 1/(4*10).
        assert!((action.weights()[3] - 0.25 / 10.0).abs() < 1e-12);
    }

    fn toy_two_region() -> (ScenarioConfig, SpaceChargeGraph) {
        let mut config = manual_config(ManualScenario {
            regions: 2,
            charge_levels: 3,
            charge_rate: 1,
            horizon: 3,
            travel_time: vec![vec![1, 1], vec![1, 1]],
            energy: vec![vec![0, 1], vec![1, 0]],
            distance: vec![vec![0.0, 2.0], vec![2.0, 0.0]],
            fleet_size: 1,
            chargers: vec![1, 1],
            demand_scale: 0.0,
        });
        config.set_revenue(TimeMatrix::Constant(vec![vec![10.0, 10.0], vec![10.0, 10.0]])).unwrap();
        config.set_op_cost(TimeMatrix::Constant(vec![vec![0.5, 1.0], vec![1.0, 0.5]])).unwrap();
        let graph = build_graph(&config).unwrap();
        (config, graph)
    }

    #[test]
    fn zero_demand_plan_never_moves() {
        let (config, graph) = toy_two_region();
        let state = reset(&config, &graph);
        let real = DemandRealization::new(2, vec![vec![0; 4]; 3]);
        let (x, y) = mpc_policy(&state, &config, &graph, 1, MpcDemand::Oracle(&real)).unwrap();
        assert!(x.is_empty());
        for &(e, _) in &y {
            assert!(graph.edge(e).is_self_loop(), "only self-loop idling expected");
        }
    }

    #[test]
    fn oracle_prepositions_where_myopic_mpc_cannot() {
        let (mut config, graph) = toy_two_region();
        // Vehicle starts at (0, charge 3); a single trip 1 -> 0 appears at
        // step 2. The oracle moves to region 1 at step 1 and serves it; a
        // 1-step MPC sees no reason to move at step 1.
        let mut dist = vec![0u64; 6];
        dist[graph.node_index(NodeId { region: 0, charge: 3 })] = 1;
        config.set_initial_distribution(dist).unwrap();
        let mut trips = vec![vec![0u64; 4]; 3];
        trips[1][1 * 2 + 0] = 1;
        let real = DemandRealization::new(2, trips);
        let state = reset(&config, &graph);

        let oracle = oracle_plan(&state, &config, &graph, &real).unwrap();
        let (x1, y1) = oracle.flows_at_step(1);
        assert!(x1.is_empty());
        let moved = y1.iter().any(|&(e, _)| {
            let edge = graph.edge(e);
            !edge.is_self_loop() && edge.to.region == 1
        });
        assert!(moved, "oracle should reposition toward region 1: {y1:?}");

        let current = real.step(1).to_vec();
        let (x_myopic, y_myopic) =
            mpc_policy(&state, &config, &graph, 1, MpcDemand::Observed { current: &current }).unwrap();
        assert!(x_myopic.is_empty());
        assert!(y_myopic.iter().all(|&(e, _)| graph.edge(e).is_self_loop()));
    }

    #[test]
    fn oracle_plan_value_matches_simulated_profit() {
        let config = manual_config(ManualScenario {
            regions: 2,
            charge_levels: 3,
            charge_rate: 1,
            horizon: 6,
            travel_time: vec![vec![1, 2], vec![2, 1]],
            energy: vec![vec![0, 1], vec![1, 0]],
            distance: vec![vec![0.5, 2.5], vec![2.5, 0.5]],
            fleet_size: 3,
            chargers: vec![1, 1],
            demand_scale: 0.8,
        });
        let graph = build_graph(&config).unwrap();
        let real = sample_realization(&config, 4);
        let mut state = reset(&config, &graph);
        let plan = oracle_plan(&state, &config, &graph, &real).unwrap();
        for t in 1..=config.horizon {
            let (x, y) = plan.flows_at_step(t);
            state.step(&x, &y, &graph, &config).unwrap();
        }
        assert!(
            (state.totals.profit() - plan.objective).abs() < 1e-6,
            "sim {} vs plan {}",
            state.totals.profit(),
            plan.objective
        );
    }
}
