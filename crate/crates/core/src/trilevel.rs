//! The per-step control pipeline: (1) match idle vehicles to realized trip
//! requests with a profit-maximizing flow, (2) turn a desired idle-vehicle
//! distribution into integer node targets with the floor rule, (3) route
//! idle vehicles toward those targets at minimum cost with slack for
//! unreachable mass.

use thiserror::Error;

use crate::graph::{EdgeKind, SpaceChargeGraph};
use crate::lp::{
    solve_lp_integral, solve_min_cost_flow, Constraint, FlowNetwork, LinearProgramSpec, LpError,
    Relation, SolveStatus, VarLabel,
};
use crate::scenario::ScenarioConfig;
use crate::sim::FleetState;

/// Cost bias that makes higher-charge vehicles serve trips first when
/// several charge levels tie; far below any real cost difference.
const CHARGE_BIAS: f64 = 1e-6;
/// Penalty factor multiplying the maximum edge cost to price distribution
/// slack in the rebalancing program.
const PENALTY_FACTOR: f64 = 1e4;

#[derive(Debug, Error)]
pub enum TrilevelError {
    #[error("action is not a probability distribution: {0}")]
    BadAction(String),
    #[error("targets exceed available idle vehicles ({target} > {idle})")]
    TargetExceedsIdle { target: u64, idle: u64 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("rebalancing program unexpectedly {0:?}")]
    UnexpectedStatus(SolveStatus),
}

/// Desired distribution of idle vehicles over all space-charge nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Action(Vec<f64>);

impl Action {
    /// Accepts a non-negative vector within 1e-6 of the simplex and
    /// renormalizes it exactly.
    pub fn new(weights: Vec<f64>) -> Result<Self, TrilevelError> {
        if weights.is_empty() {
            return Err(TrilevelError::BadAction("empty action".into()));
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < -1e-9 {
                return Err(TrilevelError::BadAction(format!("entry {w}")));
            }
            sum += w.max(0.0);
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(TrilevelError::BadAction(format!("weights sum to {sum}")));
        }
        let normalized = weights.into_iter().map(|w| w.max(0.0) / sum).collect();
        Ok(Action(normalized))
    }

    /// Uniform distribution, the fallback when no vehicle is idle.
    pub fn uniform(len: usize) -> Self {
        Action(vec![1.0 / len as f64; len])
    }

    pub fn from_counts(counts: &[f64]) -> Result<Self, TrilevelError> {
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Ok(Action::uniform(counts.len()));
        }
        Action::new(counts.iter().map(|c| c / total).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Passenger counts per road edge, sparse and sorted by edge index.
    pub flows: Vec<(usize, u64)>,
    /// Matching profit, excluding the tie-break bias.
    pub profit: f64,
    /// Idle vehicles left at each node after matching.
    pub residual_idle: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceResult {
    /// Rebalancing and charging counts per edge, sparse and sorted.
    pub flows: Vec<(usize, u64)>,
    /// Movement cost, excluding penalty terms.
    pub cost: f64,
    /// Unmet target per node.
    pub slack: Vec<u64>,
}

/// Step 1: solve the passenger matching as a min-cost flow. Demand is a
/// row-major region matrix of realized requests for the current step.
pub fn match_passengers(
    state: &FleetState,
    demand: &[u64],
    t: usize,
    graph: &SpaceChargeGraph,
    config: &ScenarioConfig,
) -> Result<MatchResult, TrilevelError> {
    let a = config.region_count;
    let idle = state.idle();
    let nodes = graph.node_count();
    let total_idle: i64 = idle.iter().map(|&n| n as i64).sum();

    // Network layout: source, one slot per space-charge node, one slot per
    // region pair with demand, sink.
    let mut pair_slot = vec![usize::MAX; a * a];
    let mut next = 1 + nodes;
    for pair in 0..a * a {
        if demand[pair] > 0 {
            pair_slot[pair] = next;
            next += 1;
        }
    }
    let sink = next;
    let mut net: FlowNetwork<f64> = FlowNetwork::new(sink + 1);
    net.supply[0] = total_idle;
    net.supply[sink] = -total_idle;

    let mut trip_arcs: Vec<(usize, usize)> = Vec::new(); // (arc, edge)
    for node in 0..nodes {
        if idle[node] == 0 {
            continue;
        }
        net.add_arc(0, 1 + node, idle[node] as i64, 0.0);
        net.add_arc(1 + node, sink, idle[node] as i64, 0.0);
        for &e in graph.out_edges(node) {
            let edge = graph.edge(e);
            if edge.kind != EdgeKind::Road {
                continue;
            }
            let pair = edge.from.region * a + edge.to.region;
            if pair_slot[pair] == usize::MAX {
                continue;
            }
            let fare = config.revenue(edge.from.region, edge.to.region, t);
            let cost = crate::graph::edge_cost(edge, t, config);
            let arc_cost = -(fare - cost) - CHARGE_BIAS * edge.from.charge as f64;
            let arc = net.add_arc(1 + node, pair_slot[pair], demand[pair] as i64, arc_cost);
            trip_arcs.push((arc, e));
        }
    }
    for pair in 0..a * a {
        if pair_slot[pair] != usize::MAX {
            net.add_arc(pair_slot[pair], sink, demand[pair] as i64, 0.0);
        }
    }

    let solution = solve_min_cost_flow(&net)?;
    debug_assert_eq!(solution.status, SolveStatus::Optimal);

    let mut flows = Vec::new();
    let mut profit = 0.0;
    let mut residual_idle = idle.to_vec();
    for &(arc, e) in &trip_arcs {
        let n = solution.flows[arc];
        if n > 0 {
            let edge = graph.edge(e);
            let fare = config.revenue(edge.from.region, edge.to.region, t);
            let cost = crate::graph::edge_cost(edge, t, config);
            profit += (fare - cost) * n as f64;
            residual_idle[graph.node_index(edge.from)] -= n as u64;
            flows.push((e, n as u64));
        }
    }
    flows.sort_by_key(|&(e, _)| e);
    Ok(MatchResult { flows, profit, residual_idle })
}

/// Step 2: integer node targets from the desired distribution, floor rule.
pub fn compute_target(action: &Action, residual_idle: &[u64]) -> Result<Vec<u64>, TrilevelError> {
    if action.len() != residual_idle.len() {
        return Err(TrilevelError::BadAction(format!(
            "action covers {} nodes, state has {}",
            action.len(),
            residual_idle.len()
        )));
    }
    let total: u64 = residual_idle.iter().sum();
    Ok(action.weights().iter().map(|&w| (w * total as f64).floor() as u64).collect())
}

/// Largest edge cost over the horizon, used to scale the slack penalty.
pub fn penalty_m(config: &ScenarioConfig) -> f64 {
    let a = config.region_count;
    let mut max_cost = 0.0f64;
    for t in 1..=config.horizon {
        for i in 0..a {
            for j in 0..a {
                max_cost = max_cost.max(config.op_cost(i, j, t));
            }
        }
        let max_delta = (config.charge_levels - 1) as f64;
        max_cost = max_cost.max(max_delta * config.elec_price(t));
    }
    PENALTY_FACTOR * max_cost.max(1.0)
}

/// Step 3: minimum-cost routing of idle vehicles toward the targets over
/// direct edges, with slack absorbing unreachable mass and per-region plug
/// capacity on newly started charge sessions.
pub fn rebalance(
    state: &FleetState,
    n_target: &[u64],
    t: usize,
    graph: &SpaceChargeGraph,
    config: &ScenarioConfig,
) -> Result<RebalanceResult, TrilevelError> {
    rebalance_idle(state.idle(), |r| state.plugs_blocked(r), n_target, t, graph, config)
}

/// As [`rebalance`], but on explicit residual idle counts (the pipeline
/// calls this after matching has committed departures).
pub fn rebalance_residual(
    residual_idle: &[u64],
    state: &FleetState,
    n_target: &[u64],
    t: usize,
    graph: &SpaceChargeGraph,
    config: &ScenarioConfig,
) -> Result<RebalanceResult, TrilevelError> {
    rebalance_idle(residual_idle, |r| state.plugs_blocked(r), n_target, t, graph, config)
}

fn rebalance_idle(
    idle: &[u64],
    plugs_blocked: impl Fn(usize) -> u64,
    n_target: &[u64],
    t: usize,
    graph: &SpaceChargeGraph,
    config: &ScenarioConfig,
) -> Result<RebalanceResult, TrilevelError> {
    let nodes = graph.node_count();
    assert_eq!(idle.len(), nodes);
    assert_eq!(n_target.len(), nodes);
    let total_idle: u64 = idle.iter().sum();
    let total_target: u64 = n_target.iter().sum();
    if total_target > total_idle {
        return Err(TrilevelError::TargetExceedsIdle { target: total_target, idle: total_idle });
    }

    // Columns: one per usable edge (stocked tail, not a self-loop), then one
    // slack per node.
    let mut edge_cols: Vec<(usize, usize)> = Vec::new(); // (edge, col)
    let mut spec: LinearProgramSpec<f64> = LinearProgramSpec::with_vars(0);
    for node in 0..nodes {
        if idle[node] == 0 {
            continue;
        }
        for &e in graph.out_edges(node) {
            if graph.edge(e).is_self_loop() {
                continue;
            }
            edge_cols.push((e, edge_cols.len()));
        }
    }
    let slack_base = edge_cols.len();
    let var_count = slack_base + nodes;
    let penalty = penalty_m(config);
    spec.objective = vec![0.0; var_count];
    spec.lower = vec![0.0; var_count];
    spec.upper = vec![None; var_count];
    spec.labels = vec![VarLabel::Anonymous; var_count];
    for &(e, col) in &edge_cols {
        spec.objective[col] = -crate::graph::edge_cost(graph.edge(e), t, config);
        spec.labels[col] = VarLabel::Rebalance { edge: e, step: t };
    }
    for node in 0..nodes {
        spec.objective[slack_base + node] = -penalty;
        spec.labels[slack_base + node] = VarLabel::DeviationSlack { node };
    }

    // Availability per stocked node.
    let mut out_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes];
    let mut in_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes];
    for &(e, col) in &edge_cols {
        let edge = graph.edge(e);
        out_cols[graph.node_index(edge.from)].push((col, 1.0));
        in_cols[graph.node_index(edge.to)].push((col, 1.0));
    }
    for node in 0..nodes {
        if idle[node] > 0 && !out_cols[node].is_empty() {
            spec.constraints.push(Constraint {
                coeffs: out_cols[node].clone(),
                relation: Relation::Le,
                rhs: idle[node] as f64,
            });
        }
    }
    // Balance with one-sided slack: inflow - outflow + slack covers the
    // target deficit; surpluses may stay put.
    for node in 0..nodes {
        let mut coeffs = in_cols[node].clone();
        for &(col, _) in &out_cols[node] {
            coeffs.push((col, -1.0));
        }
        coeffs.push((slack_base + node, 1.0));
        let rhs = n_target[node] as f64 - idle[node] as f64;
        spec.constraints.push(Constraint { coeffs, relation: Relation::Ge, rhs });
    }
    // Plug capacity on newly started charge sessions per region.
    for region in 0..graph.region_count() {
        let mut coeffs = Vec::new();
        for &(e, col) in &edge_cols {
            let edge = graph.edge(e);
            if edge.kind == EdgeKind::Charge && edge.from.region == region {
                coeffs.push((col, 1.0));
            }
        }
        if coeffs.is_empty() {
            continue;
        }
        let free = config.chargers(region).saturating_sub(plugs_blocked(region));
        spec.constraints.push(Constraint { coeffs, relation: Relation::Le, rhs: free as f64 });
    }

    let mut integral = vec![true; var_count];
    for node in 0..nodes {
        integral[slack_base + node] = false;
    }
    let solution = solve_lp_integral(&spec, &integral)?;
    if solution.status != SolveStatus::Optimal {
        return Err(TrilevelError::UnexpectedStatus(solution.status));
    }

    let mut flows = Vec::new();
    let mut cost = 0.0;
    for &(e, col) in &edge_cols {
        let v = solution.values[col];
        if v > 0.5 {
            let n = v.round() as u64;
            cost += crate::graph::edge_cost(graph.edge(e), t, config) * n as f64;
            flows.push((e, n));
        }
    }
    flows.sort_by_key(|&(e, _)| e);
    let slack = (0..nodes).map(|n| solution.values[slack_base + n].round().max(0.0) as u64).collect();
    Ok(RebalanceResult { flows, cost, slack })
}
