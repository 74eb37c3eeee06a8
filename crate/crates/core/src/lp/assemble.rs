//! Assembly of the global space-charge-time profit LP: passenger and
//! rebalancing flow variables for every edge and step of a planning window,
//! demand caps, per-node flow conservation with travel-time lags, and
//! per-region charger capacity with sliding occupancy windows.

use crate::graph::{EdgeKind, SpaceChargeGraph};
use crate::scenario::ScenarioConfig;

use super::{Constraint, LinearProgramSpec, LpError, Relation, VarLabel};

/// Boundary conditions feeding a receding-horizon window: idle vehicles at
/// the first step, arrivals scheduled by pre-window flows, and charger plugs
/// still blocked by running sessions.
#[derive(Debug, Clone, Default)]
pub struct WindowBoundary {
    /// Idle vehicles per node at the window start (arrivals already landed).
    pub initial_idle: Vec<u64>,
    /// (node, absolute step, count) for in-transit vehicles landing inside
    /// the window after its first step.
    pub arrivals: Vec<(usize, usize, u64)>,
    /// `plug_blocked[region][offset]` plugs held by pre-window charge
    /// sessions at step `t0 + offset`.
    pub plug_blocked: Vec<Vec<u64>>,
}

impl WindowBoundary {
    /// A fresh-episode boundary: everything idle, nothing en route.
    pub fn fresh(initial_idle: Vec<u64>, regions: usize, horizon: usize) -> Self {
        WindowBoundary {
            initial_idle,
            arrivals: Vec::new(),
            plug_blocked: vec![vec![0; horizon]; regions],
        }
    }
}

/// The assembled global LP plus the index maps needed to read flows back out.
#[derive(Debug, Clone)]
pub struct GlobalLp {
    pub spec: LinearProgramSpec<f64>,
    pub t0: usize,
    pub horizon: usize,
    /// All variables are vehicle counts.
    pub integral_mask: Vec<bool>,
}

impl GlobalLp {
    /// Splits a solution vector into per-step passenger and rebalancing
    /// flows: `(x, y)` lists of (edge index, count) for the absolute step.
    pub fn flows_at(&self, values: &[f64], step: usize) -> (Vec<(usize, u64)>, Vec<(usize, u64)>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (j, &v) in values.iter().enumerate() {
            if v < 0.5 {
                continue;
            }
            let count = v.round() as u64;
            match self.spec.labels[j] {
                VarLabel::Passenger { edge, step: s } if s == step => x.push((edge, count)),
                VarLabel::Rebalance { edge, step: s } if s == step => y.push((edge, count)),
                _ => {}
            }
        }
        x.sort_by_key(|&(e, _)| e);
        y.sort_by_key(|&(e, _)| e);
        (x, y)
    }
}

/// Builds the profit-maximization LP over `[t0, t0 + horizon)`. `demand[k]`
/// holds the trip counts for step `t0 + k` as a row-major region matrix.
/// Passenger variables only exist where demand is positive; idling on a
/// self-loop is free for rebalancing flows so that parked vehicles cost
/// nothing.
pub fn assemble_global_lp(
    config: &ScenarioConfig,
    graph: &SpaceChargeGraph,
    demand: &[Vec<u64>],
    t0: usize,
    horizon: usize,
    boundary: &WindowBoundary,
) -> Result<GlobalLp, LpError> {
    if horizon < 1 {
        return Err(LpError::EmptyHorizon);
    }
    assert!(demand.len() >= horizon, "demand window too short");
    assert_eq!(boundary.initial_idle.len(), graph.node_count());

    let a = config.region_count;
    let nodes = graph.node_count();
    let edges = graph.edges();

    // Column layout: step-major; within a step x variables (road edges with
    // positive demand) then y variables (every edge).
    let mut objective: Vec<f64> = Vec::new();
    let mut labels: Vec<VarLabel> = Vec::new();
    // x_cols[k] lists (edge, col); y_cols[k][edge] = col.
    let mut x_cols: Vec<Vec<(usize, usize)>> = Vec::with_capacity(horizon);
    let mut y_cols: Vec<Vec<usize>> = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let t = t0 + k;
        let step_demand = &demand[k];
        let mut xs = Vec::new();
        for (e, edge) in edges.iter().enumerate() {
            if edge.kind != EdgeKind::Road {
                continue;
            }
            let pair = edge.from.region * a + edge.to.region;
            if step_demand[pair] == 0 {
                continue;
            }
            let cost = crate::graph::edge_cost(edge, t, config);
            let fare = config.revenue(edge.from.region, edge.to.region, t);
            objective.push(fare - cost);
            labels.push(VarLabel::Passenger { edge: e, step: t });
            xs.push((e, objective.len() - 1));
        }
        x_cols.push(xs);
        let mut ys = Vec::with_capacity(edges.len());
        for (e, edge) in edges.iter().enumerate() {
            let cost = if edge.is_self_loop() { 0.0 } else { crate::graph::edge_cost(edge, t, config) };
            objective.push(-cost);
            labels.push(VarLabel::Rebalance { edge: e, step: t });
            ys.push(objective.len() - 1);
        }
        y_cols.push(ys);
    }
    let var_count = objective.len();

    // Row builders.
    let conservation_rows = nodes * horizon;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); conservation_rows];
    let conservation_row = |node: usize, k: usize| k * nodes + node;
    let mut conservation_rhs = vec![0.0; conservation_rows];
    for (node, &idle) in boundary.initial_idle.iter().enumerate() {
        conservation_rhs[conservation_row(node, 0)] += idle as f64;
    }
    for &(node, step, count) in &boundary.arrivals {
        if step > t0 && step < t0 + horizon {
            conservation_rhs[conservation_row(node, step - t0)] += count as f64;
        }
    }

    let push_flow_coeffs = |col: usize, e: usize, k: usize, rows: &mut Vec<Vec<(usize, f64)>>| {
        let edge = &edges[e];
        let from = graph.node_index(edge.from);
        let to = graph.node_index(edge.to);
        rows[conservation_row(from, k)].push((col, 1.0));
        let arrive = k + edge.travel_time;
        if arrive < horizon {
            rows[conservation_row(to, arrive)].push((col, -1.0));
        }
    };
    for k in 0..horizon {
        for &(e, col) in &x_cols[k] {
            push_flow_coeffs(col, e, k, &mut rows);
        }
        for (e, &col) in y_cols[k].iter().enumerate() {
            push_flow_coeffs(col, e, k, &mut rows);
        }
    }

    let mut spec = LinearProgramSpec::with_vars(var_count);
    spec.objective = objective;
    spec.labels = labels;
    for (r, coeffs) in rows.into_iter().enumerate() {
        spec.constraints.push(Constraint { coeffs, relation: Relation::Eq, rhs: conservation_rhs[r] });
    }

    // Warm-start basis: the all-idle plan. Each conservation row takes its
    // node's self-loop flow as the basic variable, which forms a triangular
    // feasible basis and skips phase one entirely.
    let mut self_loop_edge = vec![None; nodes];
    for (e, edge) in edges.iter().enumerate() {
        if edge.is_self_loop() {
            self_loop_edge[graph.node_index(edge.from)] = Some(e);
        }
    }
    let mut hints: Vec<Option<usize>> = vec![None; conservation_rows];
    for k in 0..horizon {
        for node in 0..nodes {
            if let Some(e) = self_loop_edge[node] {
                hints[conservation_row(node, k)] = Some(y_cols[k][e]);
            }
        }
    }
    spec.basis_hint = Some(hints);

    // Demand caps per (region pair, step) with any passenger columns.
    for k in 0..horizon {
        let mut per_pair: Vec<Vec<(usize, f64)>> = vec![Vec::new(); a * a];
        for &(e, col) in &x_cols[k] {
            let edge = &edges[e];
            per_pair[edge.from.region * a + edge.to.region].push((col, 1.0));
        }
        for (pair, coeffs) in per_pair.into_iter().enumerate() {
            if !coeffs.is_empty() {
                spec.constraints.push(Constraint {
                    coeffs,
                    relation: Relation::Le,
                    rhs: demand[k][pair] as f64,
                });
            }
        }
    }

    // Charger capacity: a session departing at step s on a charge edge with
    // travel time tau holds a plug for decision steps s..=s+tau.
    for k in 0..horizon {
        for region in 0..a {
            let mut coeffs = Vec::new();
            for e in graph.charging_edges_at_region(region) {
                let tau = edges[e].travel_time;
                let first = k.saturating_sub(tau);
                for s in first..=k {
                    coeffs.push((y_cols[s][e], 1.0));
                }
            }
            if coeffs.is_empty() {
                continue;
            }
            let blocked = boundary
                .plug_blocked
                .get(region)
                .and_then(|b| b.get(k))
                .copied()
                .unwrap_or(0);
            let rhs = config.chargers(region).saturating_sub(blocked) as f64;
            spec.constraints.push(Constraint { coeffs, relation: Relation::Le, rhs });
        }
    }

    let integral_mask = vec![true; var_count];
    Ok(GlobalLp { spec, t0, horizon, integral_mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::lp::{solve_lp, SolveStatus};
    use crate::scenario::test_fixtures::{manual_config, ManualScenario};

    fn two_region_config() -> ScenarioConfig {
        manual_config(ManualScenario {
            regions: 2,
            charge_levels: 3,
            charge_rate: 1,
            horizon: 4,
            travel_time: vec![vec![1, 1], vec![1, 1]],
            energy: vec![vec![0, 1], vec![1, 0]],
            distance: vec![vec![0.0, 2.0], vec![2.0, 0.0]],
            fleet_size: 2,
            chargers: vec![1, 1],
            demand_scale: 0.0,
        })
    }

    #[test]
    fn variable_and_constraint_counts_match_closed_form() {
        let config = two_region_config();
        let graph = build_graph(&config).unwrap();
        let h = 4;
        let demand: Vec<Vec<u64>> = vec![vec![0, 1, 0, 0]; h];
        let boundary = WindowBoundary::fresh(vec![0, 0, 1, 0, 0, 1], 2, h);
        let lp = assemble_global_lp(&config, &graph, &demand, 1, h, &boundary).unwrap();
        // One passenger column per step for the single positive-demand pair
        // (0 -> 1) times the road edges out of region 0 with enough charge:
        // charge levels 2 and 3 reach region 1, so 2 x columns per step.
        let x_per_step = 2;
        let y_per_step = graph.edges().len();
        assert_eq!(lp.spec.var_count(), h * (x_per_step + y_per_step));
        // Conservation rows per node and step, one demand row per step, one
        // plug row per region and step.
        let expected_rows = graph.node_count() * h + h + 2 * h;
        assert_eq!(lp.spec.constraints.len(), expected_rows);
    }

    #[test]
    fn zero_demand_idles_at_zero_profit() {
        let config = two_region_config();
        let graph = build_graph(&config).unwrap();
        let demand: Vec<Vec<u64>> = vec![vec![0; 4]; 4];
        let boundary = WindowBoundary::fresh(vec![0, 0, 1, 0, 0, 1], 2, 4);
        let lp = assemble_global_lp(&config, &graph, &demand, 1, 4, &boundary).unwrap();
        let sol = solve_lp(&lp.spec).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective_value.abs() < 1e-9, "profit {}", sol.objective_value);
    }

    #[test]
    fn horizon_zero_rejected() {
        let config = two_region_config();
        let graph = build_graph(&config).unwrap();
        let boundary = WindowBoundary::fresh(vec![0; 6], 2, 0);
        assert!(matches!(
            assemble_global_lp(&config, &graph, &[], 1, 0, &boundary),
            Err(LpError::EmptyHorizon)
        ));
    }

    #[test]
    fn profitable_trip_gets_served() {
        let config = two_region_config();
        let graph = build_graph(&config).unwrap();
        // One trip 0 -> 1 at step 2; a vehicle idles at (0, charge 3).
        let mut demand: Vec<Vec<u64>> = vec![vec![0; 4]; 3];
        demand[1][1] = 1;
        let mut idle = vec![0u64; 6];
        idle[graph.node_index(crate::graph::NodeId { region: 0, charge: 3 })] = 1;
        let boundary = WindowBoundary::fresh(idle, 2, 3);
        let lp = assemble_global_lp(&config, &graph, &demand, 1, 3, &boundary).unwrap();
        let sol = solve_lp(&lp.spec).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let fare = config.revenue(0, 1, 2);
        let cost = config.op_cost(0, 1, 2);
        assert!((sol.objective_value - (fare - cost)).abs() < 1e-9);
        let (x, _y) = lp.flows_at(&sol.values, 2);
        assert_eq!(x.len(), 1);
        let edge = graph.edge(x[0].0);
        assert_eq!((edge.from.region, edge.to.region), (0, 1));
    }
}
