//! Node feature construction for the graph-RL agent: projected idle counts
//! over a lookahead window, expected region revenue per upcoming step
//! (replicated across a region's charge nodes), and the fractional charge
//! level of each node.

use crate::graph::SpaceChargeGraph;
use crate::scenario::ScenarioConfig;
use crate::sim::FleetState;

use super::nn::Mat;

/// Feature width for a lookahead of `k` steps.
pub fn feature_dim(k: usize) -> usize {
    (k + 1) + k + 1
}

/// Builds the |V| x D feature matrix. Idle projections are scaled by 1/N for
/// conditioning; revenue features are raw expected dollars; steps beyond the
/// horizon contribute zero revenue.
pub fn featurize(
    state: &FleetState,
    config: &ScenarioConfig,
    graph: &SpaceChargeGraph,
    k: usize,
) -> Mat<f64> {
    assert!(k >= 1, "lookahead must be at least one step");
    let nodes = graph.node_count();
    let d = feature_dim(k);
    let fleet = config.fleet_size.max(1) as f64;
    let projected = state.project_availability(graph, k);

    // Expected revenue per region for steps t+1..t+k.
    let a = config.region_count;
    let mut region_revenue = vec![vec![0.0f64; k]; a];
    for offset in 1..=k {
        let t = state.clock + offset;
        if t > config.horizon {
            continue;
        }
        for i in 0..a {
            let mut total = 0.0;
            for j in 0..a {
                total += config.demand_rate(i, j, t) * config.revenue(i, j, t);
            }
            region_revenue[i][offset - 1] = total;
        }
    }

    let mut x = Mat::zeros(nodes, d);
    for node in 0..nodes {
        let id = graph.node_at(node);
        for col in 0..=k {
            *x.at_mut(node, col) = projected[node][col] as f64 / fleet;
        }
        for offset in 1..=k {
            *x.at_mut(node, k + offset) = region_revenue[id.region][offset - 1];
        }
        *x.at_mut(node, d - 1) = id.charge as f64 / config.charge_levels as f64;
    }
    x
}
