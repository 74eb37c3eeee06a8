//! Min-cost flow by successive shortest paths with node potentials. Integer
//! capacities and supplies give integral optimal flows, which is what makes
//! the matching and rebalancing subproblems exact on whole vehicles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::scalar::Scalar;

use super::{LpError, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowArc<S> {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
    pub cost: S,
}

/// A balanced transshipment problem: positive supply nodes emit flow,
/// negative ones absorb it, and supplies must sum to zero.
#[derive(Debug, Clone)]
pub struct FlowNetwork<S> {
    pub node_count: usize,
    pub arcs: Vec<FlowArc<S>>,
    pub supply: Vec<i64>,
}

impl<S: Scalar> FlowNetwork<S> {
    pub fn new(node_count: usize) -> Self {
        FlowNetwork { node_count, arcs: Vec::new(), supply: vec![0; node_count] }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, capacity: i64, cost: S) -> usize {
        debug_assert!(from < self.node_count && to < self.node_count);
        self.arcs.push(FlowArc { from, to, capacity, cost });
        self.arcs.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct McfSolution<S> {
    /// Flow per arc, aligned with the network's arc list.
    pub flows: Vec<i64>,
    pub total_cost: S,
    pub status: SolveStatus,
}

struct HeapEntry<S> {
    dist: S,
    node: usize,
}

impl<S: Scalar> PartialEq for HeapEntry<S> {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl<S: Scalar> Eq for HeapEntry<S> {}
impl<S: Scalar> Ord for HeapEntry<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reverse on distance for a min-heap; node index breaks ties.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then(other.node.cmp(&self.node))
    }
}
impl<S: Scalar> PartialOrd for HeapEntry<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn solve_min_cost_flow<S: Scalar>(network: &FlowNetwork<S>) -> Result<McfSolution<S>, LpError> {
    let n = network.node_count;
    if network.supply.len() != n {
        return Err(LpError::BadNetwork("supply vector length mismatch".into()));
    }
    if network.supply.iter().sum::<i64>() != 0 {
        return Err(LpError::BadNetwork("supplies must sum to zero".into()));
    }
    for arc in &network.arcs {
        if arc.capacity < 0 {
            return Err(LpError::BadNetwork("negative capacity".into()));
        }
        if !arc.cost.is_finite() {
            return Err(LpError::BadNetwork("non-finite cost".into()));
        }
    }

    // Residual representation: arc k forward at 2k, backward at 2k+1.
    let arc_count = network.arcs.len();
    let mut head = vec![0usize; 2 * arc_count];
    let mut cap = vec![0i64; 2 * arc_count];
    let mut cost = vec![S::zero(); 2 * arc_count];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, arc) in network.arcs.iter().enumerate() {
        head[2 * k] = arc.to;
        cap[2 * k] = arc.capacity;
        cost[2 * k] = arc.cost;
        head[2 * k + 1] = arc.from;
        cap[2 * k + 1] = 0;
        cost[2 * k + 1] = -arc.cost;
        out[arc.from].push(2 * k);
        out[arc.to].push(2 * k + 1);
    }

    // Initial potentials by Bellman-Ford so that negative arc costs are
    // handled; all-zero start doubles as a virtual super source.
    let mut pi = vec![S::zero(); n];
    for round in 0..n {
        let mut changed = false;
        for (k, arc) in network.arcs.iter().enumerate() {
            if cap[2 * k] > 0 {
                let cand = pi[arc.from] + arc.cost;
                if cand < pi[arc.to] - S::cast_f64(1e-12) {
                    pi[arc.to] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        if round == n - 1 {
            return Err(LpError::BadNetwork("negative cost cycle".into()));
        }
    }

    let mut excess = network.supply.clone();
    let inf = S::infinity();
    loop {
        let Some(source) = (0..n).find(|&v| excess[v] > 0) else {
            break;
        };
        // Dijkstra over reduced costs from the source.
        let mut dist = vec![inf; n];
        let mut parent = vec![usize::MAX; n];
        let mut done = vec![false; n];
        dist[source] = S::zero();
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { dist: S::zero(), node: source });
        while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            let _ = d;
            for &e in &out[u] {
                if cap[e] <= 0 {
                    continue;
                }
                let v = head[e];
                let reduced = cost[e] + pi[u] - pi[v];
                let nd = dist[u] + reduced.max(S::zero());
                if nd < dist[v] - S::cast_f64(1e-12) {
                    dist[v] = nd;
                    parent[v] = e;
                    heap.push(HeapEntry { dist: nd, node: v });
                }
            }
        }
        let sink = (0..n)
            .filter(|&v| excess[v] < 0 && dist[v] < inf)
            .min_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
        let Some(sink) = sink else {
            return Ok(McfSolution {
                flows: vec![0; arc_count],
                total_cost: S::zero(),
                status: SolveStatus::Infeasible,
            });
        };
        // Update potentials and find the bottleneck.
        let dt = dist[sink];
        for v in 0..n {
            pi[v] += if dist[v] < inf { dist[v] } else { dt };
        }
        let mut bottleneck = excess[source].min(-excess[sink]);
        let mut v = sink;
        while v != source {
            let e = parent[v];
            bottleneck = bottleneck.min(cap[e]);
            v = head[e ^ 1];
        }
        debug_assert!(bottleneck > 0);
        let mut v = sink;
        while v != source {
            let e = parent[v];
            cap[e] -= bottleneck;
            cap[e ^ 1] += bottleneck;
            v = head[e ^ 1];
        }
        excess[source] -= bottleneck;
        excess[sink] += bottleneck;
    }

    let mut flows = vec![0i64; arc_count];
    let mut total_cost = S::zero();
    for k in 0..arc_count {
        let f = network.arcs[k].capacity - cap[2 * k];
        flows[k] = f;
        total_cost += network.arcs[k].cost * S::cast_f64(f as f64);
    }
    Ok(McfSolution { flows, total_cost, status: SolveStatus::Optimal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, LinearProgramSpec, Relation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_arc_routes_supply() {
        let mut net: FlowNetwork<f64> = FlowNetwork::new(2);
        net.supply = vec![2, -2];
        net.add_arc(0, 1, 3, 1.0);
        let sol = solve_min_cost_flow(&net).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.flows, vec![2]);
        assert!((sol.total_cost - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_assignment_picks_diagonal() {
        // Sources 0,1; sinks 2,3; costs [[1,2],[2,1]].
        let mut net: FlowNetwork<f64> = FlowNetwork::new(4);
        net.supply = vec![1, 1, -1, -1];
        net.add_arc(0, 2, 1, 1.0);
        net.add_arc(0, 3, 1, 2.0);
        net.add_arc(1, 2, 1, 2.0);
        net.add_arc(1, 3, 1, 1.0);
        let sol = solve_min_cost_flow(&net).unwrap();
        assert_eq!(sol.flows, vec![1, 0, 0, 1]);
        assert!((sol.total_cost - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_when_supply_cannot_route() {
        let mut net: FlowNetwork<f64> = FlowNetwork::new(3);
        net.supply = vec![2, 0, -2];
        net.add_arc(0, 1, 1, 1.0);
        net.add_arc(1, 2, 5, 1.0);
        let sol = solve_min_cost_flow(&net).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn handles_negative_costs() {
        let mut net: FlowNetwork<f64> = FlowNetwork::new(3);
        net.supply = vec![1, 0, -1];
        net.add_arc(0, 1, 1, -5.0);
        net.add_arc(1, 2, 1, 2.0);
        net.add_arc(0, 2, 1, 0.0);
        let sol = solve_min_cost_flow(&net).unwrap();
        assert_eq!(sol.flows, vec![1, 1, 0]);
        assert!((sol.total_cost + 3.0).abs() < 1e-12);
    }

    /// Cross-solver oracle: the same network as an LP.
    fn lp_of_network(net: &FlowNetwork<f64>) -> LinearProgramSpec<f64> {
        let mut spec = LinearProgramSpec::with_vars(net.arcs.len());
        for (k, arc) in net.arcs.iter().enumerate() {
            spec.objective[k] = -arc.cost; // maximize -cost = minimize cost
            spec.upper[k] = Some(arc.capacity as f64);
        }
        for v in 0..net.node_count {
            let mut coeffs = Vec::new();
            for (k, arc) in net.arcs.iter().enumerate() {
                if arc.from == v {
                    coeffs.push((k, 1.0));
                }
                if arc.to == v {
                    coeffs.push((k, -1.0));
                }
            }
            spec.push_constraint(coeffs, Relation::Eq, net.supply[v] as f64);
        }
        spec
    }

    #[test]
    fn random_networks_match_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let mut solved = 0;
        for _ in 0..100 {
            let nodes = 6;
            let mut net: FlowNetwork<f64> = FlowNetwork::new(nodes);
            for _ in 0..20 {
                // Forward arcs only: negative costs without negative cycles,
                // matching the layered shape of the matching networks.
                let a = rng.random_range(0..nodes);
                let b = rng.random_range(0..nodes);
                if a == b {
                    continue;
                }
                let (from, to) = (a.min(b), a.max(b));
                net.add_arc(from, to, rng.random_range(0..5), rng.random_range(-3.0..5.0_f64).round());
            }
            let units = rng.random_range(1..4);
            net.supply[0] = units;
            net.supply[nodes - 1] = -units;
            let flow = solve_min_cost_flow(&net).unwrap();
            let lp = solve_lp(&lp_of_network(&net)).unwrap();
            assert_eq!(flow.status, lp.status, "status mismatch");
            if flow.status == SolveStatus::Optimal {
                assert!(
                    (flow.total_cost - (-lp.objective_value)).abs() < 1e-6,
                    "cost {} vs lp {}",
                    flow.total_cost,
                    -lp.objective_value
                );
                solved += 1;
            }
        }
        assert!(solved >= 30, "want a healthy share of feasible instances, got {solved}");
    }
}
