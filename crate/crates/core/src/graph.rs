//! The space-charge graph: nodes are (spatial region, discrete charge level)
//! pairs, road edges move vehicles between regions while draining charge, and
//! charge edges raise the charge level in place.

use thiserror::Error;

use crate::scenario::ScenarioConfig;

/// Identity of a space-charge node. `charge` is 1-based and bounded by the
/// scenario's charge level count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub region: usize,
    pub charge: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Road,
    Charge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
    /// Steps until a vehicle departing on this edge becomes idle at `to`.
    pub travel_time: usize,
    /// Signed change in charge level (negative for road edges).
    pub energy_delta: i64,
}

impl Edge {
    pub fn is_self_loop(&self) -> bool {
        self.from == self.to
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("travel time between regions {0} and {1} must be at least one step")]
    ZeroTravelTime(usize, usize),
    #[error("energy use between regions {0} and {1} is {2} levels but only {3} charge levels exist")]
    EnergyExceedsCharge(usize, usize, usize, usize),
    #[error("node (region {0}, charge {1}) has no outgoing edge; flows through it are infeasible")]
    DeadEndNode(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceChargeGraph {
    region_count: usize,
    charge_levels: usize,
    charge_rate: usize,
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    adjacency: Vec<bool>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    travel_time: Vec<usize>,
    energy: Vec<usize>,
}

impl SpaceChargeGraph {
    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn charge_levels(&self) -> usize {
        self.charge_levels
    }

    pub fn charge_rate(&self) -> usize {
        self.charge_rate
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    /// Dense node index: region-major, charge levels 1..=C within a region.
    pub fn node_index(&self, node: NodeId) -> usize {
        debug_assert!(node.region < self.region_count);
        debug_assert!(node.charge >= 1 && node.charge <= self.charge_levels);
        node.region * self.charge_levels + (node.charge - 1)
    }

    pub fn node_at(&self, idx: usize) -> NodeId {
        self.nodes[idx]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[from * self.nodes.len() + to]
    }

    /// Boolean adjacency matrix, row-major over dense node indices.
    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }

    /// Edge indices leaving the node, in global (lexicographic) edge order.
    pub fn out_edges(&self, node_idx: usize) -> &[usize] {
        &self.out_edges[node_idx]
    }

    pub fn in_edges(&self, node_idx: usize) -> &[usize] {
        &self.in_edges[node_idx]
    }

    pub fn travel_time_between(&self, from_region: usize, to_region: usize) -> usize {
        self.travel_time[from_region * self.region_count + to_region]
    }

    pub fn energy_between(&self, from_region: usize, to_region: usize) -> usize {
        self.energy[from_region * self.region_count + to_region]
    }

    /// The unique road edge serving trips from `from_region` to `to_region`
    /// out of charge level `charge`, when the destination charge stays >= 1.
    pub fn road_edge_from(&self, from_region: usize, charge: usize, to_region: usize) -> Option<usize> {
        let from_idx = self.node_index(NodeId { region: from_region, charge });
        self.out_edges[from_idx].iter().copied().find(|&e| {
            let edge = &self.edges[e];
            edge.kind == EdgeKind::Road && edge.to.region == to_region
        })
    }

    /// Charge edges rooted in a region, ordered by (from.charge, to.charge).
    pub fn charging_edges_at_region(&self, region: usize) -> Vec<usize> {
        assert!(region < self.region_count, "region out of range");
        let mut found: Vec<usize> = (0..self.edges.len())
            .filter(|&e| self.edges[e].kind == EdgeKind::Charge && self.edges[e].from.region == region)
            .collect();
        found.sort_by_key(|&e| (self.edges[e].from.charge, self.edges[e].to.charge));
        found
    }
}

/// Builds the space-charge graph for a validated scenario. Road edges whose
/// destination charge would drop below level 1 are omitted. Edge order is
/// lexicographic by (from.region, from.charge, to.region, to.charge) so LP
/// column order and results are reproducible.
pub fn build_graph(config: &ScenarioConfig) -> Result<SpaceChargeGraph, GraphError> {
    let regions = config.region_count;
    let levels = config.charge_levels;
    for i in 0..regions {
        for j in 0..regions {
            if config.travel_time(i, j) == 0 {
                return Err(GraphError::ZeroTravelTime(i, j));
            }
            if config.energy(i, j) >= levels {
                return Err(GraphError::EnergyExceedsCharge(i, j, config.energy(i, j), levels));
            }
        }
    }

    let node_count = regions * levels;
    let mut nodes = Vec::with_capacity(node_count);
    for region in 0..regions {
        for charge in 1..=levels {
            nodes.push(NodeId { region, charge });
        }
    }

    let mut edges = Vec::new();
    for &from in &nodes {
        let mut local: Vec<Edge> = Vec::new();
        for to_region in 0..regions {
            let eta = config.energy(from.region, to_region);
            if from.charge > eta {
                let to = NodeId { region: to_region, charge: from.charge - eta };
                local.push(Edge {
                    from,
                    to,
                    kind: EdgeKind::Road,
                    travel_time: config.travel_time(from.region, to_region),
                    energy_delta: -(eta as i64),
                });
            }
        }
        let mut k = 1;
        while from.charge + k * config.charge_rate <= levels {
            let to = NodeId { region: from.region, charge: from.charge + k * config.charge_rate };
            local.push(Edge {
                from,
                to,
                kind: EdgeKind::Charge,
                travel_time: k,
                energy_delta: (k * config.charge_rate) as i64,
            });
            k += 1;
        }
        local.sort_by_key(|e| (e.to.region, e.to.charge));
        edges.extend(local);
    }

    let mut adjacency = vec![false; node_count * node_count];
    let mut out_edges = vec![Vec::new(); node_count];
    let mut in_edges = vec![Vec::new(); node_count];
    for (idx, edge) in edges.iter().enumerate() {
        let from = edge.from.region * levels + (edge.from.charge - 1);
        let to = edge.to.region * levels + (edge.to.charge - 1);
        adjacency[from * node_count + to] = true;
        out_edges[from].push(idx);
        in_edges[to].push(idx);
    }

    for (idx, outs) in out_edges.iter().enumerate() {
        if outs.is_empty() {
            let node = nodes[idx];
            return Err(GraphError::DeadEndNode(node.region, node.charge));
        }
    }

    Ok(SpaceChargeGraph {
        region_count: regions,
        charge_levels: levels,
        charge_rate: config.charge_rate,
        nodes,
        edges,
        adjacency,
        out_edges,
        in_edges,
        travel_time: config.travel_time_matrix().to_vec(),
        energy: config.energy_matrix().to_vec(),
    })
}

/// Money cost of traversing an edge departing at step `t` (1-based): road
/// edges pay the operating cost of the region pair, charge edges pay the
/// per-level electricity price times levels gained.
pub fn edge_cost(edge: &Edge, t: usize, config: &ScenarioConfig) -> f64 {
    match edge.kind {
        EdgeKind::Road => config.op_cost(edge.from.region, edge.to.region, t),
        EdgeKind::Charge => (edge.energy_delta as f64) * config.elec_price(t),
    }
}
