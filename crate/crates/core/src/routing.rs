//! Global routing: prefix origins, shortest-path computation over the
//! topology, and per-node next-hop lists for FIB population.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::name::Name;
use crate::packet::NodeId;
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RoutingError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub data_rate_bps: u64,
    pub delay: SimTime,
}

/// Node/link graph with prefix origins. Links are bidirectional and
/// unique per node pair.
#[derive(Debug, Clone, Default)]
pub struct Topology {
    pub node_count: usize,
    pub links: Vec<LinkSpec>,
    pub origins: BTreeMap<Name, BTreeSet<NodeId>>,
}

impl Topology {
    pub fn new(node_count: usize) -> Self {
        Topology {
            node_count,
            links: Vec::new(),
            origins: BTreeMap::new(),
        }
    }

    /// Records `node` as an origin for `prefix`; idempotent.
    pub fn add_origin(&mut self, prefix: Name, node: NodeId) -> Result<(), RoutingError> {
        if node >= self.node_count {
            return Err(RoutingError::UnknownNode(node));
        }
        self.origins.entry(prefix).or_default().insert(node);
        Ok(())
    }

    pub fn is_origin(&self, prefix: &Name, node: NodeId) -> bool {
        self.origins.get(prefix).is_some_and(|s| s.contains(&node))
    }

    fn neighbors(&self, node: NodeId) -> Vec<(NodeId, u64)> {
        let mut out = Vec::new();
        for link in &self.links {
            if link.a == node {
                out.push((link.b, link.delay.as_ns()));
            } else if link.b == node {
                out.push((link.a, link.delay.as_ns()));
            }
        }
        out.sort();
        out
    }
}

/// One computed FIB next hop: forward toward `neighbor` at total path
/// cost `cost` (link delay in nanoseconds).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NextHop {
    pub neighbor: NodeId,
    pub cost: u64,
}

pub type RouteTable = BTreeMap<NodeId, Vec<(Name, Vec<NextHop>)>>;

/// Dijkstra over the topology with `excluded` removed, from `source`.
/// Returns the distance to every node (u64::MAX when unreachable).
fn dijkstra_without(topo: &Topology, excluded: Option<NodeId>, source: NodeId) -> Vec<u64> {
    let mut dist = vec![u64::MAX; topo.node_count];
    if Some(source) == excluded {
        return dist;
    }
    dist[source] = 0;
    let mut heap = BinaryHeap::new();
    heap.push(std::cmp::Reverse((0u64, source)));
    while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for (v, w) in topo.neighbors(u) {
            if Some(v) == excluded {
                continue;
            }
            let nd = d.saturating_add(w);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(std::cmp::Reverse((nd, v)));
            }
        }
    }
    dist
}

/// Computes, for every node and prefix, the ranked next-hop list.
///
/// The cost of forwarding from node `n` via neighbor `m` toward an origin
/// `o` is `delay(n,m) + dist(m,o)` where the distance is taken in the
/// graph with `n` removed, so each installed next hop corresponds to the
/// cheapest simple path leaving `n` through that neighbor. Every neighbor
/// with a finite cost toward some origin is installed, ranked by
/// ascending cost, ties by neighbor id. Nodes that are themselves origins
/// of a prefix get no network route for it (their app face serves it);
/// unreachable origins yield nothing.
pub fn calculate_routes(topo: &Topology) -> RouteTable {
    let origin_nodes: BTreeSet<NodeId> = topo.origins.values().flatten().copied().collect();
    let mut table = RouteTable::new();
    for node in 0..topo.node_count {
        // distances from each origin node in the graph without `node`
        let mut dist_from: BTreeMap<NodeId, Vec<u64>> = BTreeMap::new();
        for &o in &origin_nodes {
            if o != node {
                dist_from.insert(o, dijkstra_without(topo, Some(node), o));
            }
        }
        let neighbors = topo.neighbors(node);
        let mut entries = Vec::new();
        for (prefix, origins) in &topo.origins {
            if origins.contains(&node) {
                continue;
            }
            let mut hops = Vec::new();
            for &(m, w) in &neighbors {
                let best = origins
                    .iter()
                    .filter_map(|o| dist_from.get(o))
                    .map(|dist| dist[m])
                    .min()
                    .unwrap_or(u64::MAX);
                if best != u64::MAX {
                    hops.push(NextHop {
                        neighbor: m,
                        cost: w + best,
                    });
                }
            }
            hops.sort_by(|a, b| a.cost.cmp(&b.cost).then(a.neighbor.cmp(&b.neighbor)));
            if !hops.is_empty() {
                entries.push((prefix.clone(), hops));
            }
        }
        table.insert(node, entries);
    }
    table
}
