//! Random weighted digraphs for the navigation task, plus the shortest-path
//! oracle used to score trials.
//!
//! Every node carries exactly one self-loop. Between-node weights come from
//! `{1, 2, 3, 4}`; self-loops cost one more than the heaviest between-node
//! edge, except at the destination where staying is free.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type NodeId = usize;

/// Between-node weight alphabet.
pub const WEIGHT_LEVELS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

/// Weight of edges added while repairing strong connectivity.
const REPAIR_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub weight: f64,
}

impl Edge {
    pub fn is_self_loop(&self) -> bool {
        self.source == self.target
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct WeightedDigraph {
    num_nodes: usize,
    /// Sorted by `(source, target)`; the position of an edge is its id.
    edges: Vec<Edge>,
    start_node: NodeId,
    destination_node: NodeId,
}

/// On-disk layout of a graph. Converted through [`WeightedDigraph::new`] so a
/// deserialized graph always satisfies the invariants.
#[derive(Serialize, Deserialize)]
struct RawGraph {
    num_nodes: usize,
    edges: Vec<Edge>,
    start_node: NodeId,
    destination_node: NodeId,
}

impl TryFrom<RawGraph> for WeightedDigraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        WeightedDigraph::new(raw.num_nodes, raw.edges, raw.start_node, raw.destination_node)
    }
}

impl From<WeightedDigraph> for RawGraph {
    fn from(g: WeightedDigraph) -> Self {
        RawGraph {
            num_nodes: g.num_nodes,
            edges: g.edges,
            start_node: g.start_node,
            destination_node: g.destination_node,
        }
    }
}

impl WeightedDigraph {
    /// Build a graph from a full edge list (self-loops included) and check
    /// every invariant. Edges are re-sorted by `(source, target)`.
    pub fn new(num_nodes: usize, mut edges: Vec<Edge>, start_node: NodeId, destination_node: NodeId) -> Result<Self> {
        edges.sort_by_key(|e| (e.source, e.target));
        let graph = WeightedDigraph {
            num_nodes,
            edges,
            start_node,
            destination_node,
        };
        graph.validate()?;
        Ok(graph)
    }

    /// Build a graph from between-node edges only, adding the self-loops
    /// with the standard weighting.
    pub fn from_between_edges(
        num_nodes: usize,
        between: &[(NodeId, NodeId, f64)],
        start_node: NodeId,
        destination_node: NodeId,
    ) -> Result<Self> {
        let mut edges: Vec<Edge> = between
            .iter()
            .map(|&(source, target, weight)| Edge { source, target, weight })
            .collect();
        add_self_loops(&mut edges, num_nodes, destination_node);
        Self::new(num_nodes, edges, start_node, destination_node)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn start_node(&self) -> NodeId {
        self.start_node
    }

    pub fn destination_node(&self) -> NodeId {
        self.destination_node
    }

    pub fn edge_id(&self, source: NodeId, target: NodeId) -> Option<usize> {
        self.edges
            .binary_search_by_key(&(source, target), |e| (e.source, e.target))
            .ok()
    }

    pub fn weight(&self, source: NodeId, target: NodeId) -> Option<f64> {
        self.edge_id(source, target).map(|id| self.edges[id].weight)
    }

    /// Ids of edges leaving `node`, in ascending order.
    pub fn out_edge_ids(&self, node: NodeId) -> impl Iterator<Item = usize> + '_ {
        let lo = self.edges.partition_point(|e| e.source < node);
        let hi = self.edges.partition_point(|e| e.source <= node);
        lo..hi
    }

    pub fn between_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| !e.is_self_loop())
    }

    pub fn max_between_weight(&self) -> f64 {
        self.between_edges().map(|e| e.weight).fold(0.0, f64::max)
    }

    /// Successors over between-node edges.
    fn successors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_edge_ids(node)
            .map(|id| self.edges[id].target)
            .filter(move |&t| t != node)
    }

    /// Nodes reachable from `from` over between-node edges (including itself).
    pub fn reachable_from(&self, from: NodeId) -> Vec<bool> {
        reachable(self.num_nodes, &self.between_adjacency(), from)
    }

    pub fn is_strongly_connected(&self) -> bool {
        (0..self.num_nodes).all(|u| self.reachable_from(u).into_iter().all(|r| r))
    }

    fn between_adjacency(&self) -> Vec<Vec<NodeId>> {
        (0..self.num_nodes).map(|u| self.successors(u).collect()).collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        for node in [self.start_node, self.destination_node] {
            if node >= n {
                return Err(Error::InvalidNode { id: node, len: n });
            }
        }
        if self.start_node == self.destination_node {
            return Err(Error::Config("start and destination nodes must differ".into()));
        }
        for e in &self.edges {
            if e.source >= n || e.target >= n {
                return Err(Error::InvalidNode {
                    id: e.source.max(e.target),
                    len: n,
                });
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::Config(format!(
                    "edge ({}, {}) has invalid weight {}",
                    e.source, e.target, e.weight
                )));
            }
        }
        if self
            .edges
            .windows(2)
            .any(|w| (w[0].source, w[0].target) == (w[1].source, w[1].target))
        {
            return Err(Error::Config("duplicate edge".into()));
        }
        let max_between = self.max_between_weight();
        for u in 0..n {
            let Some(w) = self.weight(u, u) else {
                return Err(Error::Config(format!("node {u} has no self-loop")));
            };
            let ok = if u == self.destination_node {
                w == 0.0
            } else {
                w > max_between
            };
            if !ok {
                return Err(Error::Config(format!(
                    "self-loop at node {u} has weight {w} (max between-node weight {max_between})"
                )));
            }
        }
        if !self.is_strongly_connected() {
            return Err(Error::Config("graph is not strongly connected".into()));
        }
        Ok(())
    }
}

fn reachable(n: usize, adj: &[Vec<NodeId>], from: NodeId) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Strongly connected components via mutual reachability, each listed in
/// ascending node order, components ordered by their smallest node.
fn strongly_connected_components(n: usize, adj: &[Vec<NodeId>]) -> Vec<Vec<NodeId>> {
    let reach: Vec<Vec<bool>> = (0..n).map(|u| reachable(n, adj, u)).collect();
    let mut component = vec![usize::MAX; n];
    let mut components = Vec::new();
    for u in 0..n {
        if component[u] != usize::MAX {
            continue;
        }
        let members: Vec<NodeId> = (u..n).filter(|&v| reach[u][v] && reach[v][u]).collect();
        for &v in &members {
            component[v] = components.len();
        }
        components.push(members);
    }
    components
}

fn add_self_loops(edges: &mut Vec<Edge>, num_nodes: usize, destination: NodeId) {
    let max_between = edges
        .iter()
        .filter(|e| !e.is_self_loop())
        .map(|e| e.weight)
        .fold(0.0, f64::max);
    for u in 0..num_nodes {
        edges.push(Edge {
            source: u,
            target: u,
            weight: if u == destination { 0.0 } else { max_between + 1.0 },
        });
    }
}

/// Generate a random strongly connected weighted digraph with a start and a
/// destination node. Pure in `(num_nodes, seed)`.
///
/// Each ordered pair of distinct nodes becomes an edge with probability
/// `2 / num_nodes`. If the result is not strongly connected, one weight-1
/// edge is added from each component to the next, closing a cycle over the
/// condensation (components ordered by smallest node, each represented by
/// its smallest node).
pub fn generate_graph(num_nodes: usize, seed: u64) -> Result<WeightedDigraph> {
    if num_nodes < 2 {
        return Err(Error::TooFewNodes(num_nodes));
    }
    let mut rng = seed::rng(seed);
    let p = edge_probability(num_nodes);

    let mut edges = Vec::new();
    for u in 0..num_nodes {
        for v in 0..num_nodes {
            if u != v && rng.random_bool(p) {
                let weight = WEIGHT_LEVELS[rng.random_range(0..WEIGHT_LEVELS.len())];
                edges.push(Edge {
                    source: u,
                    target: v,
                    weight,
                });
            }
        }
    }

    let mut adj = vec![Vec::new(); num_nodes];
    for e in &edges {
        adj[e.source].push(e.target);
    }
    let components = strongly_connected_components(num_nodes, &adj);
    if components.len() > 1 {
        for (i, comp) in components.iter().enumerate() {
            let next = &components[(i + 1) % components.len()];
            let (u, v) = (comp[0], next[0]);
            if !edges.iter().any(|e| e.source == u && e.target == v) {
                edges.push(Edge {
                    source: u,
                    target: v,
                    weight: REPAIR_WEIGHT,
                });
            }
        }
    }

    let picked = rand::seq::index::sample(&mut rng, num_nodes, 2);
    let (start, destination) = (picked.index(0), picked.index(1));

    add_self_loops(&mut edges, num_nodes, destination);
    WeightedDigraph::new(num_nodes, edges, start, destination)
}

/// Inclusion probability for each candidate between-node edge, capped at 1.
pub fn edge_probability(num_nodes: usize) -> f64 {
    (2.0 / num_nodes as f64).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortestPath {
    pub nodes: Vec<NodeId>,
    pub total_weight: f64,
}

/// Minimum-weight path from start to destination over between-node edges.
/// Among equal-weight paths the lexicographically smallest node sequence wins.
pub fn shortest_path(graph: &WeightedDigraph) -> ShortestPath {
    shortest_path_between(graph, graph.start_node, graph.destination_node)
}

pub fn shortest_path_between(graph: &WeightedDigraph, from: NodeId, to: NodeId) -> ShortestPath {
    let n = graph.num_nodes();
    // Label-setting Dijkstra keyed on (distance, path). Positive between-node
    // weights make every optimal path simple, so prefixes of the winning path
    // are themselves the winning paths to their endpoints.
    let mut best: Vec<Option<(f64, Vec<NodeId>)>> = vec![None; n];
    let mut done = vec![false; n];
    best[from] = Some((0.0, vec![from]));
    loop {
        let next = (0..n)
            .filter(|&u| !done[u])
            .filter_map(|u| best[u].as_ref().map(|label| (u, label)))
            .min_by(|a, b| cmp_label(a.1, b.1))
            .map(|(u, _)| u);
        let Some(u) = next else { break };
        done[u] = true;
        if u == to {
            break;
        }
        let (dist, path) = best[u].clone().expect("settled node has a label");
        for v in graph.successors(u) {
            if done[v] {
                continue;
            }
            let w = graph.weight(u, v).expect("successor edge exists");
            let mut cand_path = path.clone();
            cand_path.push(v);
            let cand = (dist + w, cand_path);
            let better = match &best[v] {
                None => true,
                Some(cur) => cmp_label(&cand, cur).is_lt(),
            };
            if better {
                best[v] = Some(cand);
            }
        }
    }
    let (total_weight, nodes) = best[to].clone().expect("graph is strongly connected");
    ShortestPath { nodes, total_weight }
}

fn cmp_label(a: &(f64, Vec<NodeId>), b: &(f64, Vec<NodeId>)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}
