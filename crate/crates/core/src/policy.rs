//! Policy enumeration: every chained walk of `|V|` edge traversals.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, WeightedDigraph};
use crate::model::ActionId;

/// A fixed-length sequence of actions (edge ids) where each edge starts
/// where the previous one ended.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Policy {
    actions: Vec<ActionId>,
}

impl Policy {
    pub fn new(actions: Vec<ActionId>) -> Self {
        Policy { actions }
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn first_action(&self) -> ActionId {
        self.actions[0]
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

impl AsRef<[ActionId]> for Policy {
    fn as_ref(&self) -> &[ActionId] {
        &self.actions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyScope {
    Global,
    Local(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySet {
    policies: Vec<Policy>,
    scope: PolicyScope,
    /// Position of each policy in the global enumeration.
    global_index: Vec<usize>,
    /// `(source, target)` of every action id.
    edges: Arc<[(NodeId, NodeId)]>,
    num_nodes: usize,
}

impl PolicySet {
    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn get(&self, i: usize) -> &Policy {
        &self.policies[i]
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn scope(&self) -> PolicyScope {
        self.scope
    }

    pub fn global_index(&self, i: usize) -> usize {
        self.global_index[i]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn source(&self, action: ActionId) -> NodeId {
        self.edges[action].0
    }

    pub fn target(&self, action: ActionId) -> NodeId {
        self.edges[action].1
    }

    /// Node where policy `i` starts.
    pub fn start_node(&self, i: usize) -> NodeId {
        self.source(self.policies[i].first_action())
    }

    /// Node where policy `i` ends.
    pub fn terminal_node(&self, i: usize) -> NodeId {
        self.target(*self.policies[i].actions.last().expect("non-empty policy"))
    }

    /// Whether every consecutive pair of actions in `policy` chains.
    pub fn is_chained(&self, policy: &Policy) -> bool {
        policy
            .actions
            .windows(2)
            .all(|w| self.target(w[0]) == self.source(w[1]))
    }

    /// Subset of this set by position, keeping order.
    pub fn subset(&self, rows: &[usize], scope: PolicyScope) -> PolicySet {
        PolicySet {
            policies: rows.iter().map(|&i| self.policies[i].clone()).collect(),
            scope,
            global_index: rows.iter().map(|&i| self.global_index[i]).collect(),
            edges: Arc::clone(&self.edges),
            num_nodes: self.num_nodes,
        }
    }
}

/// All chained walks of length `|V|`, in lexicographic order of their action
/// id sequences.
pub fn enumerate_policies(graph: &WeightedDigraph) -> PolicySet {
    let horizon = graph.num_nodes();
    let mut policies = Vec::new();
    let mut walk = Vec::with_capacity(horizon);
    // Edge ids are sorted by source, so starting actions in id order and
    // extending with outgoing edges in id order yields lexicographic output.
    for first in 0..graph.num_edges() {
        walk.push(first);
        extend(graph, horizon, &mut walk, &mut policies);
        walk.pop();
    }
    let edges: Arc<[(NodeId, NodeId)]> = graph.edges().iter().map(|e| (e.source, e.target)).collect();
    PolicySet {
        global_index: (0..policies.len()).collect(),
        policies,
        scope: PolicyScope::Global,
        edges,
        num_nodes: graph.num_nodes(),
    }
}

fn extend(graph: &WeightedDigraph, horizon: usize, walk: &mut Vec<ActionId>, out: &mut Vec<Policy>) {
    if walk.len() == horizon {
        out.push(Policy::new(walk.clone()));
        return;
    }
    let here = graph.edges()[*walk.last().expect("walk starts non-empty")].target;
    for next in graph.out_edge_ids(here) {
        walk.push(next);
        extend(graph, horizon, walk, out);
        walk.pop();
    }
}

/// Policies from a global set whose first action leaves `location`.
pub fn local_subspace(policies: &PolicySet, location: NodeId) -> Result<PolicySet> {
    if policies.scope != PolicyScope::Global {
        return Err(Error::Scope("local_subspace expects a global policy set"));
    }
    if location >= policies.num_nodes {
        return Err(Error::InvalidNode {
            id: location,
            len: policies.num_nodes,
        });
    }
    let rows: Vec<usize> = (0..policies.len())
        .filter(|&i| policies.start_node(i) == location)
        .collect();
    Ok(policies.subset(&rows, PolicyScope::Local(location)))
}
