//! The agent's POMDP generative model for graph navigation.
//!
//! Hidden states are graph edges `(prev, current)`; the agent is located at
//! `current`. There is one action per edge, meaning "traverse this edge",
//! which is only possible from the edge's source node. Observations are the
//! states themselves (identity likelihood), and edge weights enter the
//! expected free energy through a separate `lambda`-weighted cost vector.

use crate::error::{Error, Result};
use crate::graph::{NodeId, WeightedDigraph};
use crate::matrix::Matrix;

pub type StateId = usize;
pub type ActionId = usize;

/// Preference mass given to every state that does not end at the destination.
pub const PREFERENCE_FLOOR: f64 = 1e-8;

pub const DEFAULT_LAMBDA: f64 = 1.0;

/// States indexed by edge id: state `s` is edge `s` of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    states: Vec<(NodeId, NodeId)>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn edge(&self, state: StateId) -> (NodeId, NodeId) {
        self.states[state]
    }

    /// The agent's location in `state`.
    pub fn location(&self, state: StateId) -> NodeId {
        self.states[state].1
    }

    pub fn id(&self, prev: NodeId, current: NodeId) -> Option<StateId> {
        self.states.binary_search(&(prev, current)).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, (NodeId, NodeId))> + '_ {
        self.states.iter().copied().enumerate()
    }
}

/// Actions indexed by edge id: action `u` traverses edge `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    actions: Vec<(NodeId, NodeId)>,
}

impl ActionSpace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn edge(&self, action: ActionId) -> (NodeId, NodeId) {
        self.actions[action]
    }

    pub fn source(&self, action: ActionId) -> NodeId {
        self.actions[action].0
    }

    pub fn target(&self, action: ActionId) -> NodeId {
        self.actions[action].1
    }

    pub fn id(&self, from: NodeId, to: NodeId) -> Option<ActionId> {
        self.actions.binary_search(&(from, to)).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    /// Likelihood `P(o | s)`, observations by states.
    a: Matrix,
    /// Per-action transitions `P(s' | s, u)`, next state by current state.
    b: Vec<Matrix>,
    /// Preferred observation distribution.
    c: Vec<f64>,
    /// Prior over initial states.
    d: Vec<f64>,
    /// Weight of each state's edge.
    weights: Vec<f64>,
    lambda: f64,
    /// `b_next[u][s]`: the state reached from `s` under action `u`.
    b_next: Vec<Vec<StateId>>,
    /// Entropy of each likelihood column, kept in sync with `a`.
    ambiguity: Vec<f64>,
}

impl GenerativeModel {
    pub fn num_states(&self) -> usize {
        self.d.len()
    }

    pub fn num_actions(&self) -> usize {
        self.b.len()
    }

    pub fn likelihood(&self) -> &Matrix {
        &self.a
    }

    pub fn transition(&self, action: ActionId) -> &Matrix {
        &self.b[action]
    }

    pub fn preferences(&self) -> &[f64] {
        &self.c
    }

    pub fn prior(&self) -> &[f64] {
        &self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Deterministic successor of `state` under `action`.
    pub fn next_state(&self, state: StateId, action: ActionId) -> StateId {
        self.b_next[action][state]
    }

    pub fn check_state(&self, state: StateId) -> Result<()> {
        if state < self.num_states() {
            Ok(())
        } else {
            Err(Error::InvalidState {
                id: state,
                len: self.num_states(),
            })
        }
    }

    pub fn check_action(&self, action: ActionId) -> Result<()> {
        if action < self.num_actions() {
            Ok(())
        } else {
            Err(Error::InvalidAction {
                id: action,
                len: self.num_actions(),
            })
        }
    }

    /// Replace the likelihood mapping. Columns must be probability vectors.
    pub fn set_likelihood(&mut self, a: Matrix) -> Result<()> {
        let n = self.num_states();
        if a.rows() != n || a.cols() != n || !a.is_column_stochastic(1e-9) {
            return Err(Error::Config(
                "likelihood must be a column-stochastic |S|x|S| matrix".into(),
            ));
        }
        self.ambiguity = column_entropies(&a);
        self.a = a;
        Ok(())
    }

    pub fn set_prior(&mut self, d: Vec<f64>) -> Result<()> {
        check_distribution("prior", &d, self.num_states())?;
        self.d = d;
        Ok(())
    }

    pub fn set_preferences(&mut self, c: Vec<f64>) -> Result<()> {
        check_distribution("preferences", &c, self.num_states())?;
        self.c = c;
        Ok(())
    }

    /// Entropy of each likelihood column, `H[P(o | s)]`.
    pub fn ambiguity(&self) -> &[f64] {
        &self.ambiguity
    }
}

fn column_entropies(a: &Matrix) -> Vec<f64> {
    (0..a.cols())
        .map(|s| -a.column(s).filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>())
        .collect()
}

fn check_distribution(what: &'static str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::LengthMismatch {
            what,
            expected: len,
            got: v.len(),
        });
    }
    let sum: f64 = v.iter().sum();
    if v.iter().any(|&x| x.is_nan() || x < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{what} must be a probability vector")));
    }
    Ok(())
}

pub fn build_model(graph: &WeightedDigraph, lambda: f64) -> Result<(StateSpace, ActionSpace, GenerativeModel)> {
    build_model_with_floor(graph, lambda, PREFERENCE_FLOOR)
}

/// Construct `A`, `B`, `C`, `D` and the edge-weight vector for `graph`.
///
/// `B_u` for `u = (a, b)` moves every state located at `a` to state `(a, b)`
/// and leaves every other state where it is. `C` spreads `1 - floor * m'`
/// evenly over the `m` states located at the destination and gives `floor`
/// to each of the `m'` others.
pub fn build_model_with_floor(
    graph: &WeightedDigraph,
    lambda: f64,
    preference_floor: f64,
) -> Result<(StateSpace, ActionSpace, GenerativeModel)> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    let edges: Vec<(NodeId, NodeId)> = graph.edges().iter().map(|e| (e.source, e.target)).collect();
    let n = edges.len();
    if !(preference_floor >= 0.0 && preference_floor * n as f64 <= 1.0) {
        return Err(Error::Config(format!(
            "preference floor {preference_floor} leaves no mass for the destination"
        )));
    }
    let states = StateSpace { states: edges.clone() };
    let actions = ActionSpace { actions: edges };

    let mut b = Vec::with_capacity(n);
    let mut b_next = Vec::with_capacity(n);
    for u in 0..n {
        let (from, _) = actions.edge(u);
        let mut m = Matrix::zeros(n, n);
        let mut next = Vec::with_capacity(n);
        for s in 0..n {
            let to = if states.location(s) == from { u } else { s };
            m[(to, s)] = 1.0;
            next.push(to);
        }
        b.push(m);
        b_next.push(next);
    }

    let dest = graph.destination_node();
    let at_dest = (0..n).filter(|&s| states.location(s) == dest).count();
    let others = n - at_dest;
    let dest_mass = (1.0 - preference_floor * others as f64) / at_dest as f64;
    let c = (0..n)
        .map(|s| {
            if states.location(s) == dest {
                dest_mass
            } else {
                preference_floor
            }
        })
        .collect();

    let a = Matrix::identity(n);
    let model = GenerativeModel {
        ambiguity: column_entropies(&a),
        a,
        b,
        c,
        d: vec![1.0 / n as f64; n],
        weights: graph.edges().iter().map(|e| e.weight).collect(),
        lambda,
        b_next,
    };
    Ok((states, actions, model))
}
