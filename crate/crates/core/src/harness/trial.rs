use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans, Clustering};
use crate::embedding::{embed, EmbeddingMatrix};
use crate::error::Result;
use crate::graph::{generate_graph, shortest_path, NodeId, WeightedDigraph};
use crate::inference::{infer_state, BeliefState};
use crate::model::{build_model, ActionId};
use crate::policy::{enumerate_policies, local_subspace, PolicySet};
use crate::search::{search_hierarchical, search_standard, Scope, SearchConfig, SearchOutcome};
use crate::seed;

/// Extra steps simulated after `|V|` to check that the agent stays put.
pub const EXTRA_STEPS: usize = 2;

/// Wall-clock measurements of a trial. Excluded from determinism checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    /// Seconds spent on inference and policy search, per step.
    pub inference_s: Vec<f64>,
    pub embedding_build_s: f64,
    pub clustering_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub graph_seed: u64,
    pub num_nodes: usize,
    pub config: SearchConfig,
    pub graph: WeightedDigraph,
    /// Agent location before the first step and after every step.
    pub visited_nodes: Vec<NodeId>,
    pub actions: Vec<ActionId>,
    pub optimal: bool,
    /// Weight walked until the destination was first reached, if it was.
    pub path_weight: Option<f64>,
    pub oracle_weight: f64,
    pub efe_evaluations_per_step: Vec<usize>,
    /// Lowest EFE seen in the final search stage, per step.
    pub best_g_per_step: Vec<f64>,
    pub timing: TrialTiming,
}

impl TrialRecord {
    /// Copy with wall-clock fields cleared, for reproducibility comparisons.
    pub fn without_timing(&self) -> TrialRecord {
        TrialRecord {
            timing: TrialTiming::default(),
            ..self.clone()
        }
    }

    pub fn mean_inference_s(&self) -> f64 {
        mean(&self.timing.inference_s)
    }

    pub fn mean_efe_evaluations(&self) -> f64 {
        let v: Vec<f64> = self.efe_evaluations_per_step.iter().map(|&x| x as f64).collect();
        mean(&v)
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Policies, and for hierarchical strategies their embedding and clustering,
/// searched from one location (local scope) or from everywhere (global).
struct SearchSpace {
    policies: PolicySet,
    clustered: Option<(EmbeddingMatrix, Clustering)>,
}

/// Walk weight until the destination is first reached, counting a repeated
/// node as its self-loop. `None` if the destination is never reached.
pub fn weight_to_destination(graph: &WeightedDigraph, visited: &[NodeId]) -> Option<f64> {
    let dest = graph.destination_node();
    let arrival = visited.iter().position(|&v| v == dest)?;
    let weight = visited[..=arrival]
        .windows(2)
        .map(|w| graph.weight(w[0], w[1]).expect("visited nodes follow graph edges"))
        .sum();
    Some(weight)
}

/// A trial is optimal when the agent reaches the destination along a walk of
/// minimum weight and never leaves it afterwards.
pub fn is_optimal(graph: &WeightedDigraph, visited: &[NodeId], oracle_weight: f64) -> bool {
    let dest = graph.destination_node();
    let Some(weight) = weight_to_destination(graph, visited) else {
        return false;
    };
    let arrival = visited.iter().position(|&v| v == dest).expect("reached");
    weight == oracle_weight && visited[arrival..].iter().all(|&v| v == dest)
}

fn build_space(
    policies: PolicySet,
    config: &SearchConfig,
    kmeans_seed: u64,
    timing: &mut TrialTiming,
) -> Result<SearchSpace> {
    if !config.strategy.is_hierarchical() {
        return Ok(SearchSpace {
            policies,
            clustered: None,
        });
    }
    let t = Instant::now();
    let embedding = embed(&policies, config.embedding_kind)?;
    timing.embedding_build_s += t.elapsed().as_secs_f64();
    let t = Instant::now();
    let clustering = kmeans(&embedding, config.k, kmeans_seed)?;
    timing.clustering_s += t.elapsed().as_secs_f64();
    Ok(SearchSpace {
        policies,
        clustered: Some((embedding, clustering)),
    })
}

/// Generate a graph, build the agent, and simulate `|V| + 2` steps of
/// perceive / search / act. Reproducible from `(num_nodes, graph_seed, config)`.
pub fn run_trial(num_nodes: usize, graph_seed: u64, config: &SearchConfig) -> Result<TrialRecord> {
    config.validate()?;
    let graph = generate_graph(num_nodes, graph_seed)?;
    let (states, _, mut model) = build_model(&graph, config.lambda)?;
    let global = enumerate_policies(&graph);
    let mut timing = TrialTiming::default();

    let kmeans_seed = |label: u64| seed::derive(config.seed, &[graph_seed, 0x6b6d, label]);
    let spaces: Vec<SearchSpace> = match config.scope {
        Scope::Global => vec![build_space(global, config, kmeans_seed(u64::MAX), &mut timing)?],
        Scope::Local => (0..num_nodes)
            .map(|loc| {
                let local = local_subspace(&global, loc)?;
                build_space(local, config, kmeans_seed(loc as u64), &mut timing)
            })
            .collect::<Result<_>>()?,
    };

    let start = graph.start_node();
    let mut true_state = states.id(start, start).expect("self-loop at start");
    model.set_prior(BeliefState::one_hot(model.num_states(), true_state, 0).q_s)?;
    let mut belief = BeliefState::prior(&model);
    let mut prev_action = None;

    let steps = num_nodes + EXTRA_STEPS;
    let mut visited = vec![start];
    let mut actions = Vec::with_capacity(steps);
    let mut evals = Vec::with_capacity(steps);
    let mut best_g = Vec::with_capacity(steps);
    for step in 0..steps {
        let t = Instant::now();
        belief = infer_state(&model, true_state, &belief, prev_action)?;
        let location = states.location(belief.map_state());
        let space = match config.scope {
            Scope::Global => &spaces[0],
            Scope::Local => &spaces[location],
        };
        let step_config = SearchConfig {
            seed: seed::derive(config.seed, &[graph_seed, 0x5e1, step as u64]),
            ..config.clone()
        };
        let outcome: SearchOutcome = match &space.clustered {
            None => search_standard(&model, &belief, &space.policies, &step_config)?,
            Some((embedding, clustering)) => {
                search_hierarchical(&model, &belief, &space.policies, embedding, clustering, &step_config)?
            }
        };
        timing.inference_s.push(t.elapsed().as_secs_f64());

        let action = outcome.chosen_action;
        true_state = model.next_state(true_state, action);
        visited.push(states.location(true_state));
        actions.push(action);
        evals.push(outcome.efe_evaluations);
        let g = outcome
            .g_values
            .iter()
            .find(|(row, _)| *row == outcome.best_policy)
            .map(|&(_, g)| g)
            .expect("best policy was evaluated");
        best_g.push(g);
        prev_action = Some(action);
    }

    let oracle_weight = shortest_path(&graph).total_weight;
    Ok(TrialRecord {
        graph_seed,
        num_nodes,
        config: config.clone(),
        optimal: is_optimal(&graph, &visited, oracle_weight),
        path_weight: weight_to_destination(&graph, &visited),
        oracle_weight,
        graph,
        visited_nodes: visited,
        actions,
        efe_evaluations_per_step: evals,
        best_g_per_step: best_g,
        timing,
    })
}
