//! Policy selection: exhaustive search, and hierarchical search that scores
//! k-means clusters first and then searches only the best cluster.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clustering::{representative_efe_inputs, Clustering, RepresentativeMode};
use crate::embedding::{EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::inference::{expected_free_energy, policy_posterior, select_action, BeliefState, SelectionMode};
use crate::model::{ActionId, GenerativeModel, DEFAULT_LAMBDA};
use crate::policy::{PolicyScope, PolicySet};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Evaluate every candidate policy.
    Standard,
    /// Score each cluster by the EFE of the policy nearest its centroid.
    #[value(name = "hierarchical_center", alias = "center")]
    #[serde(alias = "center")]
    HierarchicalCenter,
    /// Score each cluster by the mean EFE of `n` uniformly drawn members.
    #[value(name = "hierarchical_sample", alias = "sample")]
    #[serde(alias = "sample")]
    HierarchicalSample,
}

impl Strategy {
    pub fn is_hierarchical(self) -> bool {
        self != Strategy::Standard
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Standard => "standard",
            Strategy::HierarchicalCenter => "hierarchical_center",
            Strategy::HierarchicalSample => "hierarchical_sample",
        })
    }
}

/// Whether candidates are all policies or only those leaving the agent's
/// current location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Global,
    Local,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Global => "Global",
            Scope::Local => "Local",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: Strategy,
    /// Number of clusters; unused by `Standard`.
    pub k: usize,
    /// Samples per cluster; only used by `HierarchicalSample`.
    pub n: usize,
    pub scope: Scope,
    pub lambda: f64,
    pub embedding_kind: EmbeddingKind,
    pub selection_mode: SelectionMode,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::Standard,
            k: 12,
            n: 3,
            scope: Scope::Local,
            lambda: DEFAULT_LAMBDA,
            embedding_kind: EmbeddingKind::Boe,
            selection_mode: SelectionMode::Argmax,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategy.is_hierarchical() && self.k < 1 {
            return Err(Error::InvalidK);
        }
        if self.strategy == Strategy::HierarchicalSample && self.n < 1 {
            return Err(Error::InvalidSampleCount);
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidLambda(self.lambda));
        }
        Ok(())
    }

    /// Same configuration with the parameters that `strategy` ignores reset
    /// to their defaults, so equivalent configurations compare equal.
    pub fn canonical(&self) -> SearchConfig {
        let mut c = self.clone();
        let d = SearchConfig::default();
        match c.strategy {
            Strategy::Standard => {
                c.k = d.k;
                c.n = d.n;
                c.embedding_kind = d.embedding_kind;
            }
            Strategy::HierarchicalCenter => c.n = d.n,
            Strategy::HierarchicalSample => {}
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub chosen_action: ActionId,
    /// Distinct policies whose EFE was computed.
    pub efe_evaluations: usize,
    /// Size of the set searched exhaustively in the last stage.
    pub candidate_policies: usize,
    /// `(row in the policy set, G)` for every evaluated policy, by row.
    pub g_values: Vec<(usize, f64)>,
    /// Lowest-G policy of the final stage (ties to the lowest row).
    pub best_policy: usize,
    pub chosen_cluster: Option<usize>,
    /// Score of each cluster, hierarchical strategies only.
    pub cluster_scores: Vec<f64>,
}

/// Memoized EFE over rows of one policy set.
struct EfeCache<'a> {
    model: &'a GenerativeModel,
    belief: &'a BeliefState,
    policies: &'a PolicySet,
    values: BTreeMap<usize, f64>,
}

impl<'a> EfeCache<'a> {
    fn new(model: &'a GenerativeModel, belief: &'a BeliefState, policies: &'a PolicySet) -> Self {
        EfeCache {
            model,
            belief,
            policies,
            values: BTreeMap::new(),
        }
    }

    fn g(&mut self, row: usize) -> f64 {
        *self
            .values
            .entry(row)
            .or_insert_with(|| expected_free_energy(self.model, self.belief, self.policies.get(row).actions()).g)
    }
}

fn check_scope(policies: &PolicySet, config: &SearchConfig) -> Result<()> {
    match (config.scope, policies.scope()) {
        (Scope::Global, PolicyScope::Global) | (Scope::Local, PolicyScope::Local(_)) => Ok(()),
        _ => Err(Error::Scope("policy set scope differs from the search config")),
    }
}

/// Standard selection over `rows`: posterior over their EFEs, then action
/// choice by summed posterior mass of each first action.
fn select_among(cache: &mut EfeCache<'_>, rows: &[usize], mode: SelectionMode, seed: u64) -> Result<(ActionId, usize)> {
    let gs: Vec<f64> = rows.iter().map(|&r| cache.g(r)).collect();
    let q_pi = policy_posterior(&gs)?;
    let candidates: Vec<&[ActionId]> = rows.iter().map(|&r| cache.policies.get(r).actions()).collect();
    let action = select_action(&candidates, &q_pi, mode, seed)?;
    let mut best = 0;
    for (i, g) in gs.iter().enumerate() {
        if *g < gs[best] {
            best = i;
        }
    }
    Ok((action, rows[best]))
}

pub fn search_standard(
    model: &GenerativeModel,
    belief: &BeliefState,
    policies: &PolicySet,
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    if policies.is_empty() {
        return Err(Error::Empty("policy set"));
    }
    check_scope(policies, config)?;
    let rows: Vec<usize> = (0..policies.len()).collect();
    let mut cache = EfeCache::new(model, belief, policies);
    let (chosen_action, best_policy) = select_among(&mut cache, &rows, config.selection_mode, config.seed)?;
    Ok(SearchOutcome {
        chosen_action,
        efe_evaluations: cache.values.len(),
        candidate_policies: rows.len(),
        g_values: cache.values.into_iter().collect(),
        best_policy,
        chosen_cluster: None,
        cluster_scores: Vec::new(),
    })
}

/// Hierarchical selection. Each cluster gets a score (the EFE of its
/// representative, or the mean EFE of up to `n` sampled members); the
/// lowest-scoring cluster (ties to the lowest id) is then searched with
/// the standard procedure. EFEs from the scoring pass are reused.
pub fn search_hierarchical(
    model: &GenerativeModel,
    belief: &BeliefState,
    policies: &PolicySet,
    embedding: &EmbeddingMatrix,
    clustering: &Clustering,
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    if clustering.members.is_empty() {
        return Err(Error::Empty("clustering"));
    }
    if policies.is_empty() {
        return Err(Error::Empty("policy set"));
    }
    check_scope(policies, config)?;
    for (what, got) in [
        ("embedding rows", embedding.num_rows()),
        ("cluster assignment", clustering.assignment.len()),
    ] {
        if got != policies.len() {
            return Err(Error::LengthMismatch {
                what,
                expected: policies.len(),
                got,
            });
        }
    }

    let mode = match config.strategy {
        Strategy::HierarchicalSample => RepresentativeMode::Sample(config.n),
        Strategy::HierarchicalCenter | Strategy::Standard => RepresentativeMode::Center,
    };
    let inputs = representative_efe_inputs(clustering, mode, seed::derive(config.seed, &[1]))?;

    let mut cache = EfeCache::new(model, belief, policies);
    let cluster_scores: Vec<f64> = inputs
        .iter()
        .map(|rows| rows.iter().map(|&r| cache.g(r)).sum::<f64>() / rows.len() as f64)
        .collect();
    let mut chosen = 0;
    for (c, s) in cluster_scores.iter().enumerate() {
        if s.total_cmp(&cluster_scores[chosen]).is_lt() {
            chosen = c;
        }
    }

    let members = &clustering.members[chosen];
    let (chosen_action, best_policy) = select_among(
        &mut cache,
        members,
        config.selection_mode,
        seed::derive(config.seed, &[2]),
    )?;
    Ok(SearchOutcome {
        chosen_action,
        efe_evaluations: cache.values.len(),
        candidate_policies: members.len(),
        g_values: cache.values.into_iter().collect(),
        best_policy,
        chosen_cluster: Some(chosen),
        cluster_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::kmeans;
    use crate::embedding::embed;
    use crate::graph::{generate_graph, NodeId, WeightedDigraph};
    use crate::model::build_model;
    use crate::policy::{enumerate_policies, local_subspace};

    const A: NodeId = 0;
    const B: NodeId = 1;
    const C: NodeId = 2;

    fn cycle3() -> WeightedDigraph {
        WeightedDigraph::from_between_edges(3, &[(A, B, 1.0), (B, C, 1.0), (C, A, 1.0)], A, C).unwrap()
    }

    fn local_config() -> SearchConfig {
        SearchConfig::default()
    }

    struct Instance {
        model: GenerativeModel,
        belief: BeliefState,
        local: PolicySet,
    }

    fn instance(graph: &WeightedDigraph) -> Instance {
        let (states, _, model) = build_model(graph, 1.0).unwrap();
        let start = graph.start_node();
        let belief = BeliefState::one_hot(model.num_states(), states.id(start, start).unwrap(), 0);
        let local = local_subspace(&enumerate_policies(graph), start).unwrap();
        Instance { model, belief, local }
    }

    #[test]
    fn singleton_set() {
        let g = cycle3();
        let inst = instance(&g);
        let one = inst.local.subset(&[3], inst.local.scope());
        let out = search_standard(&inst.model, &inst.belief, &one, &local_config()).unwrap();
        assert_eq!(out.efe_evaluations, 1);
        assert_eq!(out.chosen_action, one.get(0).first_action());
    }

    #[test]
    fn cycle_moves_toward_goal() {
        let g = cycle3();
        let inst = instance(&g);
        let out = search_standard(&inst.model, &inst.belief, &inst.local, &local_config()).unwrap();
        assert_eq!(out.chosen_action, g.edge_id(A, B).unwrap());
        assert_eq!(out.efe_evaluations, inst.local.len());
        assert_eq!(out.candidate_policies, inst.local.len());
        // Exhaustive check of the winner: A->B->C then stay.
        let best = inst.local.get(out.best_policy).actions().to_vec();
        assert_eq!(
            best,
            vec![
                g.edge_id(A, B).unwrap(),
                g.edge_id(B, C).unwrap(),
                g.edge_id(C, C).unwrap()
            ]
        );
    }

    #[test]
    fn uniform_duplication_keeps_choice() {
        let g = generate_graph(4, 5).unwrap();
        let inst = instance(&g);
        let base = search_standard(&inst.model, &inst.belief, &inst.local, &local_config()).unwrap();
        let rows: Vec<usize> = (0..inst.local.len()).flat_map(|i| [i, i]).collect();
        let doubled = inst.local.subset(&rows, inst.local.scope());
        let out = search_standard(&inst.model, &inst.belief, &doubled, &local_config()).unwrap();
        assert_eq!(out.chosen_action, base.chosen_action);
    }

    #[test]
    fn scope_mismatch_is_rejected() {
        let g = cycle3();
        let inst = instance(&g);
        let cfg = SearchConfig {
            scope: Scope::Global,
            ..local_config()
        };
        assert!(matches!(
            search_standard(&inst.model, &inst.belief, &inst.local, &cfg),
            Err(Error::Scope(_))
        ));
    }

    fn hier(
        inst: &Instance,
        kind: EmbeddingKind,
        k: usize,
        strategy: Strategy,
        n: usize,
        seed: u64,
    ) -> (SearchOutcome, Clustering) {
        let e = embed(&inst.local, kind).unwrap();
        let c = kmeans(&e, k, seed).unwrap();
        let cfg = SearchConfig {
            strategy,
            k,
            n,
            embedding_kind: kind,
            seed,
            ..local_config()
        };
        (
            search_hierarchical(&inst.model, &inst.belief, &inst.local, &e, &c, &cfg).unwrap(),
            c,
        )
    }

    #[test]
    fn one_cluster_equals_standard() {
        for seed in 0..30 {
            let g = generate_graph(3 + (seed % 3) as usize, seed).unwrap();
            let inst = instance(&g);
            let standard = search_standard(&inst.model, &inst.belief, &inst.local, &local_config()).unwrap();
            for strategy in [Strategy::HierarchicalCenter, Strategy::HierarchicalSample] {
                let (out, _) = hier(&inst, EmbeddingKind::Boe, 1, strategy, 3, seed);
                assert_eq!(out.chosen_action, standard.chosen_action);
                assert_eq!(out.g_values, standard.g_values);
            }
        }
    }

    #[test]
    fn singleton_clusters_pick_the_best_policy() {
        let g = cycle3();
        let inst = instance(&g);
        let standard = search_standard(&inst.model, &inst.belief, &inst.local, &local_config()).unwrap();
        let (out, c) = hier(
            &inst,
            EmbeddingKind::Edm,
            inst.local.len(),
            Strategy::HierarchicalCenter,
            1,
            0,
        );
        assert_eq!(c.k_effective, inst.local.len());
        assert_eq!(out.efe_evaluations, inst.local.len());
        assert_eq!(out.chosen_action, standard.chosen_action);
        assert_eq!(out.best_policy, standard.best_policy);
    }

    #[test]
    fn instrumentation_invariants() {
        for seed in 0..40 {
            let g = generate_graph(4 + (seed % 2) as usize, seed).unwrap();
            let inst = instance(&g);
            for kind in EmbeddingKind::ALL {
                for strategy in [Strategy::HierarchicalCenter, Strategy::HierarchicalSample] {
                    let (out, c) = hier(&inst, kind, 6, strategy, 3, seed);
                    let chosen = out.chosen_cluster.unwrap();
                    let per_cluster = if strategy == Strategy::HierarchicalSample { 3 } else { 1 };
                    assert!(out.efe_evaluations <= c.k_effective * per_cluster + c.members[chosen].len());
                    assert_eq!(out.candidate_policies, c.members[chosen].len());
                    assert!(out.cluster_scores.iter().all(|s| out.cluster_scores[chosen] <= *s));
                    assert!(c.members[chosen].contains(&out.best_policy));
                    // Summed posterior mass decides the action, not the single best policy.
                    assert!(c.members[chosen]
                        .iter()
                        .any(|&r| inst.local.get(r).first_action() == out.chosen_action));
                    for &(row, g) in &out.g_values {
                        let again = expected_free_energy(&inst.model, &inst.belief, inst.local.get(row).actions()).g;
                        assert_eq!(g.to_bits(), again.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_cuts_evaluations_on_larger_sets() {
        let mut checked = 0;
        for seed in 0..60 {
            let g = generate_graph(4, seed).unwrap();
            let inst = instance(&g);
            let (out, c) = hier(&inst, EmbeddingKind::Boe, 12, Strategy::HierarchicalSample, 3, seed);
            let max_cluster = c.members.iter().map(Vec::len).max().unwrap();
            if inst.local.len() > 12 * 3 + max_cluster {
                assert!(out.efe_evaluations < inst.local.len());
                checked += 1;
            }
        }
        assert!(checked > 0, "no instance was large enough");
    }

    #[test]
    fn mismatched_clustering_is_rejected() {
        let g = generate_graph(4, 1).unwrap();
        let inst = instance(&g);
        let global = enumerate_policies(&g);
        let e = embed(&global, EmbeddingKind::Boe).unwrap();
        let c = kmeans(&e, 3, 0).unwrap();
        let cfg = SearchConfig {
            strategy: Strategy::HierarchicalCenter,
            ..local_config()
        };
        assert!(search_hierarchical(&inst.model, &inst.belief, &inst.local, &e, &c, &cfg).is_err());
    }

    #[test]
    fn canonical_config_ignores_unused_fields() {
        let a = SearchConfig {
            k: 6,
            n: 1,
            ..SearchConfig::default()
        };
        assert_eq!(a.canonical(), SearchConfig::default());
        let b = SearchConfig {
            strategy: Strategy::HierarchicalCenter,
            n: 7,
            ..SearchConfig::default()
        };
        assert_eq!(b.canonical().n, 3);
        assert!(SearchConfig {
            strategy: Strategy::HierarchicalSample,
            n: 0,
            ..SearchConfig::default()
        }
        .validate()
        .is_err());
    }
}
