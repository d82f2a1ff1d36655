//! Hierarchical policy selection for active-inference agents.
//!
//! Policies of a discrete POMDP agent are enumerated, embedded into a vector
//! space (edit-distance rows, bag-of-edges counts, or bag-of-edges plus the
//! terminal node), clustered with k-means, and searched hierarchically: score
//! each cluster from a few representative policies, then run the standard
//! expected-free-energy search only inside the most promising cluster.
//!
//! The reference task is navigation on small random weighted digraphs, where
//! the agent's hidden state is the last edge it traversed.

pub mod clustering;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod harness;
pub mod inference;
pub mod matrix;
pub mod model;
pub mod pca;
pub mod policy;
pub mod search;
pub mod seed;

pub use clustering::{kmeans, representative_efe_inputs, Clustering, RepresentativeMode};
pub use embedding::{embed, embed_aboe, embed_boe, embed_edm, EmbeddingKind, EmbeddingMatrix};
pub use error::{Error, Result};
pub use graph::{generate_graph, shortest_path, NodeId, WeightedDigraph};
pub use inference::{
    expected_free_energy, infer_state, policy_posterior, project, select_action, BeliefState, EfeResult, SelectionMode,
};
pub use matrix::Matrix;
pub use model::{build_model, ActionId, ActionSpace, GenerativeModel, StateId, StateSpace};
pub use pca::{pca_project, Projection};
pub use policy::{enumerate_policies, local_subspace, Policy, PolicyScope, PolicySet};
pub use search::{search_hierarchical, search_standard, SearchConfig, SearchOutcome, Strategy};
