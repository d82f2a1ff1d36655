//! Policy embeddings.
//!
//! * **BOE** (bag of edges): one coordinate per graph edge, counting how often
//!   the policy traverses it.
//! * **aBOE**: BOE plus one coordinate holding the id of the node the policy
//!   ends on.
//! * **EDM** (edit-distance matrix): row `i` holds the distance from policy
//!   `i` to every policy in the set, where the distance is the size of the
//!   symmetric difference of the two policies' node sets plus that of their
//!   edge sets.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmbeddingKind {
    #[serde(rename = "EDM", alias = "edm")]
    Edm,
    #[serde(rename = "BOE", alias = "boe")]
    Boe,
    #[serde(rename = "aBOE", alias = "aboe")]
    Aboe,
}

impl EmbeddingKind {
    pub const ALL: [EmbeddingKind; 3] = [EmbeddingKind::Edm, EmbeddingKind::Boe, EmbeddingKind::Aboe];

    pub fn name(self) -> &'static str {
        match self {
            EmbeddingKind::Edm => "EDM",
            EmbeddingKind::Boe => "BOE",
            EmbeddingKind::Aboe => "aBOE",
        }
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "edm" => Ok(EmbeddingKind::Edm),
            "boe" => Ok(EmbeddingKind::Boe),
            "aboe" => Ok(EmbeddingKind::Aboe),
            _ => Err(Error::Config(format!("unknown embedding kind {s:?}"))),
        }
    }
}

/// `|Π| × D` matrix, one row per policy of the embedded set, in set order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    kind: EmbeddingKind,
    dim: usize,
    data: Vec<f64>,
    /// Global enumeration index of the policy behind each row.
    policy_index: Vec<usize>,
}

impl EmbeddingMatrix {
    /// Wrap raw row-major data, e.g. for clustering arbitrary points.
    pub fn from_rows(kind: EmbeddingKind, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("embedding"))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::LengthMismatch {
                what: "embedding row",
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(EmbeddingMatrix {
            kind,
            dim,
            data: rows.concat(),
            policy_index: (0..rows.len()).collect(),
        })
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.policy_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policy_index.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.num_rows())
    }

    pub fn policy_index(&self, row: usize) -> usize {
        self.policy_index[row]
    }
}

pub fn embed(policies: &PolicySet, kind: EmbeddingKind) -> Result<EmbeddingMatrix> {
    match kind {
        EmbeddingKind::Edm => embed_edm(policies),
        EmbeddingKind::Boe => embed_boe(policies),
        EmbeddingKind::Aboe => embed_aboe(policies),
    }
}

fn require_policies(policies: &PolicySet) -> Result<()> {
    if policies.is_empty() {
        Err(Error::Empty("policy set"))
    } else {
        Ok(())
    }
}

fn policy_index(policies: &PolicySet) -> Vec<usize> {
    (0..policies.len()).map(|i| policies.global_index(i)).collect()
}

fn edge_counts(policies: &PolicySet, extra: usize) -> Vec<f64> {
    let dim = policies.num_edges() + extra;
    let mut data = vec![0.0; policies.len() * dim];
    for (i, p) in policies.policies().iter().enumerate() {
        let row = &mut data[i * dim..(i + 1) * dim];
        for &a in p.actions() {
            row[a] += 1.0;
        }
    }
    data
}

pub fn embed_boe(policies: &PolicySet) -> Result<EmbeddingMatrix> {
    require_policies(policies)?;
    Ok(EmbeddingMatrix {
        kind: EmbeddingKind::Boe,
        dim: policies.num_edges(),
        data: edge_counts(policies, 0),
        policy_index: policy_index(policies),
    })
}

pub fn embed_aboe(policies: &PolicySet) -> Result<EmbeddingMatrix> {
    require_policies(policies)?;
    let dim = policies.num_edges() + 1;
    let mut data = edge_counts(policies, 1);
    for i in 0..policies.len() {
        data[i * dim + dim - 1] = policies.terminal_node(i) as f64;
    }
    Ok(EmbeddingMatrix {
        kind: EmbeddingKind::Aboe,
        dim,
        data,
        policy_index: policy_index(policies),
    })
}

/// Node and edge membership of one policy, packed into a single bit set:
/// bits `0..|V|` are nodes, bits `|V|..|V|+|E|` are edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementSet {
    words: Vec<u64>,
}

impl ElementSet {
    pub fn from_parts(
        num_nodes: usize,
        num_edges: usize,
        nodes: impl IntoIterator<Item = usize>,
        edges: impl IntoIterator<Item = usize>,
    ) -> Self {
        let mut words = vec![0u64; (num_nodes + num_edges).div_ceil(64)];
        let mut set = |bit: usize| words[bit / 64] |= 1 << (bit % 64);
        nodes.into_iter().for_each(&mut set);
        edges.into_iter().for_each(|e| set(num_nodes + e));
        ElementSet { words }
    }

    pub fn of_policy(policies: &PolicySet, i: usize) -> Self {
        let actions = policies.get(i).actions();
        let nodes = actions.iter().flat_map(|&a| {
            let (u, v) = policies.edges()[a];
            [u, v]
        });
        Self::from_parts(
            policies.num_nodes(),
            policies.num_edges(),
            nodes,
            actions.iter().copied(),
        )
    }

    /// `|self ∪ other \ self ∩ other|`
    pub fn symmetric_difference_len(&self, other: &ElementSet) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

pub fn embed_edm(policies: &PolicySet) -> Result<EmbeddingMatrix> {
    require_policies(policies)?;
    let m = policies.len();
    let sets: Vec<ElementSet> = (0..m).map(|i| ElementSet::of_policy(policies, i)).collect();
    let mut data = vec![0.0; m * m];
    data.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        for (j, d) in row.iter_mut().enumerate() {
            *d = f64::from(sets[i].symmetric_difference_len(&sets[j]));
        }
    });
    Ok(EmbeddingMatrix {
        kind: EmbeddingKind::Edm,
        dim: m,
        data,
        policy_index: policy_index(policies),
    })
}
