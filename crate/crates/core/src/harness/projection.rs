use std::path::Path;

use crate::clustering::kmeans;
use crate::embedding::{embed, EmbeddingKind};
use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;
use crate::pca::pca_project;
use crate::policy::enumerate_policies;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSummary {
    pub rows: usize,
    pub centers: Vec<usize>,
    pub degenerate: bool,
}

/// Embed every policy of `graph`, cluster, project to 2-D and write
/// `policy,x,y,is_center` rows to `out_path`.
pub fn emit_projection(
    graph: &WeightedDigraph,
    kind: EmbeddingKind,
    k: usize,
    seed: u64,
    out_path: &Path,
) -> Result<ProjectionSummary> {
    let policies = enumerate_policies(graph);
    let embedding = embed(&policies, kind)?;
    let clustering = kmeans(&embedding, k, seed)?;
    let projection = pca_project(&embedding)?;

    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let csv_err = |source| Error::Csv {
        path: out_path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(out_path).map_err(csv_err)?;
    w.write_record(["policy", "x", "y", "is_center"]).map_err(csv_err)?;
    let mut is_center = vec![false; embedding.num_rows()];
    for &r in &clustering.representatives {
        is_center[r] = true;
    }
    for (row, [x, y]) in projection.coords.iter().enumerate() {
        w.write_record([
            embedding.policy_index(row).to_string(),
            format!("{x:.6}"),
            format!("{y:.6}"),
            u8::from(is_center[row]).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(out_path, e))?;

    Ok(ProjectionSummary {
        rows: embedding.num_rows(),
        centers: clustering.representatives,
        degenerate: projection.degenerate,
    })
}
