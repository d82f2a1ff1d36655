use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingKind;
use crate::error::{Error, Result};
use crate::inference::SelectionMode;
use crate::model::DEFAULT_LAMBDA;
use crate::search::{Scope, SearchConfig, Strategy};

/// Everything the benchmark CLI accepts, loadable from a TOML file. List
/// fields are crossed to form the suite's configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub strategy: Vec<Strategy>,
    pub embedding: Vec<EmbeddingKind>,
    pub scope: Vec<Scope>,
    pub k: Vec<usize>,
    pub n: Vec<usize>,
    pub lambda: f64,
    pub selection_mode: SelectionMode,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub emit_projections: bool,
    pub threads: Option<usize>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            sizes: vec![3, 4, 5],
            trials: 40,
            strategy: vec![Strategy::Standard, Strategy::HierarchicalSample],
            embedding: vec![EmbeddingKind::Boe],
            scope: vec![Scope::Local],
            k: vec![12],
            n: vec![3],
            lambda: DEFAULT_LAMBDA,
            selection_mode: SelectionMode::Argmax,
            seed: 0,
            out_dir: PathBuf::from("results"),
            emit_projections: false,
            threads: None,
        }
    }
}

impl BenchSettings {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Cross product of the list fields. Parameters a strategy ignores do
    /// not multiply it, and duplicates are dropped.
    pub fn configs(&self) -> Result<Vec<SearchConfig>> {
        for (name, empty) in [
            ("sizes", self.sizes.is_empty()),
            ("strategy", self.strategy.is_empty()),
            ("embedding", self.embedding.is_empty()),
            ("scope", self.scope.is_empty()),
            ("k", self.k.is_empty()),
            ("n", self.n.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("{name} must list at least one value")));
            }
        }
        if let Some(&s) = self.sizes.iter().find(|&&s| s < 2) {
            return Err(Error::Config(format!("graph size {s} is below 2")));
        }
        let mut out: Vec<SearchConfig> = Vec::new();
        for &scope in &self.scope {
            for &strategy in &self.strategy {
                for &embedding_kind in &self.embedding {
                    for &k in &self.k {
                        for &n in &self.n {
                            let config = SearchConfig {
                                strategy,
                                k,
                                n,
                                scope,
                                lambda: self.lambda,
                                embedding_kind,
                                selection_mode: self.selection_mode,
                                seed: self.seed,
                            }
                            .canonical();
                            config.validate()?;
                            if !out.contains(&config) {
                                out.push(config);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
