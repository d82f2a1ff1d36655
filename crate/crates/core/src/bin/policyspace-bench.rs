//! Benchmark runner: exhaustive vs hierarchical policy search on random
//! graph-navigation tasks.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use policyspace::harness::{emit_projection, run_suite, trial_seed, write_outputs, BenchSettings, SuiteOptions};
use policyspace::search::{Scope, Strategy};
use policyspace::{generate_graph, EmbeddingKind, SelectionMode};

#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// TOML file with any of the settings below; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Graph sizes (node counts).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,

    /// Trials (graphs) per size.
    #[arg(long)]
    trials: Option<usize>,

    /// Search strategies (comma-separated).
    #[arg(long, value_delimiter = ',', value_enum)]
    strategy: Option<Vec<Strategy>>,

    /// Policy embeddings: EDM, BOE, aBOE.
    #[arg(long, value_delimiter = ',', value_parser = parse_embedding)]
    embedding: Option<Vec<EmbeddingKind>>,

    /// Candidate policies: all, or only those leaving the current node.
    #[arg(long, value_delimiter = ',', value_enum)]
    scope: Option<Vec<Scope>>,

    /// Cluster counts.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,

    /// Samples per cluster for hierarchical_sample.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,

    /// Weight of the edge-cost term in the expected free energy.
    #[arg(long)]
    lambda: Option<f64>,

    /// Pick the highest-mass action, or sample it.
    #[arg(long, value_enum)]
    selection_mode: Option<SelectionMode>,

    /// Base seed; trial i uses graph seed `seed + i`.
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for results.csv, trials/ and projections/.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Also write 2-D PCA projections of the global embedding of each size's first graph.
    #[arg(long)]
    emit_projections: bool,

    /// Worker threads for trials (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_embedding(s: &str) -> Result<EmbeddingKind, String> {
    s.parse().map_err(|e: policyspace::Error| e.to_string())
}

impl Cli {
    fn settings(self) -> Result<BenchSettings> {
        let mut s = match &self.config {
            Some(path) => BenchSettings::from_toml_file(path)?,
            None => BenchSettings::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { s.$field = v; }
            )*};
        }
        take!(
            sizes,
            trials,
            strategy,
            embedding,
            scope,
            k,
            n,
            lambda,
            selection_mode,
            seed,
            out_dir
        );
        if self.threads.is_some() {
            s.threads = self.threads;
        }
        s.emit_projections |= self.emit_projections;
        Ok(s)
    }
}

fn main() -> Result<()> {
    let settings = Cli::parse().settings()?;
    let configs = settings.configs()?;
    eprintln!(
        "running {} config(s) x {} size(s) x {} trial(s)",
        configs.len(),
        settings.sizes.len(),
        settings.trials
    );

    let options = SuiteOptions {
        threads: settings.threads,
    };
    let result = run_suite(&settings.sizes, settings.trials, &configs, settings.seed, &options)?;
    write_outputs(&result, &settings.out_dir)
        .with_context(|| format!("writing results to {}", settings.out_dir.display()))?;
    print!("{}", result.table.render());

    if settings.emit_projections {
        let mut kinds: Vec<(EmbeddingKind, usize)> = configs
            .iter()
            .filter(|c| c.strategy.is_hierarchical())
            .map(|c| (c.embedding_kind, c.k))
            .collect();
        kinds.sort();
        kinds.dedup();
        for &size in &settings.sizes {
            let graph = generate_graph(size, trial_seed(settings.seed, 0))?;
            for &(kind, k) in &kinds {
                let path = settings
                    .out_dir
                    .join("projections")
                    .join(format!("size{size}_{kind}_k{k}.csv"));
                let summary = emit_projection(&graph, kind, k, settings.seed, &path)?;
                eprintln!("wrote {} ({} policies)", path.display(), summary.rows);
            }
        }
    }
    eprintln!("results in {}", settings.out_dir.display());
    Ok(())
}
