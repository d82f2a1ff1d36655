use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{mean, run_trial, TrialRecord};
use crate::error::{Error, Result};
use crate::search::{SearchConfig, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config: SearchConfig,
    pub size: usize,
    pub trials: usize,
    pub pct_optimal: f64,
    pub mean_infer_s: f64,
    pub mean_build_s: f64,
    pub mean_efe_evals: f64,
}

impl ResultRow {
    /// Columns shared with the CSV output.
    pub fn csv_fields(&self) -> [String; 9] {
        let c = &self.config;
        let (embedding, k, n) = match c.strategy {
            Strategy::Standard => ("None".to_string(), String::new(), String::new()),
            Strategy::HierarchicalCenter => (c.embedding_kind.to_string(), c.k.to_string(), String::new()),
            Strategy::HierarchicalSample => (c.embedding_kind.to_string(), c.k.to_string(), c.n.to_string()),
        };
        [
            c.scope.to_string(),
            embedding,
            k,
            n,
            self.size.to_string(),
            format!("{:.1}", self.pct_optimal),
            format!("{:.6}", self.mean_infer_s),
            format!("{:.6}", self.mean_build_s),
            format!("{:.2}", self.mean_efe_evals),
        ]
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "scope",
    "embedding",
    "k",
    "n",
    "size",
    "pct_optimal",
    "mean_infer_s",
    "mean_build_s",
    "mean_efe_evals",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    /// One row per `(config, size)`, in order of first appearance.
    pub fn from_records(records: &[TrialRecord]) -> ResultsTable {
        let mut order = Vec::new();
        let mut groups: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
        for r in records {
            let key = (r.config.canonical(), r.num_nodes);
            let slot = match order.iter().position(|k| *k == key) {
                Some(i) => i,
                None => {
                    order.push(key);
                    order.len() - 1
                }
            };
            groups.entry(slot).or_default().push(r);
        }
        let rows = order
            .into_iter()
            .enumerate()
            .map(|(slot, (config, size))| {
                let group = &groups[&slot];
                let optimal = group.iter().filter(|r| r.optimal).count();
                let infer: Vec<f64> = group
                    .iter()
                    .flat_map(|r| r.timing.inference_s.iter().copied())
                    .collect();
                let build: Vec<f64> = group
                    .iter()
                    .map(|r| r.timing.embedding_build_s + r.timing.clustering_s)
                    .collect();
                let evals: Vec<f64> = group
                    .iter()
                    .flat_map(|r| r.efe_evaluations_per_step.iter().map(|&e| e as f64))
                    .collect();
                ResultRow {
                    config,
                    size,
                    trials: group.len(),
                    pct_optimal: 100.0 * optimal as f64 / group.len() as f64,
                    mean_infer_s: mean(&infer),
                    mean_build_s: mean(&build),
                    mean_efe_evals: mean(&evals),
                }
            })
            .collect();
        ResultsTable { rows }
    }

    pub fn row(&self, config: &SearchConfig, size: usize) -> Option<&ResultRow> {
        let config = config.canonical();
        self.rows.iter().find(|r| r.config == config && r.size == size)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.csv_fields()).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Fixed-width text rendering for the terminal.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<7} {:<6} {:>3} {:>3} {:>4} {:>8} {:>12} {:>12} {:>10}\n",
            "scope", "emb", "k", "n", "size", "%opt", "infer_s", "build_s", "efe_evals"
        );
        for row in &self.rows {
            let f = row.csv_fields();
            out.push_str(&format!(
                "{:<7} {:<6} {:>3} {:>3} {:>4} {:>8} {:>12} {:>12} {:>10}\n",
                f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Worker threads for running trials; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub table: ResultsTable,
    /// Ordered by config, then size, then trial.
    pub records: Vec<TrialRecord>,
}

/// Seed of the `trial`-th graph. Every config sees the same graphs.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed.wrapping_add(trial as u64)
}

/// Run `trials_per_size` trials for every size under every config.
pub fn run_suite(
    sizes: &[usize],
    trials_per_size: usize,
    configs: &[SearchConfig],
    base_seed: u64,
    options: &SuiteOptions,
) -> Result<SuiteResult> {
    if trials_per_size < 1 {
        return Err(Error::Config("trials per size must be at least 1".into()));
    }
    for c in configs {
        c.validate()?;
    }
    let jobs: Vec<(&SearchConfig, usize, u64)> = configs
        .iter()
        .flat_map(|c| {
            sizes
                .iter()
                .flat_map(move |&size| (0..trials_per_size).map(move |t| (c, size, trial_seed(base_seed, t))))
        })
        .collect();
    let run = || -> Result<Vec<TrialRecord>> {
        jobs.par_iter()
            .map(|&(config, size, seed)| run_trial(size, seed, config))
            .collect()
    };
    let records = match options.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(SuiteResult {
        table: ResultsTable::from_records(&records),
        records,
    })
}

/// File name of a trial's log, unique within a suite.
pub fn trial_log_name(r: &TrialRecord) -> String {
    let c = &r.config;
    let detail = match c.strategy {
        Strategy::Standard => "none".to_string(),
        Strategy::HierarchicalCenter => format!("{}_k{}_center", c.embedding_kind, c.k),
        Strategy::HierarchicalSample => format!("{}_k{}_n{}", c.embedding_kind, c.k, c.n),
    };
    format!(
        "{}_{}_size{}_seed{}.json",
        c.scope.to_string().to_lowercase(),
        detail,
        r.num_nodes,
        r.graph_seed
    )
}

/// Write `results.csv` and one JSON log per trial under `out_dir/trials`.
pub fn write_outputs(result: &SuiteResult, out_dir: &Path) -> Result<()> {
    let trials_dir = out_dir.join("trials");
    fs::create_dir_all(&trials_dir).map_err(|e| Error::io(&trials_dir, e))?;
    result.table.write_csv(&out_dir.join("results.csv"))?;
    for r in &result.records {
        let path = trials_dir.join(trial_log_name(r));
        let text = serde_json::to_string_pretty(r).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
