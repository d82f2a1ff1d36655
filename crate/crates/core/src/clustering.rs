//! Seeded k-means over embedding rows.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::seed;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k_requested: usize,
    pub k_effective: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster id of every embedding row.
    pub assignment: Vec<usize>,
    /// Row nearest each centroid among that cluster's members.
    pub representatives: Vec<usize>,
    /// Rows of each cluster, ascending.
    pub members: Vec<Vec<usize>>,
    /// Lloyd iterations run.
    pub iterations: usize,
    /// Total within-cluster squared distance, first after seeding and then
    /// after every centroid update.
    pub distortion_trace: Vec<f64>,
}

impl Clustering {
    pub fn distortion(&self) -> f64 {
        *self.distortion_trace.last().expect("trace is never empty")
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, sq_dist(point, &centroids[0]));
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn distinct_rows(rows: &[&[f64]]) -> usize {
    let mut sorted: Vec<&[f64]> = rows.to_vec();
    let cmp = |a: &&[f64], b: &&[f64]| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    sorted.sort_by(cmp);
    sorted.dedup_by(|a, b| cmp(a, b).is_eq());
    sorted.len()
}

/// Distance-weighted seeding: the first center is uniform over rows, each
/// further center is drawn with probability proportional to its squared
/// distance from the nearest center chosen so far.
fn seed_centers(rows: &[&[f64]], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![rows[rng.random_range(0..rows.len())].to_vec()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        // k never exceeds the number of distinct rows, so some weight is positive.
        let pick = WeightedIndex::new(&d2)
            .expect("positive weight remains while k <= distinct rows")
            .sample(rng);
        let center = rows[pick].to_vec();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &center));
        }
        centers.push(center);
    }
    centers
}

pub fn kmeans(embedding: &EmbeddingMatrix, k: usize, seed: u64) -> Result<Clustering> {
    let rows: Vec<&[f64]> = embedding.rows().collect();
    kmeans_rows(&rows, k, seed)
}

/// Lloyd's algorithm from distance-weighted seeding. `k` is clipped to the
/// number of distinct rows; iteration stops when assignments stop changing
/// or after [`MAX_ITERATIONS`]; clusters left empty are dropped.
pub fn kmeans_rows(rows: &[&[f64]], k: usize, seed: u64) -> Result<Clustering> {
    if k < 1 {
        return Err(Error::InvalidK);
    }
    if rows.is_empty() {
        return Err(Error::Empty("embedding"));
    }
    let dim = rows[0].len();
    let k_clipped = k.min(distinct_rows(rows));
    let mut rng = seed::rng(seed);
    let mut centroids = seed_centers(rows, k_clipped, &mut rng);

    let assign = |centroids: &[Vec<f64>]| -> Vec<usize> { rows.iter().map(|r| nearest(r, centroids).0).collect() };
    let distortion = |centroids: &[Vec<f64>], assignment: &[usize]| -> f64 {
        rows.iter()
            .zip(assignment)
            .map(|(r, &c)| sq_dist(r, &centroids[c]))
            .sum()
    };

    let mut assignment = assign(&centroids);
    let mut trace = vec![distortion(&centroids, &assignment)];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // Move each centroid to the mean of its members; empty ones stay put.
        let mut sums = vec![vec![0.0; dim]; k_clipped];
        let mut counts = vec![0usize; k_clipped];
        for (r, &c) in rows.iter().zip(&assignment) {
            counts[c] += 1;
            sums[c].iter_mut().zip(r.iter()).for_each(|(s, x)| *s += x);
        }
        for c in 0..k_clipped {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        trace.push(distortion(&centroids, &assignment));

        let next = assign(&centroids);
        if next == assignment {
            break;
        }
        assignment = next;
    }

    // Drop empty clusters, keeping the relative order of the others.
    let mut remap = vec![usize::MAX; k_clipped];
    let mut kept = Vec::new();
    for c in 0..k_clipped {
        if assignment.contains(&c) {
            remap[c] = kept.len();
            kept.push(centroids[c].clone());
        }
    }
    let assignment: Vec<usize> = assignment.iter().map(|&c| remap[c]).collect();
    let mut members = vec![Vec::new(); kept.len()];
    for (row, &c) in assignment.iter().enumerate() {
        members[c].push(row);
    }
    let representatives = members
        .iter()
        .zip(&kept)
        .map(|(m, centroid)| {
            let mut best = m[0];
            let mut best_d = sq_dist(rows[best], centroid);
            for &row in &m[1..] {
                let d = sq_dist(rows[row], centroid);
                if d < best_d {
                    best = row;
                    best_d = d;
                }
            }
            best
        })
        .collect();

    Ok(Clustering {
        k_requested: k,
        k_effective: kept.len(),
        centroids: kept,
        assignment,
        representatives,
        members,
        iterations,
        distortion_trace: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentativeMode {
    /// The member nearest the centroid.
    Center,
    /// Up to `n` distinct members drawn uniformly.
    Sample(usize),
}

/// Policies (embedding rows) whose EFE scores each cluster.
pub fn representative_efe_inputs(
    clustering: &Clustering,
    mode: RepresentativeMode,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    match mode {
        RepresentativeMode::Center => Ok(clustering.representatives.iter().map(|&r| vec![r]).collect()),
        RepresentativeMode::Sample(0) => Err(Error::InvalidSampleCount),
        RepresentativeMode::Sample(n) => {
            let mut rng = seed::rng(seed);
            Ok(clustering
                .members
                .iter()
                .map(|m| {
                    let take = n.min(m.len());
                    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, m.len(), take)
                        .into_iter()
                        .map(|i| m[i])
                        .collect();
                    picked.sort_unstable();
                    picked
                })
                .collect())
        }
    }
}
