//! Two-component PCA by power iteration with deflation, for visualizing
//! embedding spaces. Never used on the search path.

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// `(x, y)` per embedding row.
    pub coords: Vec<[f64; 2]>,
    /// Unit principal directions in embedding space.
    pub components: [Vec<f64>; 2],
    /// Sample variance of the data along each component.
    pub variances: [f64; 2],
    /// All rows identical: coordinates are all zero.
    pub degenerate: bool,
}

pub fn pca_project(embedding: &EmbeddingMatrix) -> Result<Projection> {
    let rows: Vec<&[f64]> = embedding.rows().collect();
    pca_rows(&rows, embedding.dim())
}

/// Project `rows` (each of length `dim`) onto their top two principal
/// components. Component signs are fixed so the largest-magnitude loading is
/// positive.
pub fn pca_rows(rows: &[&[f64]], dim: usize) -> Result<Projection> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 rows, got {n}")));
    }
    let mean: Vec<f64> = (0..dim)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    if centered.iter().all(|r| r.iter().all(|&x| x == 0.0)) {
        return Ok(Projection {
            coords: vec![[0.0; 2]; n],
            components: [vec![0.0; dim], vec![0.0; dim]],
            variances: [0.0; 2],
            degenerate: true,
        });
    }

    let first = leading_direction(&centered, dim, &[]);
    let second = leading_direction(&centered, dim, std::slice::from_ref(&first));

    let scores = |v: &[f64]| -> Vec<f64> { centered.iter().map(|r| dot(r, v)).collect() };
    let s1 = scores(&first);
    let s2 = scores(&second);
    let variance = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>() / (n - 1) as f64;

    Ok(Projection {
        coords: s1.iter().zip(&s2).map(|(&x, &y)| [x, y]).collect(),
        variances: [variance(&s1), variance(&s2)],
        components: [first, second],
        degenerate: false,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Remove the components of `v` along each (unit) vector in `basis`.
fn deflate(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, bi)| *x -= c * bi);
    }
}

/// `Xᵀ X v` without forming the covariance.
fn gram_apply(x: &[Vec<f64>], v: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for row in x {
        let s = dot(row, v);
        out.iter_mut().zip(row).for_each(|(o, r)| *o += s * r);
    }
    out
}

/// Top eigenvector of `XᵀX` restricted to the complement of `basis`.
/// Returns the zero vector if nothing is left after deflation.
fn leading_direction(x: &[Vec<f64>], dim: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    // Start from the largest remaining row.
    let mut v = x
        .iter()
        .map(|r| {
            let mut r = r.clone();
            deflate(&mut r, basis);
            r
        })
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .unwrap_or_else(|| vec![0.0; dim]);
    let start_norm = norm(&v);
    if start_norm <= 1e-12 {
        return vec![0.0; dim];
    }
    v.iter_mut().for_each(|x| *x /= start_norm);

    for _ in 0..MAX_ITERATIONS {
        let mut next = gram_apply(x, &v, dim);
        deflate(&mut next, basis);
        let len = norm(&next);
        if len <= 1e-300 {
            return vec![0.0; dim];
        }
        next.iter_mut().for_each(|x| *x /= len);
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        v = next;
        if delta < TOLERANCE {
            break;
        }
    }
    fix_sign(&mut v);
    v
}

fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .reduce(|best, x| if x.abs() > best.abs() { x } else { best })
        .unwrap_or(0.0);
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingKind;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn matrix(rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(EmbeddingKind::Boe, rows).unwrap()
    }

    #[test]
    fn planar_data_is_reconstructed() {
        let rows = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.5, -1.5], vec![-0.5, -1.0]];
        let p = pca_project(&matrix(&rows)).unwrap();
        assert!(!p.degenerate);
        for (row, c) in rows.iter().zip(&p.coords) {
            for j in 0..2 {
                let rebuilt = c[0] * p.components[0][j] + c[1] * p.components[1][j];
                assert!((rebuilt - row[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_axis_variance() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 3.0, -1.0]).collect();
        let p = pca_project(&matrix(&rows)).unwrap();
        assert_relative_eq!(p.variances[0], 3.5, max_relative = 1e-12);
        assert_eq!(p.variances[1], 0.0);
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
        assert_eq!(p.components[0], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_rows_are_flagged() {
        let rows = vec![vec![2.0, 2.0]; 4];
        let p = pca_project(&matrix(&rows)).unwrap();
        assert!(p.degenerate);
        assert!(p.coords.iter().all(|c| *c == [0.0, 0.0]));
    }

    #[test]
    fn needs_two_rows() {
        assert!(pca_project(&matrix(&[vec![1.0]])).is_err());
    }

    #[test]
    fn matches_dense_eigensolver() {
        let mut rng = crate::seed::rng(7);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..10)
                .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let p = pca_project(&matrix(&rows)).unwrap();

            let x = nalgebra::DMatrix::from_fn(10, 4, |i, j| rows[i][j]);
            let mean = x.row_mean();
            let centered = nalgebra::DMatrix::from_fn(10, 4, |i, j| x[(i, j)] - mean[j]);
            let cov = centered.transpose() * &centered / 9.0;
            let mut eig: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
            eig.sort_by(|a, b| b.total_cmp(a));
            assert_relative_eq!(p.variances[0], eig[0], max_relative = 1e-8);
            assert_relative_eq!(p.variances[1], eig[1], max_relative = 1e-6);
            assert!(dot(&p.components[0], &p.components[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn signs_are_canonical() {
        let rows = vec![vec![0.0, -3.0], vec![0.0, 3.0], vec![1.0, 0.0], vec![-1.0, 0.0]];
        let p = pca_project(&matrix(&rows)).unwrap();
        for c in &p.components {
            let pivot = c.iter().copied().reduce(|a, b| if b.abs() > a.abs() { b } else { a });
            assert!(pivot.unwrap() > 0.0);
        }
    }
}
