//! Mean embeddings, pairwise distance matrices, Frobenius norms and classical
//! multidimensional scaling.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Componentwise average of equally sized vectors.
pub fn mean_embedding<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or(Error::EmptyInput("vectors"))?
        .as_ref();
    let dim = first.len();
    let mut acc = vec![0.0; dim];
    for v in vectors {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Symmetric, zero-diagonal matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates a user-supplied square matrix.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in &rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut asym = 0.0f64;
        for i in 0..n {
            asym = asym.max(data[i * n + i].abs());
            for j in 0..i {
                asym = asym.max((data[i * n + j] - data[j * n + i]).abs());
            }
        }
        if asym > 1e-9 * scale || data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.n.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

impl From<DistanceMatrix> for Vec<Vec<f64>> {
    fn from(d: DistanceMatrix) -> Self {
        d.rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for DistanceMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        DistanceMatrix::from_rows(rows)
    }
}

/// Pairwise Euclidean distances between `points`.
pub fn distance_matrix<V: AsRef<[f64]>>(points: &[V]) -> Result<DistanceMatrix> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyInput("points"));
    }
    let dim = points[0].as_ref().len();
    if let Some(bad) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.as_ref().len(),
        });
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = points[i]
                .as_ref()
                .iter()
                .zip(points[j].as_ref())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, data })
}

pub fn frobenius_norm(d: &DistanceMatrix) -> f64 {
    d.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Low-dimensional coordinates recovered from a distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmdsProjection {
    /// One row per item, `out_dim` columns.
    pub coords: Vec<Vec<f64>>,
    /// Retained eigenvalues, descending, after clipping at zero.
    pub eigenvalues: Vec<f64>,
    /// Smallest eigenvalue of the double-centred matrix.
    pub min_eigenvalue: f64,
    /// A retained eigenvalue was negative and clipped to zero.
    pub clipped: bool,
}

/// Classical MDS: eigendecompose `-1/2 J (D o D) J` and scale the top
/// eigenvectors by the square roots of their eigenvalues. Each eigenvector's
/// sign is fixed so its largest-magnitude entry is positive.
pub fn cmds_project(d: &DistanceMatrix, out_dim: usize) -> Result<CmdsProjection> {
    let m = d.size();
    if m < out_dim + 1 {
        return Err(Error::param(
            "distance matrix",
            format!("{m} items cannot be embedded in {out_dim} dimensions"),
        ));
    }
    let sq = DMatrix::from_fn(m, m, |i, j| d.get(i, j) * d.get(i, j));
    let row_means: Vec<f64> = (0..m).map(|i| sq.row(i).sum() / m as f64).collect();
    let grand = row_means.iter().sum::<f64>() / m as f64;
    let centred = DMatrix::from_fn(m, m, |i, j| {
        -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand)
    });

    let eig = centred.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let min_eigenvalue = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);

    let mut coords = vec![vec![0.0; out_dim]; m];
    let mut eigenvalues = Vec::with_capacity(out_dim);
    let mut clipped = false;
    for (axis, &idx) in order.iter().take(out_dim).enumerate() {
        let mut lambda = eig.eigenvalues[idx];
        if lambda < 0.0 {
            clipped = true;
            lambda = 0.0;
        }
        let v = eig.eigenvectors.column(idx);
        let pivot = (0..m)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let s = lambda.sqrt();
        for i in 0..m {
            coords[i][axis] = sign * v[i] * s;
        }
        eigenvalues.push(lambda);
    }
    Ok(CmdsProjection {
        coords,
        eigenvalues,
        min_eigenvalue,
        clipped,
    })
}
