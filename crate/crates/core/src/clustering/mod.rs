//! k-means with replicated k-means++ starts, soft-constrained k-means,
//! constraint construction from observation masks, and silhouettes.
//!
//! Cluster labels are 0-based.

mod kmeans;
mod missing_scop;
mod silhouette;

pub use kmeans::{kmeans, scop_kmeans, KmeansConfig, ScopConfig};
pub use missing_scop::{missing_scop, missing_scop_constraints, pair_dissimilarity, MissingScopConfig};
pub use silhouette::{silhouette, Silhouette};

use std::io::Write;
use std::path::Path;

use nalgebra::{Dyn, Storage, U1};

use crate::data::Matrix;
use crate::error::{Error, Result};

/// Result of a (possibly constrained) k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// One label in `0..k` per input row.
    pub labels: Vec<usize>,
    /// `k × n` centroid matrix.
    pub centroids: Matrix,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    /// Inertia plus weighted constraint violations (equal to `inertia` when unconstrained).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration of the selected replicate.
    pub objective_trace: Vec<f64>,
    /// Final objective of every replicate, in replicate order.
    pub replicate_objectives: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Clustering {
    /// Builds a clustering from given labels and centroids, computing inertia against `x`.
    pub fn from_parts(labels: Vec<usize>, centroids: Matrix, x: &Matrix) -> Self {
        let inertia = inertia(x, &labels, &centroids);
        Self {
            k: centroids.nrows(),
            labels,
            centroids,
            inertia,
            objective: inertia,
            iterations: 0,
            converged: true,
            objective_trace: vec![inertia],
            replicate_objectives: vec![inertia],
            warnings: Vec::new(),
        }
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Index of the closest centroid by squared distance; ties go to the lowest index.
pub fn nearest_centroid<S>(centroids: &Matrix, point: &nalgebra::Matrix<f64, U1, Dyn, S>) -> usize
where
    S: Storage<f64, U1, Dyn>,
{
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.row_iter().enumerate() {
        let d = (c - point).norm_squared();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

pub(crate) fn inertia(x: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    x.row_iter()
        .zip(labels)
        .map(|(row, &l)| (row - centroids.row(l)).norm_squared())
        .sum()
}

/// Symmetric pairwise soft constraints in `[-1, 1]`. Positive entries favour
/// placing a pair together, negative entries favour separating it. The
/// diagonal is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    s: Matrix,
}

impl ConstraintMatrix {
    pub fn new(s: Matrix) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::validation("constraint matrix must be square"));
        }
        let m = s.nrows();
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let v = s[(i, j)];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::validation(format!(
                        "constraint ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                if v != s[(j, i)] {
                    return Err(Error::validation(format!(
                        "constraint matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { s })
    }

    /// No constraints at all.
    pub fn zeros(m: usize) -> Self {
        Self { s: Matrix::zeros(m, m) }
    }

    pub fn len(&self) -> usize {
        self.s.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.s.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.s
    }

    /// Writes the full matrix as headerless CSV.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for row in self.s.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
