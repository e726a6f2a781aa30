//! Independent reference computations used by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use swp_core::{Matrix, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Within-cluster sum of squares of a labelling, computed from scratch.
pub fn partition_inertia(x: &Matrix, labels: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..k {
        let rows: Vec<usize> = (0..x.nrows()).filter(|&i| labels[i] == c).collect();
        if rows.is_empty() {
            continue;
        }
        for j in 0..x.ncols() {
            let mean = rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / rows.len() as f64;
            total += rows.iter().map(|&i| (x[(i, j)] - mean).powi(2)).sum::<f64>();
        }
    }
    total
}

/// Every split of the rows into two non-empty groups, as label vectors with
/// row 0 always in group 0.
pub fn two_partitions(m: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..(1u32 << (m - 1)) - 1).map(move |bits| {
        (0..m)
            .map(|i| {
                if i == 0 {
                    0
                } else {
                    (((bits + 1) >> (i - 1)) & 1) as usize
                }
            })
            .collect()
    })
}

/// Smallest inertia over all two-group partitions.
pub fn best_two_partition(x: &Matrix) -> (f64, Vec<usize>) {
    two_partitions(x.nrows())
        .map(|l| (partition_inertia(x, &l, 2), l))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

/// Same partition up to relabelling.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Minimum of `½‖y − Xb‖² + λ‖b‖₁` over a square grid for a two-column `X`,
/// evaluated through the Gram matrix.
pub fn lasso_grid_min(x: &Matrix, y: &Vector, lambda: f64, half_width: f64, step: f64) -> (f64, [f64; 2]) {
    assert_eq!(x.ncols(), 2);
    let g = x.transpose() * x;
    let c = x.transpose() * y;
    let yy = y.dot(y);
    let steps = (2.0 * half_width / step).round() as i64;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..=steps {
        let b0 = -half_width + i as f64 * step;
        for j in 0..=steps {
            let b1 = -half_width + j as f64 * step;
            let quad = g[(0, 0)] * b0 * b0 + 2.0 * g[(0, 1)] * b0 * b1 + g[(1, 1)] * b1 * b1;
            let f = 0.5 * (yy - 2.0 * (c[0] * b0 + c[1] * b1) + quad) + lambda * (b0.abs() + b1.abs());
            if f < best.0 {
                best = (f, [b0, b1]);
            }
        }
    }
    best
}

pub fn lasso_objective(x: &Matrix, y: &Vector, b: &Vector, lambda: f64) -> f64 {
    0.5 * (y - x * b).norm_squared() + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Squared error of `predictions` against `truth`, averaged.
pub fn mse(predictions: &Vector, truth: &Vector) -> f64 {
    (predictions - truth).norm_squared() / truth.len() as f64
}
