//! Soft weighted prediction on fully observed data, plus the hard-clustering
//! and k-nearest-neighbour baselines it is compared against.
//!
//! For every test row, each training row `j` gets the weight
//!
//! ```text
//! diff(j)   = ‖x_test − x_train(j)‖²
//! weight(j) = exp(−(diff(j) / max(min diff, ε)) / 2^w)
//! ```
//!
//! and the prediction is `x_test · b` where `b` is the weighted least-squares
//! fit under those weights. Large `w` flattens the weights towards 1 and the
//! prediction towards plain OLS.

use nalgebra::{Dyn, Storage, U1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{nearest_centroid, Clustering};
use crate::data::{Dataset, Matrix, Vector};
use crate::error::{Error, Result};
use crate::regression::{ols_fit, wls_fit, SolveOptions};

/// Guard against division by a zero nearest distance.
pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwpConfig {
    /// Weight tuning parameter; the distance ratio is divided by `2^w`.
    pub w: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub solve: SolveOptions,
}

impl SwpConfig {
    pub fn new(w: f64) -> Self {
        Self {
            w,
            epsilon: DEFAULT_EPSILON,
            solve: SolveOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::validation("epsilon must be positive"));
        }
        if self.w.is_nan() {
            return Err(Error::validation("w must not be NaN"));
        }
        Ok(())
    }
}

/// Squared Euclidean distance from `point` to every row of `x`.
pub fn squared_distances<S>(x: &Matrix, point: &nalgebra::Matrix<f64, U1, Dyn, S>) -> Vector
where
    S: Storage<f64, U1, Dyn>,
{
    Vector::from_iterator(x.nrows(), x.row_iter().map(|row| (row - point).norm_squared()))
}

/// Diagonal of the SWP weight matrix for one test point.
///
/// The nearest row has normalized distance 1 (weight `exp(−1/2^w)`), except
/// for exact matches which normalize to 0 and get weight 1. Entries may
/// underflow to 0 for very distant rows at small `w`.
pub fn swp_weights<S>(
    x_train: &Matrix,
    test_point: &nalgebra::Matrix<f64, U1, Dyn, S>,
    cfg: &SwpConfig,
) -> Result<Vector>
where
    S: Storage<f64, U1, Dyn>,
{
    cfg.validate()?;
    if x_train.nrows() == 0 {
        return Err(Error::validation("training set is empty"));
    }
    if test_point.ncols() != x_train.ncols() {
        return Err(Error::validation("test point dimension differs from training data"));
    }
    let diff = squared_distances(x_train, test_point);
    let scale = diff.min().max(cfg.epsilon);
    let bandwidth = cfg.w.exp2();
    Ok(diff.map(|d| (-(d / scale) / bandwidth).exp()))
}

/// SWP predictions for every row of `x_test`. Rows are solved in parallel;
/// output order follows `x_test`.
pub fn swp_predict_matrices(x_train: &Matrix, y_train: &Vector, x_test: &Matrix, cfg: &SwpConfig) -> Result<Vector> {
    cfg.validate()?;
    let preds = (0..x_test.nrows())
        .into_par_iter()
        .map(|i| {
            let row = x_test.row(i);
            let w = swp_weights(x_train, &row, cfg)?;
            let model = wls_fit(x_train, y_train, &w, cfg.solve)?;
            Ok(row.dot(&model.coefficients.transpose()))
        })
        .enumerate()
        .map(|(i, r): (usize, Result<f64>)| r.map_err(|e| e.at_test_row(i)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Vector::from_vec(preds))
}

pub fn swp_predict(ds: &Dataset, cfg: &SwpConfig) -> Result<Vector> {
    let x_train = ds.x_train.complete()?;
    let x_test = ds.x_test.complete()?;
    swp_predict_matrices(x_train, &ds.y_train, x_test, cfg)
}

/// Hard-clustering baseline: each test row is routed to its nearest centroid
/// and predicted by an OLS fit on that cluster's training rows only.
pub fn cluster_predict(ds: &Dataset, clustering: &Clustering, opts: SolveOptions) -> Result<Vector> {
    let x_train = ds.x_train.complete()?;
    let x_test = ds.x_test.complete()?;
    if clustering.labels.len() != x_train.nrows() {
        return Err(Error::validation("clustering labels do not match training rows"));
    }
    if clustering.centroids.ncols() != x_test.ncols() {
        return Err(Error::validation("centroid dimension differs from test data"));
    }
    let assigned: Vec<usize> = x_test
        .row_iter()
        .map(|row| nearest_centroid(&clustering.centroids, &row))
        .collect();

    let mut needed = assigned.clone();
    needed.sort_unstable();
    needed.dedup();
    let mut coefficients = vec![None; clustering.k];
    for &c in &needed {
        let rows: Vec<usize> = (0..x_train.nrows()).filter(|&r| clustering.labels[r] == c).collect();
        if rows.is_empty() {
            return Err(Error::validation("cluster has no training rows").in_cluster(c));
        }
        let model =
            ols_fit(&x_train.select_rows(&rows), &ds.y_train.select_rows(&rows), opts).map_err(|e| e.in_cluster(c))?;
        coefficients[c] = Some(model.coefficients);
    }

    let preds = assigned.iter().enumerate().map(|(i, &c)| {
        let b = coefficients[c].as_ref().expect("fitted above");
        x_test.row(i).dot(&b.transpose())
    });
    Ok(Vector::from_iterator(x_test.nrows(), preds))
}

/// k-mapping baseline: mean response of the `k` nearest training rows.
/// Distance ties go to the lower row index.
pub fn knn_predict(ds: &Dataset, k: usize) -> Result<Vector> {
    let x_train = ds.x_train.complete()?;
    let x_test = ds.x_test.complete()?;
    let m = x_train.nrows();
    if k == 0 || k > m {
        return Err(Error::validation(format!("k must lie in [1, {m}], got {k}")));
    }
    let preds = x_test.row_iter().map(|row| {
        let d = squared_distances(x_train, &row);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        order[..k].iter().map(|&r| ds.y_train[r]).sum::<f64>() / k as f64
    });
    Ok(Vector::from_iterator(x_test.nrows(), preds))
}
