//! Soft weighted prediction when the training features have missing entries.
//!
//! The training rows are clustered with [`missing_scop`]. Each test row gets a
//! membership score per centroid,
//!
//! ```text
//! u(i, j) = max(min_j' d²(x_i, c_j'), ε) / max(d²(x_i, c_j), ε)
//! ```
//!
//! so its nearest centroid scores 1. Training rows in cluster `j` then share
//! the weight `exp(−(1 / u(i, j)) / 2^w)` in a weighted least-squares fit on
//! the completed training matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{missing_scop, Clustering, MissingScopConfig};
use crate::data::{Dataset, MaskedMatrix, Matrix, Vector};
use crate::error::{Error, Result};
use crate::imputation::{mean_impute, soft_impute, SoftImputeConfig};
use crate::regression::{wls_fit, SolveOptions};
use crate::swp::DEFAULT_EPSILON;

/// Test-row × centroid membership scores in `(0, 1]`, row maximum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub u: Matrix,
}

fn membership_row(x: &MaskedMatrix, i: usize, centroids: &Matrix, epsilon: f64) -> Vec<f64> {
    // distances over the row's observed features only; the ratio below is
    // unaffected by how many features that is
    let d: Vec<f64> = centroids
        .row_iter()
        .map(|c| {
            (0..x.ncols())
                .filter_map(|f| x.get(i, f).map(|v| (v - c[f]) * (v - c[f])))
                .sum::<f64>()
        })
        .collect();
    let nearest = d.iter().copied().fold(f64::INFINITY, f64::min).max(epsilon);
    d.iter().map(|&dj| nearest / dj.max(epsilon)).collect()
}

fn check_centroids(n: usize, centroids: &Matrix, epsilon: f64) -> Result<()> {
    if centroids.nrows() == 0 {
        return Err(Error::validation("need at least one centroid"));
    }
    if centroids.ncols() != n {
        return Err(Error::validation("centroid dimension differs from test data"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::validation("epsilon must be positive"));
    }
    Ok(())
}

pub fn membership(x_test: &Matrix, centroids: &Matrix, epsilon: f64) -> Result<Membership> {
    membership_masked(&MaskedMatrix::fully_observed(x_test.clone())?, centroids, epsilon)
}

/// Membership for test rows that may have hidden entries; distances use the
/// observed features of each row.
pub fn membership_masked(x_test: &MaskedMatrix, centroids: &Matrix, epsilon: f64) -> Result<Membership> {
    check_centroids(x_test.ncols(), centroids, epsilon)?;
    let k = centroids.nrows();
    let mut u = Matrix::zeros(x_test.nrows(), k);
    for i in 0..x_test.nrows() {
        for (j, v) in membership_row(x_test, i, centroids, epsilon).into_iter().enumerate() {
            u[(i, j)] = v;
        }
    }
    Ok(Membership { u })
}

/// Per-training-row weights for one test row: row `r` gets
/// `exp(−(1 / u_row[labels[r]]) / 2^w)`.
pub fn cluster_weights(u_row: &[f64], labels: &[usize], w: f64) -> Result<Vector> {
    if u_row.iter().any(|&u| !(u > 0.0)) {
        return Err(Error::validation("membership entries must be positive"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= u_row.len()) {
        return Err(Error::validation(format!("label {bad} has no membership entry")));
    }
    let bandwidth = w.exp2();
    let per_cluster: Vec<f64> = u_row.iter().map(|&u| (-(1.0 / u) / bandwidth).exp()).collect();
    Ok(Vector::from_iterator(
        labels.len(),
        labels.iter().map(|&l| per_cluster[l]),
    ))
}

/// How hidden training entries are filled before the weighted fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    Mean,
    SoftImpute(SoftImputeConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissingSwpConfig {
    pub cluster: MissingScopConfig,
    /// Weight tuning parameter of the per-cluster filter.
    pub w_swp: f64,
    pub completion: Completion,
    pub epsilon: f64,
    pub solve: SolveOptions,
}

impl Default for MissingSwpConfig {
    fn default() -> Self {
        Self {
            cluster: MissingScopConfig::default(),
            w_swp: 0.0,
            completion: Completion::Mean,
            epsilon: DEFAULT_EPSILON,
            solve: SolveOptions::default(),
        }
    }
}

/// Fills hidden entries; observed entries keep their original values.
pub fn complete(x: &MaskedMatrix, completion: &Completion) -> Result<Matrix> {
    match completion {
        Completion::Mean => Ok(mean_impute(x)),
        Completion::SoftImpute(cfg) => {
            let z = soft_impute(x, cfg)?.completed;
            let mut out = x.zero_filled().clone();
            for j in 0..x.ncols() {
                for i in 0..x.nrows() {
                    if !x.is_observed(i, j) {
                        out[(i, j)] = z[(i, j)];
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Full pipeline: cluster the incomplete training rows, complete them, then
/// fit one weighted model per test row.
pub fn missing_swp_predict(ds: &Dataset, cfg: &MissingSwpConfig) -> Result<Vector> {
    let clustering = missing_scop(&ds.x_train, &cfg.cluster).map_err(|e| e.in_stage("clustering"))?;
    missing_swp_predict_with(ds, &clustering, cfg)
}

/// Completion and prediction stages for a given clustering of the training rows.
///
/// Hidden test entries, if any, are filled with the completed training
/// column means for the final product.
pub fn missing_swp_predict_with(ds: &Dataset, clustering: &Clustering, cfg: &MissingSwpConfig) -> Result<Vector> {
    if clustering.labels.len() != ds.x_train.nrows() {
        return Err(Error::validation("clustering labels do not match training rows"));
    }
    check_centroids(ds.n_features(), &clustering.centroids, cfg.epsilon)?;
    let x_train = complete(&ds.x_train, &cfg.completion).map_err(|e| e.in_stage("completion"))?;
    let col_means = x_train.row_mean();

    let preds = (0..ds.x_test.nrows())
        .into_par_iter()
        .map(|i| {
            let u = membership_row(&ds.x_test, i, &clustering.centroids, cfg.epsilon);
            let w = cluster_weights(&u, &clustering.labels, cfg.w_swp)?;
            let model = wls_fit(&x_train, &ds.y_train, &w, cfg.solve)?;
            let row = Vector::from_iterator(
                ds.n_features(),
                (0..ds.n_features()).map(|f| ds.x_test.get(i, f).unwrap_or(col_means[f])),
            );
            Ok(row.dot(&model.coefficients))
        })
        .enumerate()
        .map(|(i, r): (usize, Result<f64>)| r.map_err(|e| e.at_test_row(i).in_stage("prediction")))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Vector::from_vec(preds))
}
