//! Matrix completion by column means and by soft-impute.
//!
//! Soft-impute repeatedly fills the hidden entries with the current estimate
//! and shrinks the singular values of the filled matrix by `lambda`:
//!
//! ```text
//! Z_{t+1} = S_λ(P_obs(X) + P_miss(Z_t)),   S_λ(A) = U (Σ − λI)₊ Vᵀ
//! ```
//!
//! starting from the column-mean fill (or a previous solution along a
//! penalty path). Each step does not increase
//! `½‖P_obs(X − Z)‖²_F + λ‖Z‖_*`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{MaskedMatrix, Matrix};
use crate::error::{Error, Result};

/// Replaces hidden entries by their column's observed mean. A column with no
/// observed entries falls back to the mean of all observed entries.
pub fn mean_impute(x: &MaskedMatrix) -> Matrix {
    let (m, n) = (x.nrows(), x.ncols());
    let mut total = 0.0;
    let mut count = 0usize;
    let mut col_means = vec![None; n];
    for (j, mean) in col_means.iter_mut().enumerate() {
        let observed: Vec<f64> = (0..m).filter_map(|i| x.get(i, j)).collect();
        if !observed.is_empty() {
            let sum: f64 = observed.iter().sum();
            total += sum;
            count += observed.len();
            *mean = Some(sum / observed.len() as f64);
        }
    }
    // every row has an observed entry, so count > 0
    let global = total / count as f64;
    let mut out = x.zero_filled().clone();
    for j in 0..n {
        let fill = col_means[j].unwrap_or(global);
        for i in 0..m {
            if !x.is_observed(i, j) {
                out[(i, j)] = fill;
            }
        }
    }
    out
}

pub fn nuclear_norm(x: &Matrix) -> f64 {
    x.singular_values().sum()
}

fn shrink(x: Matrix, lambda: f64, rank_cap: Option<usize>) -> (Matrix, f64) {
    let svd = x.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut sigma = svd.singular_values.map(|s| (s - lambda).max(0.0));
    if let Some(cap) = rank_cap {
        // singular values come sorted in descending order
        for s in sigma.iter_mut().skip(cap) {
            *s = 0.0;
        }
    }
    let nuclear = sigma.sum();
    let mut scaled_u = u;
    for (c, s) in sigma.iter().enumerate() {
        scaled_u.column_mut(c).scale_mut(*s);
    }
    (scaled_u * v_t, nuclear)
}

/// `U · diag(max(σᵢ − λ, 0)) · Vᵀ` for the SVD `x = U Σ Vᵀ`.
pub fn svd_soft_threshold(x: &Matrix, lambda: f64) -> Result<Matrix> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::validation(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(shrink(x.clone(), lambda, None).0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftImputeConfig {
    /// Nuclear-norm penalty.
    pub lambda: f64,
    /// Stop when `‖Z_t − Z_{t−1}‖_F / max(‖Z_{t−1}‖_F, 1)` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep at most this many singular values per step.
    pub rank_cap: Option<usize>,
}

impl Default for SoftImputeConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            tol: 1e-5,
            max_iter: 300,
            rank_cap: None,
        }
    }
}

impl SoftImputeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::validation("lambda must be finite and nonnegative"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("max_iter must be at least 1"));
        }
        if self.rank_cap == Some(0) {
            return Err(Error::validation("rank_cap must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SoftImputeResult {
    pub completed: Matrix,
    pub converged: bool,
    pub iterations: usize,
    /// Objective at the mean-imputed start followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    /// `‖P_obs(X − Z)‖_F` at the returned estimate.
    pub observed_residual: f64,
}

fn observed_residual_sq(x: &MaskedMatrix, z: &Matrix) -> f64 {
    let mut total = 0.0;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if let Some(v) = x.get(i, j) {
                let d = v - z[(i, j)];
                total += d * d;
            }
        }
    }
    total
}

/// Soft-impute matrix completion. Observed entries of the result are the
/// low-rank estimate, not the original data.
pub fn soft_impute(x: &MaskedMatrix, cfg: &SoftImputeConfig) -> Result<SoftImputeResult> {
    cfg.validate()?;
    Ok(iterate(x, mean_impute(x), cfg))
}

/// Soft-impute over a sequence of penalties, each run warm-started from the
/// previous solution. `cfg.lambda` is ignored.
///
/// Small penalties converge very slowly from the mean fill; walking down a
/// decreasing path reaches them in far fewer iterations.
pub fn soft_impute_path(x: &MaskedMatrix, lambdas: &[f64], cfg: &SoftImputeConfig) -> Result<Vec<SoftImputeResult>> {
    let mut z = mean_impute(x);
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let step = SoftImputeConfig { lambda, ..cfg.clone() };
        step.validate()?;
        let res = iterate(x, z, &step);
        z = res.completed.clone();
        out.push(res);
    }
    Ok(out)
}

fn iterate(x: &MaskedMatrix, mut z: Matrix, cfg: &SoftImputeConfig) -> SoftImputeResult {
    let mut trace = vec![0.5 * observed_residual_sq(x, &z) + cfg.lambda * nuclear_norm(&z)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let mut filled = z.clone();
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                if let Some(v) = x.get(i, j) {
                    filled[(i, j)] = v;
                }
            }
        }
        let (next, nuclear) = shrink(filled, cfg.lambda, cfg.rank_cap);
        let change = (&next - &z).norm() / z.norm().max(1.0);
        trace.push(0.5 * observed_residual_sq(x, &next) + cfg.lambda * nuclear);
        z = next;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(
            "soft-impute stopped after {} iterations without converging",
            cfg.max_iter
        );
    }
    let observed_residual = observed_residual_sq(x, &z).sqrt();
    SoftImputeResult {
        completed: z,
        converged,
        iterations,
        objective_trace: trace,
        observed_residual,
    }
}
