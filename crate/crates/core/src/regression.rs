//! Ordinary, weighted and lasso least squares on fully observed matrices.
//!
//! OLS and WLS form the normal equations and solve them through an SVD of the
//! (weighted) Gram matrix. A singular value counts toward the rank when it
//! exceeds `f64::EPSILON * max(m, n) * sigma_max`. Rank-deficient systems are
//! reported as [`Error::Singular`] unless the pseudo-inverse fallback is
//! enabled. No intercept column is added.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Vector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Ols,
    Wls,
    Lasso,
}

/// Fitted linear model `y ≈ x·b`.
#[derive(Debug, Clone)]
pub struct RegressionModel {
    pub coefficients: Vector,
    pub solver: Solver,
    /// L1 penalty; zero for OLS and WLS.
    pub lambda: f64,
    /// Row weights used by WLS.
    pub weights: Option<Vector>,
    /// Estimated rank of the normal-equation matrix (OLS/WLS).
    pub rank: usize,
    /// Whether the pseudo-inverse fallback produced the coefficients.
    pub pseudo_inverse: bool,
    pub converged: bool,
    pub iterations: usize,
    /// Lasso objective after each coordinate-descent sweep, starting from b = 0.
    pub objective_trace: Vec<f64>,
}

impl RegressionModel {
    fn direct(coefficients: Vector, solver: Solver, rank: usize, pseudo_inverse: bool) -> Self {
        Self {
            coefficients,
            solver,
            lambda: 0.0,
            weights: None,
            rank,
            pseudo_inverse,
            converged: true,
            iterations: 1,
            objective_trace: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Return the minimum-norm solution instead of failing on rank deficiency.
    pub allow_pinv: bool,
}

fn check_system(x: &Matrix, y: &Vector) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::validation("design matrix is empty"));
    }
    if x.nrows() != y.len() {
        return Err(Error::validation(format!(
            "design has {} rows but response has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite value in regression inputs"));
    }
    Ok(())
}

/// Solves the symmetric system `gram · b = rhs` with rank detection.
fn solve_normal(gram: Matrix, rhs: &Vector, max_dim: usize, opts: SolveOptions) -> Result<(Vector, usize)> {
    let n = gram.ncols();
    let svd = gram.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let threshold = f64::EPSILON * max_dim as f64 * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > threshold).count();
    if rank < n && !opts.allow_pinv {
        return Err(Error::Singular { rank, required: n });
    }
    if rank == 0 {
        return Ok((Vector::zeros(n), 0));
    }
    let b = svd
        .solve(rhs, threshold)
        .map_err(|e| Error::validation(format!("svd solve failed: {e}")))?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { rank, required: n });
    }
    Ok((b, rank))
}

/// Least squares through the normal equations `(XᵀX) b = Xᵀy`.
pub fn ols_fit(x: &Matrix, y: &Vector, opts: SolveOptions) -> Result<RegressionModel> {
    check_system(x, y)?;
    let gram = x.tr_mul(x);
    let rhs = x.tr_mul(y);
    let (b, rank) = solve_normal(gram, &rhs, x.nrows().max(x.ncols()), opts)?;
    Ok(RegressionModel::direct(b, Solver::Ols, rank, rank < x.ncols()))
}

/// Weighted least squares `(XᵀWX) b = XᵀWy` with `W = diag(weights)`.
pub fn wls_fit(x: &Matrix, y: &Vector, weights: &Vector, opts: SolveOptions) -> Result<RegressionModel> {
    check_system(x, y)?;
    if weights.len() != x.nrows() {
        return Err(Error::validation("weight vector length differs from row count"));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::validation("weights must be finite and nonnegative"));
    }
    let n = x.ncols();
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive < n && !opts.allow_pinv {
        return Err(Error::Singular {
            rank: positive,
            required: n,
        });
    }

    let mut gram = Matrix::zeros(n, n);
    let mut rhs = Vector::zeros(n);
    for (r, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = x.row(r);
        for a in 0..n {
            let wa = w * row[a];
            rhs[a] += wa * y[r];
            for c in a..n {
                gram[(a, c)] += wa * row[c];
            }
        }
    }
    for a in 0..n {
        for c in 0..a {
            gram[(a, c)] = gram[(c, a)];
        }
    }

    let (b, rank) = solve_normal(gram, &rhs, x.nrows().max(n), opts)?;
    let mut model = RegressionModel::direct(b, Solver::Wls, rank, rank < n);
    model.weights = Some(weights.clone());
    Ok(model)
}

/// `½‖y − Xb‖² + λ‖b‖₁`
pub fn lasso_objective(x: &Matrix, y: &Vector, b: &Vector, lambda: f64) -> f64 {
    let r = y - x * b;
    0.5 * r.norm_squared() + lambda * b.lp_norm(1)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Lasso by cyclic coordinate descent from `b = 0`.
///
/// Stops once a full sweep lowers the objective by less than `tol`. When
/// `max_iter` sweeps run out first, the best iterate is returned with
/// `converged = false`.
pub fn lasso_fit(x: &Matrix, y: &Vector, lambda: f64, tol: f64, max_iter: usize) -> Result<RegressionModel> {
    check_system(x, y)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::validation(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::validation("max_iter must be at least 1"));
    }
    let n = x.ncols();
    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();

    let mut b = Vector::zeros(n);
    let mut residual = y.clone();
    let mut objective = 0.5 * residual.norm_squared();
    let mut trace = vec![objective];
    let mut best = (objective, b.clone());
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                b[j] = 0.0;
                continue;
            }
            let col = x.column(j);
            let rho = col.dot(&residual) + col_sq[j] * b[j];
            let updated = soft_threshold(rho, lambda) / col_sq[j];
            let delta = updated - b[j];
            if delta != 0.0 {
                residual.axpy(-delta, &col, 1.0);
                b[j] = updated;
            }
        }
        // refresh to keep rounding from accumulating in the residual
        residual = y - x * &b;
        let next = 0.5 * residual.norm_squared() + lambda * b.lp_norm(1);
        trace.push(next);
        if next < best.0 {
            best = (next, b.clone());
        }
        let decrease = objective - next;
        objective = next;
        if decrease < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("lasso did not converge in {max_iter} sweeps (lambda = {lambda})");
    }

    Ok(RegressionModel {
        coefficients: best.1,
        solver: Solver::Lasso,
        lambda,
        weights: None,
        rank: n,
        pseudo_inverse: false,
        converged,
        iterations,
        objective_trace: trace,
    })
}

/// `x · b`
pub fn predict(model: &RegressionModel, x: &Matrix) -> Result<Vector> {
    if x.ncols() != model.n_features() {
        return Err(Error::validation(format!(
            "model has {} coefficients but input has {} columns",
            model.n_features(),
            x.ncols()
        )));
    }
    Ok(x * &model.coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = seeded(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn ols_line_through_origin() {
        let x = Matrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let y = Vector::from_vec(vec![2.0, 4.0]);
        let m = ols_fit(&x, &y, SolveOptions::default()).unwrap();
        assert_relative_eq!(m.coefficients[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn ols_identity_design() {
        let x = Matrix::identity(4, 4);
        let y = Vector::from_vec(vec![1.5, -2.0, 0.25, 8.0]);
        let m = ols_fit(&x, &y, SolveOptions::default()).unwrap();
        assert_relative_eq!(m.coefficients, y, epsilon = 1e-14);
    }

    #[test]
    fn ols_recovers_noiseless_coefficients() {
        let x = random_matrix(50, 5, 1);
        let beta = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0, -0.75]);
        let y = &x * &beta;
        let m = ols_fit(&x, &y, SolveOptions::default()).unwrap();
        assert!((&m.coefficients - &beta).amax() < 1e-10);

        let gram = x.tr_mul(&x);
        let rhs = x.tr_mul(&y);
        let residual = &rhs - &gram * &m.coefficients;
        assert!(residual.norm() <= 1e-12 * rhs.norm());
    }

    #[test]
    fn ols_reports_rank_deficiency() {
        let x = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        match ols_fit(&x, &y, SolveOptions::default()) {
            Err(Error::Singular { rank, required }) => {
                assert_eq!(rank, 1);
                assert_eq!(required, 2);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
        let m = ols_fit(&x, &y, SolveOptions { allow_pinv: true }).unwrap();
        assert!(m.pseudo_inverse);
        // minimum-norm solution of b1 + 2 b2 = 1
        assert_relative_eq!(m.coefficients[0], 0.2, epsilon = 1e-12);
        assert_relative_eq!(m.coefficients[1], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn wls_identity_weights_match_ols() {
        let x = random_matrix(30, 4, 2);
        let y = random_matrix(30, 1, 3).column(0).into_owned();
        let ols = ols_fit(&x, &y, SolveOptions::default()).unwrap();
        let wls = wls_fit(&x, &y, &Vector::from_element(30, 1.0), SolveOptions::default()).unwrap();
        let rel = (&ols.coefficients - &wls.coefficients).norm() / ols.coefficients.norm();
        assert!(rel <= 1e-12, "relative difference {rel}");
    }

    #[test]
    fn wls_interpolates_selected_rows() {
        // consistent on rows 0 and 3 only
        let x = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 2.0, 5.0, 0.0, 1.0]);
        let y = Vector::from_vec(vec![3.0, 100.0, -40.0, -2.0]);
        let w = Vector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        let m = wls_fit(&x, &y, &w, SolveOptions::default()).unwrap();
        assert_relative_eq!(m.coefficients[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(m.coefficients[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn wls_matches_row_scaled_ols() {
        let x = random_matrix(40, 3, 4);
        let y = random_matrix(40, 1, 5).column(0).into_owned();
        let mut rng = seeded(6);
        let unif = Uniform::new(0.05, 3.0).unwrap();
        let w = Vector::from_fn(40, |_, _| unif.sample(&mut rng));

        let mut xs = x.clone();
        let mut ys = y.clone();
        for r in 0..40 {
            let s = w[r].sqrt();
            xs.row_mut(r).scale_mut(s);
            ys[r] *= s;
        }
        let oracle = ols_fit(&xs, &ys, SolveOptions::default()).unwrap();
        let m = wls_fit(&x, &y, &w, SolveOptions::default()).unwrap();
        assert!((&m.coefficients - &oracle.coefficients).amax() < 1e-10);
    }

    #[test]
    fn wls_too_few_positive_weights() {
        let x = random_matrix(5, 3, 7);
        let y = Vector::zeros(5);
        let w = Vector::from_vec(vec![1.0, 0.0, 0.0, 2.0, 0.0]);
        assert!(matches!(
            wls_fit(&x, &y, &w, SolveOptions::default()),
            Err(Error::Singular { rank: 2, required: 3 })
        ));
    }

    #[test]
    fn wls_rejects_negative_weight() {
        let x = random_matrix(3, 1, 8);
        let y = Vector::zeros(3);
        let w = Vector::from_vec(vec![1.0, -1.0, 1.0]);
        assert!(matches!(
            wls_fit(&x, &y, &w, SolveOptions::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn lasso_zero_penalty_is_ols() {
        let x = random_matrix(50, 5, 9);
        let y = random_matrix(50, 1, 10).column(0).into_owned();
        let ols = ols_fit(&x, &y, SolveOptions::default()).unwrap();
        let lasso = lasso_fit(&x, &y, 0.0, 1e-14, 100_000).unwrap();
        assert!(lasso.converged);
        assert!((&ols.coefficients - &lasso.coefficients).amax() < 1e-6);
    }

    #[test]
    fn lasso_large_penalty_kills_everything() {
        let x = random_matrix(20, 4, 11);
        let y = random_matrix(20, 1, 12).column(0).into_owned();
        let lambda = x.tr_mul(&y).amax();
        let m = lasso_fit(&x, &y, lambda, 1e-12, 100).unwrap();
        assert!(m.coefficients.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn lasso_objective_nonincreasing() {
        let x = random_matrix(30, 6, 13);
        let y = random_matrix(30, 1, 14).column(0).into_owned();
        for lambda in [0.0, 0.5, 2.0, 10.0] {
            let m = lasso_fit(&x, &y, lambda, 1e-12, 10_000).unwrap();
            for pair in m.objective_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs(), "{pair:?}");
            }
        }
    }

    #[test]
    fn lasso_reports_non_convergence() {
        let x = random_matrix(30, 6, 15);
        let y = random_matrix(30, 1, 16).column(0).into_owned();
        let m = lasso_fit(&x, &y, 0.01, 0.0, 2).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
        let last = *m.objective_trace.last().unwrap();
        assert!(lasso_objective(&x, &y, &m.coefficients, 0.01) <= last + 1e-12);
    }

    #[test]
    fn lasso_rejects_negative_lambda() {
        let x = random_matrix(3, 1, 17);
        assert!(lasso_fit(&x, &Vector::zeros(3), -1.0, 1e-6, 10).is_err());
    }

    #[test]
    fn predict_scalar_and_zero() {
        let m = RegressionModel::direct(Vector::from_vec(vec![2.0]), Solver::Ols, 1, false);
        let p = predict(&m, &Matrix::from_element(1, 1, 3.0)).unwrap();
        assert_eq!(p[0], 6.0);
        let m3 = RegressionModel::direct(Vector::from_vec(vec![1.0, -4.0, 2.5]), Solver::Ols, 3, false);
        assert!(predict(&m3, &Matrix::zeros(4, 3)).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(predict(&m3, &Matrix::zeros(4, 2)), Err(Error::Validation(_))));
    }

    #[test]
    fn predict_reproduces_noiseless_training_response() {
        let x = random_matrix(25, 3, 18);
        let y = &x * Vector::from_vec(vec![0.3, -1.2, 2.0]);
        let m = ols_fit(&x, &y, SolveOptions::default()).unwrap();
        assert!((predict(&m, &x).unwrap() - &y).amax() < 1e-8);
    }
}
