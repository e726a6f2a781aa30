use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{inertia, nearest_centroid, Clustering, ConstraintMatrix};
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KmeansConfig {
    pub k: usize,
    /// Independent k-means++ restarts; the lowest objective wins.
    pub replicates: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Stop once no centroid moves by more than this (squared distance).
    pub tol: f64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            k: 2,
            replicates: 10,
            max_iter: 300,
            seed: 0,
            tol: 1e-10,
        }
    }
}

impl KmeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(Error::validation("replicates must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::validation("tol must be nonnegative"));
        }
        if m < self.k {
            return Err(Error::validation(format!("need at least k = {} rows, got {m}", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScopConfig {
    pub base: KmeansConfig,
    /// Cost of a fully violated constraint. `None` derives it from the data:
    /// `penalty_weight` times the mean pairwise squared distance divided by
    /// `m − 1`, so a point violating all its constraints at full strength
    /// pays about one typical squared distance per unit weight.
    pub penalty_scale: Option<f64>,
    /// Multiplier on the data-derived scale; unused when `penalty_scale` is set.
    pub penalty_weight: f64,
}

impl Default for ScopConfig {
    fn default() -> Self {
        Self {
            base: KmeansConfig::default(),
            penalty_scale: None,
            penalty_weight: 1.0,
        }
    }
}

struct Penalty<'a> {
    s: &'a ConstraintMatrix,
    scale: f64,
}

impl Penalty<'_> {
    /// Sum of violated constraint strengths over unordered pairs, times the scale.
    fn cost(&self, labels: &[usize]) -> f64 {
        let m = labels.len();
        let mut total = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let s = self.s.get(i, j);
                let same = labels[i] == labels[j];
                if s > 0.0 && !same {
                    total += s;
                } else if s < 0.0 && same {
                    total -= s;
                }
            }
        }
        self.scale * total
    }
}

struct Replicate {
    labels: Vec<usize>,
    centroids: Matrix,
    inertia: f64,
    objective: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

const UNASSIGNED: usize = usize::MAX;

fn sq_dist(x: &Matrix, i: usize, centroids: &Matrix, j: usize) -> f64 {
    (centroids.row(j) - x.row(i)).norm_squared()
}

/// k-means++ seeding. When every remaining point coincides with a chosen
/// center, the lowest unchosen index is taken.
fn plus_plus(x: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let m = x.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..m));
    let mut d2: Vec<f64> = (0..m).map(|i| (x.row(i) - x.row(chosen[0])).norm_squared()).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just above the running sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            (0..m).find(|i| !chosen.contains(i)).expect("m >= k")
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min((x.row(i) - x.row(next)).norm_squared());
        }
    }
    x.select_rows(&chosen)
}

fn assign_unconstrained(x: &Matrix, centroids: &Matrix, labels: &mut [usize]) {
    for (i, l) in labels.iter_mut().enumerate() {
        *l = nearest_centroid(centroids, &x.row(i));
    }
}

/// Sequential assignment in row order: each point takes the cluster that
/// minimizes its squared distance plus the penalty of constraints it would
/// violate against already-labelled points.
fn assign_constrained(x: &Matrix, centroids: &Matrix, labels: &mut [usize], penalty: &Penalty) {
    let m = x.nrows();
    let k = centroids.nrows();
    let mut together = vec![0.0; k];
    let mut apart = vec![0.0; k];
    for i in 0..m {
        together.iter_mut().for_each(|v| *v = 0.0);
        apart.iter_mut().for_each(|v| *v = 0.0);
        let mut together_total = 0.0;
        for (other, &l) in labels.iter().enumerate() {
            if other == i || l == UNASSIGNED {
                continue;
            }
            let s = penalty.s.get(i, other);
            if s > 0.0 {
                together[l] += s;
                together_total += s;
            } else if s < 0.0 {
                apart[l] -= s;
            }
        }
        let mut best = 0;
        let mut best_cost = f64::INFINITY;
        for j in 0..k {
            let cost = sq_dist(x, i, centroids, j) + penalty.scale * (together_total - together[j] + apart[j]);
            if cost < best_cost {
                best_cost = cost;
                best = j;
            }
        }
        labels[i] = best;
    }
}

/// Moves the point farthest from its centroid into each empty cluster.
fn fill_empty_clusters(x: &Matrix, centroids: &mut Matrix, labels: &mut [usize]) {
    let k = centroids.nrows();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = f64::NEG_INFINITY;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let d = sq_dist(x, i, centroids, l);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("m >= k leaves a cluster with two points");
        sizes[labels[i]] -= 1;
        sizes[c] = 1;
        labels[i] = c;
        centroids.row_mut(c).copy_from(&x.row(i));
    }
}

fn update_centroids(x: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let mut sums = Matrix::zeros(k, x.ncols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        sums.row_mut(l).zip_apply(&x.row(i), |a, b| *a += b);
        counts[l] += 1;
    }
    for (c, &n) in counts.iter().enumerate() {
        sums.row_mut(c).unscale_mut(n as f64);
    }
    sums
}

fn run_replicate(x: &Matrix, cfg: &KmeansConfig, penalty: Option<&Penalty>, rng: &mut Rng) -> Replicate {
    let k = cfg.k;
    let mut centroids = plus_plus(x, k, rng);
    let mut labels = vec![UNASSIGNED; x.nrows()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let previous = labels.clone();
        match penalty {
            None => assign_unconstrained(x, &centroids, &mut labels),
            Some(p) => assign_constrained(x, &centroids, &mut labels, p),
        }
        fill_empty_clusters(x, &mut centroids, &mut labels);
        let updated = update_centroids(x, &labels, k);
        let shift = (0..k)
            .map(|c| (updated.row(c) - centroids.row(c)).norm_squared())
            .fold(0.0, f64::max);
        centroids = updated;

        let inertia = inertia(x, &labels, &centroids);
        trace.push(inertia + penalty.map_or(0.0, |p| p.cost(&labels)));
        if labels == previous || shift <= cfg.tol {
            converged = true;
            break;
        }
    }

    let inertia = inertia(x, &labels, &centroids);
    let objective = inertia + penalty.map_or(0.0, |p| p.cost(&labels));
    Replicate {
        labels,
        centroids,
        inertia,
        objective,
        iterations,
        converged,
        trace,
    }
}

fn run(x: &Matrix, cfg: &KmeansConfig, penalty: Option<&Penalty>) -> Result<Clustering> {
    cfg.validate(x.nrows())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite value in clustering input"));
    }
    let replicates: Vec<Replicate> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(x, cfg, penalty, &mut seeded(derive_seed(cfg.seed, r as u64))))
        .collect();

    let replicate_objectives: Vec<f64> = replicates.iter().map(|r| r.objective).collect();
    let mut best_index = 0;
    for (r, &obj) in replicate_objectives.iter().enumerate() {
        if obj < replicate_objectives[best_index] {
            best_index = r;
        }
    }
    let best = replicates.into_iter().nth(best_index).expect("replicates >= 1");
    let mut warnings = Vec::new();
    if !best.converged {
        warnings.push(format!(
            "k-means stopped at max_iter = {} before converging",
            cfg.max_iter
        ));
    }
    Ok(Clustering {
        k: cfg.k,
        labels: best.labels,
        centroids: best.centroids,
        inertia: best.inertia,
        objective: best.objective,
        iterations: best.iterations,
        converged: best.converged,
        objective_trace: best.trace,
        replicate_objectives,
        warnings,
    })
}

/// Lloyd's algorithm with squared Euclidean distance, best of
/// `cfg.replicates` k-means++ starts. Empty clusters are re-seeded with the
/// point farthest from its own centroid (lowest index on ties).
pub fn kmeans(x: &Matrix, cfg: &KmeansConfig) -> Result<Clustering> {
    run(x, cfg, None)
}

/// Mean pairwise squared distance over `m − 1`, the number of constraints
/// each point carries.
pub fn default_penalty_scale(x: &Matrix) -> f64 {
    if x.nrows() < 2 {
        return 0.0;
    }
    mean_pairwise_sq_distance(x) / (x.nrows() - 1) as f64
}

/// Mean squared Euclidean distance over unordered pairs of rows.
pub(crate) fn mean_pairwise_sq_distance(x: &Matrix) -> f64 {
    let m = x.nrows();
    if m < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            total += (x.row(i) - x.row(j)).norm_squared();
        }
    }
    total / (m * (m - 1) / 2) as f64
}

/// k-means with soft pairwise constraints.
///
/// The assignment step visits rows in order and places row `i` in the cluster
/// `c` minimizing
///
/// ```text
/// ‖x_i − c‖² + scale · ( Σ_{s(i,i') > 0, label(i') ≠ c} s(i,i')
///                      + Σ_{s(i,i') < 0, label(i') = c} |s(i,i')| )
/// ```
///
/// over already-labelled rows `i'`. The update step is the usual mean. With
/// all constraints zero the result is identical to [`kmeans`] under the same
/// configuration.
pub fn scop_kmeans(x: &Matrix, s: &ConstraintMatrix, cfg: &ScopConfig) -> Result<Clustering> {
    if s.len() != x.nrows() {
        return Err(Error::validation(format!(
            "constraint matrix is {}×{} but data has {} rows",
            s.len(),
            s.len(),
            x.nrows()
        )));
    }
    let scale = match cfg.penalty_scale {
        Some(v) if v >= 0.0 && v.is_finite() => v,
        Some(v) => {
            return Err(Error::validation(format!(
                "penalty_scale must be finite and nonnegative, got {v}"
            )))
        }
        None if cfg.penalty_weight >= 0.0 && cfg.penalty_weight.is_finite() => {
            default_penalty_scale(x) * cfg.penalty_weight
        }
        None => {
            return Err(Error::validation(format!(
                "penalty_weight must be finite and nonnegative, got {}",
                cfg.penalty_weight
            )))
        }
    };
    run(x, &cfg.base, Some(&Penalty { s, scale }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(points: &[f64]) -> Matrix {
        Matrix::from_column_slice(points.len(), 1, points)
    }

    #[test]
    fn single_cluster_is_column_mean() {
        let x = Matrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 11.0]);
        let c = kmeans(&x, &KmeansConfig::new(1, 3)).unwrap();
        let mean = x.row_mean();
        assert!((c.centroids.row(0) - &mean).amax() < 1e-14);
        let total: f64 = x.row_iter().map(|r| (r - &mean).norm_squared()).sum();
        assert_relative_eq!(c.inertia, total, epsilon = 1e-12);
        assert!(c.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn one_cluster_per_point() {
        let x = line(&[0.0, 3.0, 7.0, 20.0, 21.0]);
        let c = kmeans(&x, &KmeansConfig::new(5, 1)).unwrap();
        assert_eq!(c.inertia, 0.0);
        let mut labels = c.labels.clone();
        labels.sort_unstable();
        assert_eq!(labels, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn duplicate_points_with_k_equal_m() {
        let x = line(&[1.0, 1.0, 1.0]);
        let c = kmeans(&x, &KmeansConfig::new(3, 0)).unwrap();
        assert_eq!(c.inertia, 0.0);
        assert_eq!(c.cluster_sizes(), vec![1, 1, 1]);
    }

    #[test]
    fn separates_obvious_groups() {
        let x = line(&[0.0, 0.5, 1.0, 50.0, 50.5, 51.0]);
        let c = kmeans(&x, &KmeansConfig::new(2, 9)).unwrap();
        assert_eq!(c.labels[0], c.labels[1]);
        assert_eq!(c.labels[1], c.labels[2]);
        assert_eq!(c.labels[3], c.labels[4]);
        assert_ne!(c.labels[0], c.labels[3]);
    }

    #[test]
    fn trace_nonincreasing_and_best_replicate_chosen() {
        let x = Matrix::from_fn(60, 2, |i, j| {
            (((i * 37 + j * 11) % 17) as f64).sin() * 10.0 + (i % 3) as f64 * 5.0
        });
        let c = kmeans(
            &x,
            &KmeansConfig {
                k: 4,
                replicates: 8,
                ..KmeansConfig::default()
            },
        )
        .unwrap();
        for w in c.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{w:?}");
        }
        assert!(c.replicate_objectives.iter().all(|&o| c.inertia <= o));
    }

    #[test]
    fn deterministic_for_seed() {
        let x = Matrix::from_fn(40, 3, |i, j| ((i * 13 + j * 7) % 19) as f64);
        let cfg = KmeansConfig::new(3, 77);
        assert_eq!(kmeans(&x, &cfg).unwrap(), kmeans(&x, &cfg).unwrap());
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            kmeans(&line(&[1.0]), &KmeansConfig::new(2, 0)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn zero_constraints_reduce_to_kmeans() {
        let x = Matrix::from_fn(30, 2, |i, j| ((i * 31 + j * 5) % 23) as f64 * 0.7);
        let base = KmeansConfig::new(3, 5);
        let plain = kmeans(&x, &base).unwrap();
        let scop = scop_kmeans(
            &x,
            &ConstraintMatrix::zeros(30),
            &ScopConfig {
                base,
                ..ScopConfig::default()
            },
        )
        .unwrap();
        assert_eq!(plain, scop);
    }

    #[test]
    fn cannot_link_splits_coincident_points() {
        let x = line(&[2.0, 2.0]);
        let s = ConstraintMatrix::new(Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])).unwrap();
        let cfg = ScopConfig {
            base: KmeansConfig::new(2, 0),
            penalty_scale: Some(1e6),
            ..ScopConfig::default()
        };
        let c = scop_kmeans(&x, &s, &cfg).unwrap();
        assert_ne!(c.labels[0], c.labels[1]);
    }

    #[test]
    fn constrained_objective_nonincreasing() {
        let x = Matrix::from_fn(25, 2, |i, j| ((i * 17 + j * 3) % 13) as f64);
        let s = Matrix::from_fn(25, 25, |i, j| {
            if i == j {
                1.0
            } else {
                (((i + j) % 7) as f64 - 3.0) / 3.0
            }
        });
        let s = ConstraintMatrix::new(s).unwrap();
        let cfg = ScopConfig {
            base: KmeansConfig {
                k: 3,
                replicates: 4,
                ..KmeansConfig::default()
            },
            penalty_scale: Some(2.0),
            ..ScopConfig::default()
        };
        let c = scop_kmeans(&x, &s, &cfg).unwrap();
        for w in c.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{w:?}");
        }
    }

    #[test]
    fn mean_pairwise_distance() {
        // pairs of {0, 1, 3}: 1, 9, 4
        assert_relative_eq!(mean_pairwise_sq_distance(&line(&[0.0, 1.0, 3.0])), 14.0 / 3.0);
        assert_relative_eq!(default_penalty_scale(&line(&[0.0, 1.0, 3.0])), 14.0 / 6.0);
        assert_eq!(default_penalty_scale(&line(&[4.0])), 0.0);
    }

    #[test]
    fn penalty_weight_validated() {
        let cfg = ScopConfig {
            penalty_weight: -1.0,
            ..ScopConfig::default()
        };
        assert!(scop_kmeans(&line(&[0.0, 1.0, 2.0]), &ConstraintMatrix::zeros(3), &cfg).is_err());
    }
}
