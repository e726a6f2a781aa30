//! Synthetic linear-model data with latent clusters, and cluster-patterned
//! missingness masks.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{save_csv, CsvOptions, Dataset, Mask, MaskedMatrix, Matrix, Vector};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Training rows.
    pub m: usize,
    /// Test rows.
    pub p: usize,
    /// Features.
    pub n: usize,
    pub k_true: usize,
    /// Draw a separate coefficient vector for every latent cluster.
    pub beta_per_cluster: bool,
    pub noise_sigma: f64,
    /// Range of per-feature means.
    pub mean_range: (f64, f64),
    /// Range of per-feature standard deviations.
    pub sigma_range: (f64, f64),
    /// Cluster offsets are drawn as `N(0, (cluster_shift · σ_j)²)` per feature.
    pub cluster_shift: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            m: 200,
            p: 50,
            n: 5,
            k_true: 2,
            beta_per_cluster: true,
            noise_sigma: 1.0,
            mean_range: (-5.0, 5.0),
            sigma_range: (0.5, 2.0),
            cluster_shift: 3.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.p == 0 || self.n == 0 || self.k_true == 0 {
            return Err(Error::validation("m, p, n and k_true must all be at least 1"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::validation("noise_sigma must be finite and nonnegative"));
        }
        if !(self.cluster_shift >= 0.0) || !self.cluster_shift.is_finite() {
            return Err(Error::validation("cluster_shift must be finite and nonnegative"));
        }
        let (mlo, mhi) = self.mean_range;
        let (slo, shi) = self.sigma_range;
        if !(mlo <= mhi) || !(0.0 <= slo && slo <= shi) || !mhi.is_finite() || !shi.is_finite() || !mlo.is_finite() {
            return Err(Error::validation("invalid mean_range or sigma_range"));
        }
        Ok(())
    }
}

fn uniform(lo: f64, hi: f64, rng: &mut impl rand::Rng) -> f64 {
    if lo == hi {
        lo
    } else {
        Uniform::new(lo, hi).expect("lo < hi").sample(rng)
    }
}

/// Gaussian features with per-feature `(μ, σ)`, shifted per latent cluster,
/// and responses `y = x·β + ε`.
pub fn gen_linear(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let n = spec.n;
    let mu: Vec<f64> = (0..n)
        .map(|_| uniform(spec.mean_range.0, spec.mean_range.1, &mut rng))
        .collect();
    let sigma: Vec<f64> = (0..n)
        .map(|_| uniform(spec.sigma_range.0, spec.sigma_range.1, &mut rng))
        .collect();
    let offsets = Matrix::from_fn(spec.k_true, n, |_, j| {
        let z: f64 = StandardNormal.sample(&mut rng);
        spec.cluster_shift * sigma[j] * z
    });
    let beta_cols = if spec.beta_per_cluster { spec.k_true } else { 1 };
    let beta = Matrix::from_fn(n, beta_cols, |_, _| StandardNormal.sample(&mut rng));
    let noise = Normal::new(0.0, spec.noise_sigma).expect("validated");

    let mut draw = |rows: usize| {
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..spec.k_true)).collect();
        let x = Matrix::from_fn(rows, n, |i, j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            mu[j] + offsets[(labels[i], j)] + sigma[j] * z
        });
        let y = Vector::from_fn(rows, |i, _| {
            let b = beta.column(if spec.beta_per_cluster { labels[i] } else { 0 });
            x.row(i).dot(&b.transpose()) + noise.sample(&mut rng)
        });
        (x, y, labels)
    };
    let (x_train, y_train, train_labels) = draw(spec.m);
    let (x_test, y_test, test_labels) = draw(spec.p);

    let mut ds = Dataset::new(
        MaskedMatrix::fully_observed(x_train)?,
        y_train,
        MaskedMatrix::fully_observed(x_test)?,
        Some(y_test),
    )?;
    ds.beta_true = Some(beta);
    ds.train_labels = Some(train_labels);
    ds.test_labels = Some(test_labels);
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskSpec {
    pub m_rate: f64,
    /// Probability of flipping each entry after the cluster pattern is applied.
    pub noise_flip_rate: f64,
    pub seed: u64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self {
            m_rate: 0.3,
            noise_flip_rate: 0.02,
            seed: 0,
        }
    }
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.m_rate) {
            return Err(Error::validation(format!(
                "m_rate must lie in [0, 1], got {}",
                self.m_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_flip_rate) {
            return Err(Error::validation("noise_flip_rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Observation mask (`true` = observed) shared by all rows of a cluster.
///
/// Each cluster draws `r ~ U(0,1)^n` once and observes feature `j` when
/// `r_j ≥ max(r) · m_rate`. Entries are then flipped independently with
/// probability `noise_flip_rate`, and any row left empty gets one random
/// entry back.
pub fn gen_cluster_mask(labels: &[usize], n: usize, spec: &MaskSpec) -> Result<Mask> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::validation("feature count must be at least 1"));
    }
    let k = labels.iter().max().map_or(0, |&l| l + 1);
    let mut rng = seeded(spec.seed);
    let patterns: Vec<Vec<bool>> = (0..k)
        .map(|_| {
            let r: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let threshold = r.iter().copied().fold(f64::NEG_INFINITY, f64::max) * spec.m_rate;
            r.iter().map(|&v| v >= threshold).collect()
        })
        .collect();

    let mut mask = Mask::from_fn(labels.len(), n, |i, j| patterns[labels[i]][j]);
    if spec.noise_flip_rate > 0.0 {
        for v in mask.iter_mut() {
            if rng.random::<f64>() < spec.noise_flip_rate {
                *v = !*v;
            }
        }
    }
    for i in 0..labels.len() {
        if !mask.row(i).iter().any(|&b| b) {
            let j = rng.random_range(0..n);
            mask[(i, j)] = true;
        }
    }
    Ok(mask)
}

/// Hides training entries with a cluster-patterned mask built from the
/// dataset's latent training labels.
pub fn mask_training_rows(ds: &Dataset, spec: &MaskSpec) -> Result<Dataset> {
    let labels = ds
        .train_labels
        .as_ref()
        .ok_or_else(|| Error::validation("dataset has no training labels to pattern the mask on"))?;
    let mask = gen_cluster_mask(labels, ds.n_features(), spec)?;
    let mut out = ds.clone();
    out.x_train = ds.x_train.with_mask(&mask)?;
    Ok(out)
}

fn write_column(path: &Path, v: &Vector) -> Result<()> {
    let m = MaskedMatrix::fully_observed(Matrix::from_column_slice(v.len(), 1, v.as_slice()))?;
    save_csv(&m, path, &CsvOptions::default())
}

/// Writes `x_train.csv`, `y_train.csv`, `x_test.csv`, `y_test.csv`,
/// `beta.csv`, label files when known, and `metadata.json` into `dir`.
pub fn export_dataset(ds: &Dataset, dir: &Path, metadata: &serde_json::Value, opts: &CsvOptions) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_csv(&ds.x_train, dir.join("x_train.csv"), opts)?;
    save_csv(&ds.x_test, dir.join("x_test.csv"), opts)?;
    write_column(&dir.join("y_train.csv"), &ds.y_train)?;
    if let Some(y) = &ds.y_test {
        write_column(&dir.join("y_test.csv"), y)?;
    }
    if let Some(beta) = &ds.beta_true {
        save_csv(
            &MaskedMatrix::fully_observed(beta.clone())?,
            dir.join("beta.csv"),
            &CsvOptions::default(),
        )?;
    }
    for (name, labels) in [
        ("labels_train.csv", &ds.train_labels),
        ("labels_test.csv", &ds.test_labels),
    ] {
        if let Some(l) = labels {
            let body: String = l.iter().map(|v| format!("{v}\n")).collect();
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
    }
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(metadata)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{ols_fit, SolveOptions};

    #[test]
    fn noiseless_shared_beta_is_identifiable() {
        let spec = SynthSpec {
            noise_sigma: 0.0,
            beta_per_cluster: false,
            ..SynthSpec::default()
        };
        let ds = gen_linear(&spec).unwrap();
        let fit = ols_fit(ds.x_train.complete().unwrap(), &ds.y_train, SolveOptions::default()).unwrap();
        let beta = ds.beta_true.unwrap().column(0).into_owned();
        assert!((fit.coefficients - beta).amax() < 1e-8);
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SynthSpec::default();
        let a = gen_linear(&spec).unwrap();
        let b = gen_linear(&spec).unwrap();
        assert_eq!(a.x_train, b.x_train);
        assert_eq!(a.y_test, b.y_test);
        assert_eq!(a.train_labels, b.train_labels);
        let c = gen_linear(&SynthSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.x_train, c.x_train);
    }

    #[test]
    fn shapes_and_labels() {
        let spec = SynthSpec {
            m: 30,
            p: 7,
            n: 4,
            k_true: 3,
            ..SynthSpec::default()
        };
        let ds = gen_linear(&spec).unwrap();
        assert_eq!(ds.x_train.nrows(), 30);
        assert_eq!(ds.x_test.nrows(), 7);
        assert_eq!(ds.beta_true.as_ref().unwrap().shape(), (4, 3));
        assert!(ds.train_labels.unwrap().iter().all(|&l| l < 3));
    }

    #[test]
    fn zero_rate_observes_everything() {
        let labels = vec![0, 1, 1, 2, 0];
        let spec = MaskSpec {
            m_rate: 0.0,
            noise_flip_rate: 0.0,
            seed: 3,
        };
        assert!(gen_cluster_mask(&labels, 6, &spec).unwrap().iter().all(|&b| b));
    }

    #[test]
    fn full_rate_keeps_only_argmax() {
        let labels = vec![0, 0, 1, 1, 1];
        let spec = MaskSpec {
            m_rate: 1.0,
            noise_flip_rate: 0.0,
            seed: 5,
        };
        let mask = gen_cluster_mask(&labels, 8, &spec).unwrap();
        for i in 0..labels.len() {
            assert_eq!(mask.row(i).iter().filter(|&&b| b).count(), 1);
        }
    }

    #[test]
    fn cluster_rows_share_pattern() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let spec = MaskSpec {
            m_rate: 0.5,
            noise_flip_rate: 0.0,
            seed: 9,
        };
        let mask = gen_cluster_mask(&labels, 25, &spec).unwrap();
        for i in 0..40 {
            assert_eq!(mask.row(i), mask.row(i % 4));
        }
        // distinct clusters almost surely differ at n = 25
        for a in 0..4 {
            for b in (a + 1)..4 {
                assert_ne!(mask.row(a), mask.row(b));
            }
        }
    }

    #[test]
    fn rows_never_empty() {
        let labels = vec![0; 50];
        let spec = MaskSpec {
            m_rate: 1.0,
            noise_flip_rate: 0.5,
            seed: 1,
        };
        let mask = gen_cluster_mask(&labels, 2, &spec).unwrap();
        for i in 0..50 {
            assert!(mask.row(i).iter().any(|&b| b));
        }
    }

    #[test]
    fn invalid_mask_rate() {
        let spec = MaskSpec {
            m_rate: 1.5,
            ..MaskSpec::default()
        };
        assert!(gen_cluster_mask(&[0], 2, &spec).is_err());
    }
}
