use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::CsvOptions;
use crate::datagen::SynthSpec;
use crate::error::{Error, Result};
use crate::imputation::SoftImputeConfig;
use crate::missing_swp::Completion;
use crate::swp::DEFAULT_EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataSource {
    /// Fresh synthetic data per trial; the trial seed overrides `seed`.
    Synthetic(SynthSpec),
    /// A numeric table split into train and test rows per trial.
    Csv {
        path: PathBuf,
        response_col: usize,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        csv: CsvOptions,
    },
}

fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ols,
    Lasso,
    Knn,
    ClusterPredict,
    Swp,
    MissingSwp,
    /// Soft-impute, then k-means.
    Impute,
    MissingScop,
    /// k-means on the complete data.
    NoMissing,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Lasso => "lasso",
            Method::Knn => "knn",
            Method::ClusterPredict => "cluster_predict",
            Method::Swp => "swp",
            Method::MissingSwp => "missing_swp",
            Method::Impute => "impute",
            Method::MissingScop => "missing_scop",
            Method::NoMissing => "no_missing",
        }
    }

    pub fn is_clustering(self) -> bool {
        matches!(self, Method::Impute | Method::MissingScop | Method::NoMissing)
    }
}

/// Sweep axes. Every combination is evaluated. An empty `m_rate` axis means
/// no mask is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub w: Vec<f64>,
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
    pub m_rate: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            w: vec![0.0],
            k: vec![2],
            lambda: vec![0.1],
            m_rate: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub w: f64,
    pub k: usize,
    pub lambda: f64,
    pub m_rate: Option<f64>,
}

impl Grid {
    /// Grid points with `m_rate` outermost and `w` innermost.
    pub fn points(&self) -> Vec<GridPoint> {
        let rates: Vec<Option<f64>> = if self.m_rate.is_empty() {
            vec![None]
        } else {
            self.m_rate.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &m_rate in &rates {
            for &k in &self.k {
                for &lambda in &self.lambda {
                    for &w in &self.w {
                        out.push(GridPoint { w, k, lambda, m_rate });
                    }
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.w.is_empty() || self.k.is_empty() || self.lambda.is_empty() {
            return Err(Error::validation("grid axes w, k and lambda must be non-empty"));
        }
        if self.w.iter().any(|w| !w.is_finite()) {
            return Err(Error::validation("grid w values must be finite"));
        }
        if self.k.contains(&0) {
            return Err(Error::validation("grid k values must be at least 1"));
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::validation("grid lambda values must be finite and nonnegative"));
        }
        if self.m_rate.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::validation("grid m_rate values must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SilhouetteData {
    /// The complete data before masking.
    Truth,
    /// The mean-imputed masked data.
    Imputed,
}

/// Algorithm settings that are not swept. All of them are echoed into the
/// result metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    pub epsilon: f64,
    pub allow_pinv: bool,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    pub kmeans_replicates: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    /// `None` uses the data-derived default of the constrained k-means.
    pub penalty_scale: Option<f64>,
    /// Multiplier on the data-derived penalty scale.
    pub penalty_weight: f64,
    /// Mask/distance trade-off of Missing-SCOP when it is not the swept `w`.
    pub scop_w: f64,
    pub paper_literal: bool,
    pub noise_flip_rate: f64,
    /// Clusters used to pattern the mask of a table without latent labels.
    pub mask_clusters: usize,
    /// Completion used by `missing_swp` before its weighted fit.
    pub completion: Completion,
    /// Soft-impute settings of the `impute` clustering baseline.
    pub soft_impute: SoftImputeConfig,
    pub silhouette_on: SilhouetteData,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            allow_pinv: false,
            lasso_tol: 1e-10,
            lasso_max_iter: 10_000,
            kmeans_replicates: 10,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-10,
            penalty_scale: None,
            penalty_weight: 1.0,
            scop_w: 0.5,
            paper_literal: false,
            noise_flip_rate: 0.02,
            mask_clusters: 2,
            completion: Completion::Mean,
            soft_impute: SoftImputeConfig::default(),
            silhouette_on: SilhouetteData::Truth,
        }
    }
}

impl Params {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::validation("epsilon must be positive"));
        }
        if !(self.lasso_tol > 0.0) || self.lasso_max_iter == 0 {
            return Err(Error::validation(
                "lasso_tol must be positive and lasso_max_iter at least 1",
            ));
        }
        if self.kmeans_replicates == 0 || self.kmeans_max_iter == 0 || !(self.kmeans_tol >= 0.0) {
            return Err(Error::validation("invalid k-means settings"));
        }
        if let Some(p) = self.penalty_scale {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::validation("penalty_scale must be finite and nonnegative"));
            }
        }
        if !(self.penalty_weight >= 0.0) || !self.penalty_weight.is_finite() {
            return Err(Error::validation("penalty_weight must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.scop_w) {
            return Err(Error::validation("scop_w must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.noise_flip_rate) {
            return Err(Error::validation("noise_flip_rate must lie in [0, 1]"));
        }
        if self.mask_clusters == 0 {
            return Err(Error::validation("mask_clusters must be at least 1"));
        }
        self.soft_impute.validate()?;
        if let Completion::SoftImpute(cfg) = &self.completion {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// One experiment, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub data: DataSource,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub params: Params,
}

fn default_trials() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentSpec {
    /// Parses and validates a spec.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::validation(format!("invalid spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::validation("method list is empty"));
        }
        if self.trials == 0 {
            return Err(Error::validation("trials must be at least 1"));
        }
        self.grid.validate()?;
        self.params.validate()?;
        match &self.data {
            DataSource::Synthetic(s) => s.validate()?,
            DataSource::Csv { test_fraction, .. } => {
                if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                    return Err(Error::validation("test_fraction must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn require_methods(&self, clustering: bool) -> Result<()> {
        let wrong: Vec<&str> = self
            .methods
            .iter()
            .filter(|m| m.is_clustering() != clustering)
            .map(|m| m.name())
            .collect();
        if wrong.is_empty() {
            Ok(())
        } else {
            let what = if clustering { "clustering" } else { "prediction" };
            Err(Error::validation(format!("methods {wrong:?} are not {what} methods")))
        }
    }
}
