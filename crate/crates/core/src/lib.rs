//! Soft weighted prediction for linear models, with a missing-data pipeline
//! built on mask-constrained k-means and soft-impute completion, and an
//! experiment harness for MSE and silhouette sweeps.
//!
//! The main entry points are re-exported at the crate root.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod data;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod imputation;
pub mod missing_swp;
pub mod regression;
pub mod rng;
pub mod swp;

pub use clustering::{
    kmeans, missing_scop, missing_scop_constraints, scop_kmeans, silhouette, Clustering, ConstraintMatrix,
    KmeansConfig, MissingScopConfig, ScopConfig, Silhouette,
};
pub use data::{load_csv, mask_of_zeros, save_csv, split, CsvOptions, Dataset, Mask, MaskedMatrix, Matrix, Vector};
pub use datagen::{gen_cluster_mask, gen_linear, MaskSpec, SynthSpec};
pub use error::{Error, Result};
pub use experiment::{
    compare_clustering, emit_report, run_sweep, ExperimentResult, ExperimentSpec, Method, ReportFormat,
};
pub use imputation::{
    mean_impute, soft_impute, soft_impute_path, svd_soft_threshold, SoftImputeConfig, SoftImputeResult,
};
pub use missing_swp::{cluster_weights, membership, missing_swp_predict, Completion, Membership, MissingSwpConfig};
pub use regression::{lasso_fit, ols_fit, predict, wls_fit, RegressionModel, SolveOptions, Solver};
pub use swp::{cluster_predict, knn_predict, swp_predict, swp_weights, SwpConfig};
