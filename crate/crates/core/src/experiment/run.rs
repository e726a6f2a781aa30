use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use super::report::{probe_writable, write_raw};
use super::result::{ExperimentResult, Metric, Record};
use super::spec::{DataSource, ExperimentSpec, GridPoint, Method, Params, SilhouetteData};
use crate::clustering::{kmeans, missing_scop, silhouette, Clustering, KmeansConfig, MissingScopConfig, ScopConfig};
use crate::data::{load_csv, split, Dataset, MaskedMatrix, Matrix, Vector};
use crate::datagen::{gen_cluster_mask, gen_linear, MaskSpec};
use crate::error::{Error, Result};
use crate::imputation::{mean_impute, soft_impute};
use crate::missing_swp::{missing_swp_predict_with, MissingSwpConfig};
use crate::regression::{lasso_fit, ols_fit, predict, SolveOptions};
use crate::rng::derive_seed;
use crate::swp::{cluster_predict, knn_predict, swp_predict, SwpConfig};

/// Seed streams derived from each trial seed.
const DATA_STREAM: u64 = 0;
const MASK_STREAM: u64 = 1;
const METHOD_STREAM: u64 = 2;

pub fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, trial as u64)
}

/// Prediction-method sweep. Every (method, grid point, trial) cell is
/// evaluated; a failing cell is recorded and the sweep carries on. Raw
/// records and the result document are written to the output directory
/// before returning.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    spec.require_methods(false)?;
    probe_writable(&spec.output_dir)?;
    let result = execute(spec, Metric::Mse, sweep_task)?;
    write_raw(&result, &spec.output_dir)?;
    Ok(result)
}

/// Clustering comparison: soft-impute then k-means, Missing-SCOP on the
/// masked rows, and k-means on the complete rows, scored by mean
/// silhouette. The swept `w` is the Missing-SCOP trade-off.
pub fn compare_clustering(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    spec.require_methods(true)?;
    if spec.grid.w.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::validation("Missing-SCOP w values must lie in [0, 1]"));
    }
    probe_writable(&spec.output_dir)?;
    let result = execute(spec, Metric::Silhouette, cluster_task)?;
    write_raw(&result, &spec.output_dir)?;
    Ok(result)
}

/// Data shared by every cell of one (trial, m_rate) task.
struct TaskData {
    /// Data before masking.
    base: Dataset,
    /// Data after masking; equal to `base` when no mask is configured.
    masked: Dataset,
    method_seed: u64,
}

type TaskFn = fn(&ExperimentSpec, &TaskData, &[(usize, GridPoint)], usize) -> Vec<Record>;

fn execute(spec: &ExperimentSpec, metric: Metric, task: TaskFn) -> Result<ExperimentResult> {
    let source = load_source(&spec.data)?;
    let points: Vec<(usize, GridPoint)> = spec.grid.points().into_iter().enumerate().collect();
    let rates: Vec<Option<f64>> = if spec.grid.m_rate.is_empty() {
        vec![None]
    } else {
        spec.grid.m_rate.iter().copied().map(Some).collect()
    };
    let tasks: Vec<(usize, Option<f64>)> = (0..spec.trials)
        .flat_map(|t| rates.iter().map(move |&r| (t, r)))
        .collect();
    info!(
        "{} tasks, {} grid points, {} methods",
        tasks.len(),
        points.len(),
        spec.methods.len()
    );

    let records: Vec<Record> = tasks
        .par_iter()
        .flat_map_iter(|&(trial, rate)| {
            let cells: Vec<(usize, GridPoint)> = points.iter().copied().filter(|(_, p)| p.m_rate == rate).collect();
            match prepare(spec, source.as_ref(), trial, rate) {
                Ok(data) => task(spec, &data, &cells, trial),
                Err(e) => {
                    warn!("trial {trial}: data preparation failed: {e}");
                    let msg = e.to_string();
                    spec.methods
                        .iter()
                        .flat_map(|&m| cells.iter().map(move |&(g, p)| (m, g, p)))
                        .map(|(m, g, p)| failed(m, g, p, trial, &msg, 0.0))
                        .collect()
                }
            }
        })
        .collect();
    let result = ExperimentResult::assemble(spec, metric, records);
    if result.failures > 0 {
        warn!("{} of {} cells failed", result.failures, result.records.len());
    }
    Ok(result)
}

fn load_source(source: &DataSource) -> Result<Option<MaskedMatrix>> {
    match source {
        DataSource::Synthetic(_) => Ok(None),
        DataSource::Csv { path, csv, .. } => load_csv(path, csv).map(Some),
    }
}

fn prepare(spec: &ExperimentSpec, table: Option<&MaskedMatrix>, trial: usize, rate: Option<f64>) -> Result<TaskData> {
    let seed = trial_seed(spec.seed, trial);
    let base = match (&spec.data, table) {
        (DataSource::Synthetic(s), _) => gen_linear(&crate::datagen::SynthSpec {
            seed: derive_seed(seed, DATA_STREAM),
            ..s.clone()
        })?,
        (
            DataSource::Csv {
                response_col,
                test_fraction,
                ..
            },
            Some(table),
        ) => split(table, *response_col, *test_fraction, derive_seed(seed, DATA_STREAM))?,
        (DataSource::Csv { .. }, None) => unreachable!("csv sources are loaded before the tasks run"),
    };
    let method_seed = derive_seed(seed, METHOD_STREAM);
    let masked = match rate {
        None => base.clone(),
        Some(m_rate) => {
            let labels = match &base.train_labels {
                Some(l) => l.clone(),
                None => mask_labels(&base.x_train, &spec.params, method_seed)?,
            };
            let mask = gen_cluster_mask(
                &labels,
                base.n_features(),
                &MaskSpec {
                    m_rate,
                    noise_flip_rate: spec.params.noise_flip_rate,
                    seed: derive_seed(seed, MASK_STREAM),
                },
            )?;
            let mut ds = base.clone();
            ds.x_train = base.x_train.with_mask(&mask)?;
            ds
        }
    };
    Ok(TaskData {
        base,
        masked,
        method_seed,
    })
}

/// Without latent labels the mask is patterned on a k-means partition of
/// the training rows.
fn mask_labels(x: &MaskedMatrix, params: &Params, seed: u64) -> Result<Vec<usize>> {
    let cfg = kmeans_config(params, params.mask_clusters, seed);
    Ok(kmeans(&mean_impute(x), &cfg)?.labels)
}

fn kmeans_config(params: &Params, k: usize, seed: u64) -> KmeansConfig {
    KmeansConfig {
        k,
        replicates: params.kmeans_replicates,
        max_iter: params.kmeans_max_iter,
        seed,
        tol: params.kmeans_tol,
    }
}

fn scop_config(params: &Params, k: usize, w: f64, seed: u64) -> MissingScopConfig {
    MissingScopConfig {
        scop: ScopConfig {
            base: kmeans_config(params, k, seed),
            penalty_scale: params.penalty_scale,
            penalty_weight: params.penalty_weight,
        },
        w,
        paper_literal: params.paper_literal,
    }
}

fn failed(method: Method, grid_index: usize, grid: GridPoint, trial: usize, msg: &str, secs: f64) -> Record {
    Record {
        method,
        grid_index,
        grid,
        trial,
        value: None,
        error: Some(msg.to_string()),
        runtime_secs: secs,
    }
}

fn record(
    method: Method,
    (grid_index, grid): (usize, GridPoint),
    trial: usize,
    value: CellResult<f64>,
    start: Instant,
) -> Record {
    let secs = start.elapsed().as_secs_f64();
    match value {
        Ok(v) => Record {
            method,
            grid_index,
            grid,
            trial,
            value: Some(v),
            error: None,
            runtime_secs: secs,
        },
        Err(e) => failed(method, grid_index, grid, trial, &e.0, secs),
    }
}

fn mse(pred: &Vector, ds: &Dataset) -> Result<f64> {
    let y = ds
        .y_test
        .as_ref()
        .ok_or_else(|| Error::validation("test responses are required to score predictions"))?;
    Ok((pred - y).norm_squared() / y.len() as f64)
}

/// Mean-imputed copy for the methods that need complete rows. Hidden test
/// entries take the imputed training column means.
fn imputed(ds: &Dataset) -> Result<Dataset> {
    if ds.x_train.is_complete() && ds.x_test.is_complete() {
        return Ok(ds.clone());
    }
    let x_train = mean_impute(&ds.x_train);
    let means = x_train.row_mean();
    let x_test = Matrix::from_fn(ds.x_test.nrows(), ds.n_features(), |i, j| {
        ds.x_test.get(i, j).unwrap_or(means[j])
    });
    let mut out = ds.clone();
    out.x_train = MaskedMatrix::fully_observed(x_train)?;
    out.x_test = MaskedMatrix::fully_observed(x_test)?;
    Ok(out)
}

/// Failure message of one cell. Cloneable so cached failures can be
/// reported by every cell that depends on them.
#[derive(Debug, Clone)]
struct CellError(String);

impl From<Error> for CellError {
    fn from(e: Error) -> Self {
        CellError(e.to_string())
    }
}

type CellResult<T> = std::result::Result<T, CellError>;

/// Memoizes a per-k computation across the grid cells of one task.
struct PerK<T> {
    cache: BTreeMap<usize, CellResult<T>>,
}

impl<T: Clone> PerK<T> {
    fn new() -> Self {
        Self { cache: BTreeMap::new() }
    }

    fn get(&mut self, k: usize, f: impl FnOnce() -> CellResult<T>) -> CellResult<T> {
        self.cache.entry(k).or_insert_with(f).clone()
    }
}

fn sweep_task(spec: &ExperimentSpec, data: &TaskData, cells: &[(usize, GridPoint)], trial: usize) -> Vec<Record> {
    let params = &spec.params;
    let solve = SolveOptions {
        allow_pinv: params.allow_pinv,
    };
    let dense = imputed(&data.masked).map_err(CellError::from);
    let mut kmeans_cache: PerK<Clustering> = PerK::new();
    let mut scop_cache: PerK<Clustering> = PerK::new();
    let mut out = Vec::with_capacity(spec.methods.len() * cells.len());

    for &method in &spec.methods {
        for &(g, p) in cells {
            let start = Instant::now();
            let value = (|| -> CellResult<f64> {
                let ds = dense.as_ref().map_err(Clone::clone)?;
                let x = ds.x_train.complete()?;
                let x_test = ds.x_test.complete()?;
                Ok(match method {
                    Method::Ols => mse(&predict(&ols_fit(x, &ds.y_train, solve)?, x_test)?, ds),
                    Method::Lasso => {
                        let model = lasso_fit(x, &ds.y_train, p.lambda, params.lasso_tol, params.lasso_max_iter)?;
                        mse(&predict(&model, x_test)?, ds)
                    }
                    Method::Knn => mse(&knn_predict(ds, p.k)?, ds),
                    Method::ClusterPredict => {
                        let c =
                            kmeans_cache.get(p.k, || Ok(kmeans(x, &kmeans_config(params, p.k, data.method_seed))?))?;
                        mse(&cluster_predict(ds, &c, solve)?, ds)
                    }
                    Method::Swp => {
                        let cfg = SwpConfig {
                            w: p.w,
                            epsilon: params.epsilon,
                            solve,
                        };
                        mse(&swp_predict(ds, &cfg)?, ds)
                    }
                    Method::MissingSwp => {
                        let scop = scop_config(params, p.k, params.scop_w, data.method_seed);
                        let c = scop_cache.get(p.k, || Ok(missing_scop(&data.masked.x_train, &scop)?))?;
                        let cfg = MissingSwpConfig {
                            cluster: scop,
                            w_swp: p.w,
                            completion: params.completion.clone(),
                            epsilon: params.epsilon,
                            solve,
                        };
                        mse(&missing_swp_predict_with(&data.masked, &c, &cfg)?, &data.masked)
                    }
                    Method::Impute | Method::MissingScop | Method::NoMissing => {
                        Err(Error::validation("clustering method in a prediction sweep"))
                    }
                }?)
            })();
            out.push(record(method, (g, p), trial, value, start));
        }
    }
    out
}

fn cluster_task(spec: &ExperimentSpec, data: &TaskData, cells: &[(usize, GridPoint)], trial: usize) -> Vec<Record> {
    let params = &spec.params;
    let masked = &data.masked.x_train;
    let reference: CellResult<Matrix> = match params.silhouette_on {
        SilhouetteData::Truth => data
            .base
            .x_train
            .complete()
            .cloned()
            .map_err(|_| Error::validation("silhouette on the truth needs complete data before masking").into()),
        SilhouetteData::Imputed => Ok(mean_impute(masked)),
    };
    let mut impute_cache: PerK<Vec<usize>> = PerK::new();
    let mut full_cache: PerK<Vec<usize>> = PerK::new();
    let mut out = Vec::with_capacity(spec.methods.len() * cells.len());

    for &method in &spec.methods {
        for &(g, p) in cells {
            let start = Instant::now();
            let value = (|| -> CellResult<f64> {
                let reference = reference.as_ref().map_err(Clone::clone)?;
                let km = kmeans_config(params, p.k, data.method_seed);
                let labels = match method {
                    Method::Impute => impute_cache.get(p.k, || {
                        let completed = soft_impute(masked, &params.soft_impute)?.completed;
                        Ok(kmeans(&completed, &km)?.labels)
                    })?,
                    Method::MissingScop => {
                        let cfg = scop_config(params, p.k, p.w, data.method_seed);
                        let c = missing_scop(masked, &cfg)?;
                        for w in &c.warnings {
                            warn!("trial {trial}, grid point {g}: {w}");
                        }
                        c.labels
                    }
                    Method::NoMissing => full_cache.get(p.k, || {
                        let complete =
                            data.base.x_train.complete().map_err(|_| {
                                Error::validation("no-missing baseline needs complete data before masking")
                            })?;
                        Ok(kmeans(complete, &km)?.labels)
                    })?,
                    _ => return Err(Error::validation("prediction method in a clustering comparison").into()),
                };
                Ok(silhouette(reference, &labels)?.mean)
            })();
            out.push(record(method, (g, p), trial, value, start));
        }
    }
    out
}
