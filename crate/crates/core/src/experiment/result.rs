use serde::{Deserialize, Serialize};

use super::spec::{ExperimentSpec, GridPoint, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Test-set mean squared error.
    Mse,
    /// Mean silhouette of the training-row clustering.
    Silhouette,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Silhouette => "silhouette",
        }
    }
}

/// One (method, grid point, trial) cell. `value` is `None` when the cell failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    pub method: Method,
    pub grid_index: usize,
    pub grid: GridPoint,
    pub trial: usize,
    pub value: Option<f64>,
    pub error: Option<String>,
    /// Wall-clock seconds. Not serialized with the record and ignored by
    /// equality, so results stay reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl PartialEq for Record {
    fn eq(&self, other: &Self) -> bool {
        self.method == other.method
            && self.grid_index == other.grid_index
            && self.grid == other.grid
            && self.trial == other.trial
            && self.value.map(f64::to_bits) == other.value.map(f64::to_bits)
            && self.error == other.error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub grid_index: usize,
    pub grid: GridPoint,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Arithmetic mean of the successful records, in trial order.
    pub mean: Option<f64>,
    /// Sample standard deviation; `None` with fewer than two successes.
    pub std: Option<f64>,
}

/// Impute / Missing-SCOP / no-missing comparison at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub grid_index: usize,
    pub grid: GridPoint,
    pub impute: Option<f64>,
    pub missing_scop: Option<f64>,
    pub no_missing: Option<f64>,
    /// Trials where all three succeeded.
    pub trials_compared: usize,
    /// Trials with no-missing ≥ Missing-SCOP ≥ impute.
    pub ordering_held: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub metric: Metric,
    /// Sorted by method order in the spec, then grid index, then trial.
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table1: Vec<Table1Row>,
    pub failures: usize,
}

impl ExperimentResult {
    pub(crate) fn assemble(spec: &ExperimentSpec, metric: Metric, mut records: Vec<Record>) -> Self {
        let pos = |m: Method| spec.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
        records.sort_by_key(|r| (pos(r.method), r.grid_index, r.trial));
        let aggregates = aggregate(&records);
        let table1 = if [Method::Impute, Method::MissingScop, Method::NoMissing]
            .iter()
            .all(|m| spec.methods.contains(m))
        {
            table1(&records, &aggregates)
        } else {
            Vec::new()
        };
        let failures = records.iter().filter(|r| r.value.is_none()).count();
        Self {
            spec: spec.clone(),
            metric,
            records,
            aggregates,
            table1,
            failures,
        }
    }

    pub fn aggregate_for(&self, method: Method, grid_index: usize) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.grid_index == grid_index)
    }
}

fn aggregate(records: &[Record]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let head = &records[start];
        let end = start
            + records[start..]
                .iter()
                .take_while(|r| r.method == head.method && r.grid_index == head.grid_index)
                .count();
        let values: Vec<f64> = records[start..end].iter().filter_map(|r| r.value).collect();
        let n = values.len();
        let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
        let std = mean.filter(|_| n >= 2).map(|mu| {
            let ss: f64 = values.iter().map(|v| (v - mu) * (v - mu)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        out.push(Aggregate {
            method: head.method,
            grid_index: head.grid_index,
            grid: head.grid,
            n_ok: n,
            n_failed: end - start - n,
            mean,
            std,
        });
        start = end;
    }
    out
}

fn table1(records: &[Record], aggregates: &[Aggregate]) -> Vec<Table1Row> {
    let mean_of = |m: Method, g: usize| {
        aggregates
            .iter()
            .find(|a| a.method == m && a.grid_index == g)
            .and_then(|a| a.mean)
    };
    let value = |m: Method, g: usize, t: usize| {
        records
            .iter()
            .find(|r| r.method == m && r.grid_index == g && r.trial == t)
            .and_then(|r| r.value)
    };
    let mut grids: Vec<(usize, GridPoint)> = records.iter().map(|r| (r.grid_index, r.grid)).collect();
    grids.sort_by_key(|g| g.0);
    grids.dedup_by_key(|g| g.0);
    let trials = records.iter().map(|r| r.trial + 1).max().unwrap_or(0);

    grids
        .into_iter()
        .map(|(g, grid)| {
            let mut compared = 0;
            let mut held = 0;
            for t in 0..trials {
                if let (Some(a), Some(b), Some(c)) = (
                    value(Method::Impute, g, t),
                    value(Method::MissingScop, g, t),
                    value(Method::NoMissing, g, t),
                ) {
                    compared += 1;
                    if c >= b && b >= a {
                        held += 1;
                    }
                }
            }
            Table1Row {
                grid_index: g,
                grid,
                impute: mean_of(Method::Impute, g),
                missing_scop: mean_of(Method::MissingScop, g),
                no_missing: mean_of(Method::NoMissing, g),
                trials_compared: compared,
                ordering_held: held,
            }
        })
        .collect()
}
