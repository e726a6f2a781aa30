//! Config-driven experiments: prediction-error sweeps over the tuning
//! parameters, clustering comparisons on masked data, and report files.

mod report;
mod result;
mod run;
mod spec;

pub use report::{emit_report, probe_writable, read_result, write_raw, ReportFormat};
pub use result::{Aggregate, ExperimentResult, Metric, Record, Table1Row};
pub use run::{compare_clustering, run_sweep, trial_seed};
pub use spec::{DataSource, ExperimentSpec, Grid, GridPoint, Method, Params, SilhouetteData};
