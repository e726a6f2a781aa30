use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use swp_core::datagen::{export_dataset, mask_training_rows};
use swp_core::experiment::{compare_clustering, emit_report, read_result, run_sweep, ExperimentResult, ExperimentSpec};
use swp_core::rng::derive_seed;
use swp_core::{gen_linear, CsvOptions, Error, MaskSpec, ReportFormat, SynthSpec};

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "swp", version, about = "Soft weighted prediction experiments")]
struct Cli {
    /// Log progress (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV files.
    Generate {
        /// JSON file with `synth`, optional `mask` and `csv` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a prediction-error sweep.
    Sweep(RunArgs),
    /// Compare impute-then-cluster, Missing-SCOP and complete-data clustering.
    ClusterBench(RunArgs),
    /// Write report files from a saved result.json.
    Report {
        /// Path to a result.json written by `sweep` or `cluster-bench`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "csv")]
        format: Vec<Format>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the spec's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the spec's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the raw co-observed distances of the constraint construction.
    #[arg(long)]
    paper_literal: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv")]
    format: Vec<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Plotdata,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
            Format::Plotdata => ReportFormat::Plotdata,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenerateConfig {
    synth: SynthSpec,
    mask: Option<MaskSpec>,
    csv: CsvOptions,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_OTHER })
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Generate { config, seed, out } => generate(config.as_deref(), seed, &out),
        Command::Sweep(args) => experiment(args, run_sweep),
        Command::ClusterBench(args) => experiment(args, compare_clustering),
        Command::Report { input, out, format } => {
            let result = read_result(&input)?;
            report(&result, &format, &out)
        }
    }
}

fn generate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<ExitCode, Error> {
    let mut cfg: GenerateConfig = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Validation(format!("invalid generate config: {e}")))?
        }
        None => GenerateConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.synth.seed = seed;
        if let Some(mask) = cfg.mask.as_mut() {
            mask.seed = derive_seed(seed, 1);
        }
    }
    let mut ds = gen_linear(&cfg.synth)?;
    if let Some(mask) = &cfg.mask {
        ds = mask_training_rows(&ds, mask)?;
    }
    let metadata = serde_json::to_value(&cfg)?;
    export_dataset(&ds, out, &metadata, &cfg.csv)?;
    println!(
        "wrote {} training and {} test rows with {} features to {}",
        ds.x_train.nrows(),
        ds.x_test.nrows(),
        ds.n_features(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn experiment(
    args: RunArgs,
    runner: fn(&ExperimentSpec) -> swp_core::Result<ExperimentResult>,
) -> Result<ExitCode, Error> {
    let mut spec = ExperimentSpec::load(&args.config)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(out) = args.out {
        spec.output_dir = out;
    }
    if args.paper_literal {
        spec.params.paper_literal = true;
    }
    let result = runner(&spec)?;
    report(&result, &args.format, &spec.output_dir)
}

fn report(result: &ExperimentResult, formats: &[Format], out: &Path) -> Result<ExitCode, Error> {
    let formats: Vec<ReportFormat> = formats.iter().map(|&f| f.into()).collect();
    let written = emit_report(result, &formats, out)?;
    for row in &result.table1 {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "w={} k={} m_rate={}: impute {} missing_scop {} no_missing {} (ordering held {}/{})",
            row.grid.w,
            row.grid.k,
            row.grid.m_rate.map_or("-".to_string(), |r| r.to_string()),
            show(row.impute),
            show(row.missing_scop),
            show(row.no_missing),
            row.ordering_held,
            row.trials_compared
        );
    }
    println!(
        "{} records, {} failed; wrote {} files to {}",
        result.records.len(),
        result.failures,
        written.len(),
        out.display()
    );
    Ok(if result.failures > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    })
}
