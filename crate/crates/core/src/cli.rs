//! The `predreg` command line: data generation, batch prediction, on-line
//! runs and validity reports.
//!
//! Process exit status: `0` on success; the termination code `1` or `2` of
//! a batch prediction; `64` for usage errors, `65` for malformed input data,
//! `70` for numerical failures and `74` for I/O failures.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::data_io::{
    emit_series, gen_synthetic, load_matrix, read_json, save_matrix, write_json, MatrixFile, SeriesKind,
    SyntheticConfig,
};
use crate::error::Error;
use crate::predictors::{
    ConfidencePredictor, EpsilonLadder, FeatureSchedule, FullLinePredictor, GaussPredictor, History, IidGaussPredictor,
    IidPredictor, MonteCarloConfig, MvaPredictor, Observation, PredictionInterval,
};
use crate::protocol::{run_online, validity_report, OnlineConfig, OnlineRecord};

pub const DEFAULT_SEED: u64 = 0x5EED;

pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;
pub const EXIT_NUMERICAL: u8 = 70;
pub const EXIT_IO: u8 = 74;

#[derive(Debug, Parser)]
#[command(name = "predreg", version, about = "Conformal prediction intervals for linear regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic training set.
    Gen(GenArgs),
    /// Predict intervals for every test row from the whole training set.
    Predict(PredictArgs),
    /// Run the on-line protocol over a data file.
    Online(OnlineArgs),
    /// Validity diagnostics of a ledger written by `online`.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Iid,
    Gauss,
    Mva,
    Iidgauss,
    /// Always the whole line.
    FullLine,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long = "n", default_value_t = 600)]
    pub observations: usize,
    #[arg(long = "k", default_value_t = 100)]
    pub features: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    /// Comma-separated significance levels.
    #[arg(long, default_value = "0.05,0.01")]
    pub epsilons: String,
    /// Features used before and after the switch step, as `early:switch:full`.
    #[arg(long)]
    pub schedule: Option<FeatureSchedule>,
    #[arg(long, default_value_t = 999)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    /// Output prefix for `_lower.csv`, `_upper.csv` and `_code.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OnlineArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub ridge: f64,
    /// Smoothed p-values with seeded random tie-breaking.
    #[arg(long)]
    pub smoothed: bool,
    /// Do not compute the realized p-values.
    #[arg(long)]
    pub skip_p_values: bool,
    /// Output prefix for `_errors.csv`, `_median.csv` and `_ledger.json`.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub ledger: PathBuf,
    /// First step counted in the error frequencies.
    #[arg(long, default_value_t = 1)]
    pub first_step: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed command, classified by exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(Error),
    Numerical(Error),
    Io(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn data(e: Error) -> Self {
        match e {
            Error::Io { .. } => Failure::Io(e),
            e => Failure::Data(e),
        }
    }

    fn numerical(e: Error) -> Self {
        match e {
            Error::Io { .. } => Failure::Io(e),
            Error::InvalidArgument(m) => Failure::Usage(m),
            e => Failure::Numerical(e),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(e) | Failure::Numerical(e) | Failure::Io(e) => e.fmt(f),
        }
    }
}

/// Exit status of a successful command.
pub type Outcome = std::result::Result<u8, Failure>;

pub fn parse_epsilons(list: &str) -> Result<EpsilonLadder<f64>, Failure> {
    let levels: Result<Vec<f64>, _> = list.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let levels = levels.map_err(|_| Failure::Usage(format!("invalid significance levels {list:?}")))?;
    EpsilonLadder::from_unsorted(levels).map_err(|e| Failure::Usage(e.to_string()))
}

/// Predictor for `model`; the schedule must already fit the data.
pub fn build_predictor(
    model: Model,
    ridge: f64,
    schedule: FeatureSchedule,
    mc_samples: usize,
    seed: u64,
) -> Box<dyn ConfidencePredictor<f64>> {
    match model {
        Model::Iid => Box::new(IidPredictor { ridge, schedule }),
        Model::Gauss => Box::new(GaussPredictor),
        Model::Mva => Box::new(MvaPredictor { ridge, schedule }),
        Model::Iidgauss => Box::new(IidGaussPredictor {
            ridge,
            schedule,
            monte_carlo: MonteCarloConfig {
                samples: mc_samples,
                seed,
                ..Default::default()
            },
        }),
        Model::FullLine => Box::new(FullLinePredictor),
    }
}

/// Bounds for a batch of test rows and the termination code.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// One row per test point, one column per level.
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// `0` normal, `1` feature-count mismatch, `2` too few observations.
    pub code: u8,
}

/// Whether a training set of `train_len` rows is below the threshold from
/// which `model` can output bounded intervals.
pub fn too_few_observations(model: Model, train_len: usize, dim: usize, ladder: &EpsilonLadder<f64>) -> bool {
    let n = train_len + 1;
    let largest = ladder.levels()[0];
    match model {
        Model::Iid => (n as f64) < (1.0 / largest).ceil(),
        Model::Gauss => n < dim + 3,
        Model::Mva => n < 3,
        Model::Iidgauss => n < dim + 2,
        Model::FullLine => false,
    }
}

pub fn batch_predict(
    model: Model,
    predictor: &dyn ConfidencePredictor<f64>,
    train: &[Observation<f64>],
    train_dim: usize,
    test: &[Vec<f64>],
    test_dim: usize,
    ladder: &EpsilonLadder<f64>,
) -> Result<BatchResult, Failure> {
    if train_dim != test_dim {
        return Ok(BatchResult {
            lower: Vec::new(),
            upper: Vec::new(),
            code: 1,
        });
    }
    let history = History::from_observations(train_dim, train.iter().cloned()).map_err(Failure::data)?;
    let intervals: Vec<Vec<PredictionInterval<f64>>> = test
        .par_iter()
        .map(|x| predictor.predict(&history, x, ladder, 1.0))
        .collect::<crate::Result<_>>()
        .map_err(Failure::numerical)?;
    Ok(BatchResult {
        lower: intervals.iter().map(|r| r.iter().map(|i| i.lower).collect()).collect(),
        upper: intervals.iter().map(|r| r.iter().map(|i| i.upper).collect()).collect(),
        code: if too_few_observations(model, train.len(), train_dim, ladder) { 2 } else { 0 },
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn schedule_for(args: &ModelArgs, dim: usize, default: FeatureSchedule) -> Result<FeatureSchedule, Failure> {
    let schedule = args.schedule.unwrap_or(default);
    schedule.validate(dim).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(schedule)
}

fn write_failure(e: Error) -> Failure {
    match e {
        Error::Io { .. } => Failure::Io(e),
        e => Failure::Data(e),
    }
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Online(args) => cmd_online(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

pub fn cmd_gen(args: &GenArgs) -> Outcome {
    let config = SyntheticConfig {
        seed: args.seed,
        observations: args.observations,
        features: args.features,
        ..Default::default()
    };
    let data = gen_synthetic(&config).map_err(Failure::numerical)?;
    save_matrix(&MatrixFile::from_observations(args.features, &data), &args.out).map_err(write_failure)?;
    Ok(0)
}

pub fn cmd_predict(args: &PredictArgs) -> Outcome {
    let ladder = parse_epsilons(&args.model.epsilons)?;
    if !(args.ridge >= 0.0 && args.ridge.is_finite()) {
        return Err(Failure::Usage(format!("ridge must be a nonnegative number, got {}", args.ridge)));
    }
    let train_file = load_matrix(&args.train).map_err(Failure::data)?;
    let test_file = load_matrix(&args.test).map_err(Failure::data)?;
    let train = train_file.to_observations().map_err(Failure::data)?;
    let test = test_file.to_features().map_err(Failure::data)?;
    let train_dim = train_file.columns - 1;
    let code_path = with_suffix(&args.out, "_code.txt");
    if train_dim != test_file.columns {
        std::fs::write(&code_path, "1\n").map_err(|e| Failure::Io(Error::io(&code_path, e)))?;
        return Ok(1);
    }
    let schedule = schedule_for(&args.model, train_dim, FeatureSchedule::all(train_dim))?;
    let predictor = build_predictor(args.model.model, args.ridge, schedule, args.model.mc_samples, args.model.seed);
    let result = batch_predict(args.model.model, predictor.as_ref(), &train, train_dim, &test, test_file.columns, &ladder)?;
    let header: Vec<String> = ladder.levels().iter().map(|e| format!("eps={e}")).collect();
    for (suffix, rows) in [("_lower.csv", &result.lower), ("_upper.csv", &result.upper)] {
        let m = MatrixFile::new(ladder.len(), rows.clone())
            .map_err(Failure::Data)?
            .with_header(header.clone());
        save_matrix(&m, with_suffix(&args.out, suffix)).map_err(write_failure)?;
    }
    std::fs::write(&code_path, format!("{}\n", result.code)).map_err(|e| Failure::Io(Error::io(&code_path, e)))?;
    Ok(result.code)
}

pub fn cmd_online(args: &OnlineArgs) -> Outcome {
    let ladder = parse_epsilons(&args.model.epsilons)?;
    if !(args.ridge >= 0.0 && args.ridge.is_finite()) {
        return Err(Failure::Usage(format!("ridge must be a nonnegative number, got {}", args.ridge)));
    }
    let file = load_matrix(&args.data).map_err(Failure::data)?;
    let stream = file.to_observations().map_err(Failure::data)?;
    let dim = file.columns - 1;
    let schedule = schedule_for(&args.model, dim, FeatureSchedule::experiment_default(dim))?;
    let predictor = build_predictor(args.model.model, args.ridge, schedule, args.model.mc_samples, args.model.seed);
    let config = OnlineConfig {
        smoothed: args.smoothed,
        seed: args.model.seed,
        record_p_values: !args.skip_p_values,
    };
    let record = run_online(predictor.as_ref(), &stream, &ladder, &config).map_err(Failure::numerical)?;
    emit_series(&record.ledger, SeriesKind::CumulativeErrors, with_suffix(&args.out_prefix, "_errors.csv"))
        .map_err(write_failure)?;
    emit_series(&record.ledger, SeriesKind::MedianAccuracy, with_suffix(&args.out_prefix, "_median.csv"))
        .map_err(write_failure)?;
    write_json(&record, with_suffix(&args.out_prefix, "_ledger.json")).map_err(write_failure)?;
    Ok(0)
}

pub fn cmd_report(args: &ReportArgs) -> Outcome {
    let record: OnlineRecord = read_json(&args.ledger).map_err(Failure::data)?;
    let report = validity_report(&record.ledger, record.trace.as_ref(), args.first_step);
    write_json(&report, &args.out).map_err(write_failure)?;
    Ok(0)
}

/// Parses `args` and runs the command, printing diagnostics to stderr.
pub fn main_with_args<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("predreg: {failure}");
            failure.exit_code()
        }
    }
}
