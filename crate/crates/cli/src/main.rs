//! `uq`: generate data, train UQ models, and evaluate their predictions.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;
use uq_core::commands::{self, Command, CommandError};

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot read config {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("config {path} is for `{found}`, not `{expected}`")]
    WrongCommand {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("config {path}: unknown key `{key}`")]
    UnknownKey { path: PathBuf, key: String },
    #[error("invalid options: {0}")]
    Options(String),
    #[error(transparent)]
    Command(#[from] CommandError),
}

#[derive(Parser, Debug)]
#[command(name = "uq", version, about = "Uncertainty quantification for regression models")]
struct Cli {
    /// JSON file whose keys mirror the flags of the chosen subcommand. A run
    /// manifest is accepted too, which re-runs that command. Flags given on
    /// the command line override the file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Write synthetic heteroscedastic train.csv and test.csv
    Generate(GenerateArgs),
    /// Train an ensemble, dropout or evidential model and write a checkpoint
    Train(TrainArgs),
    /// Predict mean and sigma for a dataset from a checkpoint
    Predict(PredictArgs),
    /// Compute the metric report, calibration curve and sigma distribution
    Evaluate(EvaluateArgs),
    /// Adversarial group calibration curve
    Adversarial(AdversarialArgs),
    /// Fit a scalar sigma multiplier and write rescaled predictions
    Recalibrate(RecalibrateArgs),
    /// Select candidates by value window and sigma, then check 3-sigma honesty
    Screen(ScreenArgs),
}

#[derive(clap::Args, Debug, Serialize)]
struct GenerateArgs {
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = commands::DEFAULT_N_TRAIN)]
    n_train: usize,
    #[arg(long, default_value_t = commands::DEFAULT_N_TEST)]
    n_test: usize,
    /// Number of input features
    #[arg(long, default_value_t = commands::DEFAULT_DIM)]
    dim: usize,
    /// Number of group tags (0 omits the group column)
    #[arg(long, default_value_t = commands::DEFAULT_GROUPS)]
    groups: usize,
}

#[derive(clap::Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long, value_parser = ["ensemble", "dropout", "evidential"])]
    method: Option<String>,
    /// Training dataset CSV
    #[arg(long)]
    train: Option<PathBuf>,
    /// Checkpoint JSON to write
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden layer widths
    #[arg(long, value_delimiter = ',', default_value = "32,32")]
    hidden: Vec<usize>,
    #[arg(long, default_value = "relu", value_parser = ["relu", "tanh", "softplus", "linear"])]
    activation: String,
    #[arg(long, default_value_t = commands::DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = commands::DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = commands::DEFAULT_LEARNING_RATE)]
    learning_rate: f64,
    /// Ensemble size
    #[arg(long, default_value_t = uq_core::uq_methods::DEFAULT_K)]
    k: usize,
    /// Which data each ensemble member sees
    #[arg(long, default_value = "one_fold_each", value_parser = ["one_fold_each", "leave_one_fold_out"])]
    member_training: String,
    #[arg(long, default_value_t = uq_core::uq_methods::DEFAULT_DROPOUT_RATE)]
    dropout_rate: f64,
    /// Evidential regularization weight
    #[arg(long, default_value_t = uq_core::uq_methods::DEFAULT_LAMBDA)]
    lambda: f64,
}

#[derive(clap::Args, Debug, Serialize)]
struct PredictArgs {
    /// Checkpoint JSON
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset CSV to predict
    #[arg(long)]
    test: Option<PathBuf>,
    /// Prediction CSV to write
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo dropout passes
    #[arg(long, default_value_t = uq_core::uq_methods::DEFAULT_MC_SAMPLES)]
    samples: usize,
    /// Dropout rate at inference [default: the checkpoint's rate]
    #[arg(long)]
    dropout_rate: Option<f64>,
    /// Evidential uncertainty reported as sigma
    #[arg(long, default_value = "epistemic", value_parser = ["epistemic", "aleatoric"])]
    uncertainty: String,
    /// Take the square root of the evidential uncertainty
    #[arg(long)]
    sqrt: bool,
}

#[derive(clap::Args, Debug, Serialize)]
struct EvaluateArgs {
    /// Prediction CSV
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interior points of the calibration curve
    #[arg(long, default_value_t = uq_core::calibration::DEFAULT_GRID_SIZE)]
    grid_size: usize,
    /// Points in the sigma density table
    #[arg(long, default_value_t = uq_core::report::DEFAULT_VIOLIN_POINTS)]
    violin_points: usize,
    #[arg(long, default_value_t = uq_core::screening::DEFAULT_HONESTY_MULTIPLIER)]
    honesty_multiplier: f64,
}

#[derive(clap::Args, Debug, Serialize)]
struct AdversarialArgs {
    /// Prediction CSV
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Curve CSV to write
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Group sizes as fractions of the data
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.005,0.01,0.015,0.02,0.05,0.1,0.25,0.5,1"
    )]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = uq_core::calibration::DEFAULT_TRIALS)]
    trials: usize,
    /// Random subgroups drawn per trial
    #[arg(long, default_value_t = uq_core::calibration::DEFAULT_SUBGROUPS)]
    subgroups: usize,
}

#[derive(clap::Args, Debug, Serialize)]
struct RecalibrateArgs {
    /// Prediction CSV
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Data used to fit the scalar
    #[arg(long, default_value = "split", value_parser = ["split", "self", "file"])]
    fit: String,
    /// Share of rows used for fitting with `--fit split`
    #[arg(long, default_value_t = commands::DEFAULT_FIT_FRACTION)]
    fit_fraction: f64,
    /// Prediction CSV used for fitting with `--fit file`
    #[arg(long)]
    fit_file: Option<PathBuf>,
    #[arg(long, default_value_t = uq_core::recalibration::DEFAULT_BRACKET_LO)]
    bracket_lo: f64,
    #[arg(long, default_value_t = uq_core::recalibration::DEFAULT_BRACKET_HI)]
    bracket_hi: f64,
}

#[derive(clap::Args, Debug, Serialize)]
struct ScreenArgs {
    /// Prediction CSV
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Report JSON to write
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = uq_core::screening::DEFAULT_VALUE_LO, allow_negative_numbers = true)]
    value_lo: f64,
    #[arg(long, default_value_t = uq_core::screening::DEFAULT_VALUE_HI, allow_negative_numbers = true)]
    value_hi: f64,
    #[arg(long, default_value_t = uq_core::screening::DEFAULT_SIGMA_MAX)]
    sigma_max: f64,
    #[arg(long, default_value_t = uq_core::screening::DEFAULT_HONESTY_MULTIPLIER)]
    honesty_multiplier: f64,
}

/// Config file contents for one subcommand: either a flat object of flag
/// values or a run manifest.
fn load_config(path: &Path, expected: &str) -> Result<Map<String, Value>, CliError> {
    let bad = |message: String| CliError::ConfigFile {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(bad("expected a JSON object".into()));
    };
    if let Some(Value::Object(mut run)) = obj.remove("run") {
        let found = run.get("command").and_then(Value::as_str).unwrap_or("").to_string();
        if found != expected {
            return Err(CliError::WrongCommand {
                path: path.to_path_buf(),
                expected: expected.into(),
                found,
            });
        }
        return match run.remove("config") {
            Some(Value::Object(cfg)) => Ok(cfg),
            _ => Err(bad("manifest has no config object".into())),
        };
    }
    Ok(obj)
}

/// Layers flag values over the config file: a flag wins only when it was
/// typed on the command line.
fn resolve<A: Serialize>(name: &str, args: &A, matches: &ArgMatches, config: Option<&Path>) -> Result<Value, CliError> {
    let Value::Object(mut merged) = serde_json::to_value(args).map_err(|e| CliError::Options(e.to_string()))? else {
        unreachable!("argument structs serialize to objects")
    };
    if let Some(path) = config {
        for (key, v) in load_config(path, name)? {
            if !merged.contains_key(&key) {
                return Err(CliError::UnknownKey {
                    path: path.to_path_buf(),
                    key,
                });
            }
            if matches.value_source(&key) != Some(ValueSource::CommandLine) {
                merged.insert(key, v);
            }
        }
    }
    merged.retain(|_, v| !v.is_null());
    Ok(Value::Object(merged))
}

fn build(cli: &Cli, matches: &ArgMatches) -> Result<Command, CliError> {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let config = cli.config.as_deref();
    let cfg = match &cli.command {
        Sub::Generate(a) => resolve(name, a, sub, config)?,
        Sub::Train(a) => resolve(name, a, sub, config)?,
        Sub::Predict(a) => resolve(name, a, sub, config)?,
        Sub::Evaluate(a) => resolve(name, a, sub, config)?,
        Sub::Adversarial(a) => resolve(name, a, sub, config)?,
        Sub::Recalibrate(a) => resolve(name, a, sub, config)?,
        Sub::Screen(a) => resolve(name, a, sub, config)?,
    };
    let tagged = serde_json::json!({ "command": name, "config": cfg });
    serde_json::from_value(tagged).map_err(|e| CliError::Options(e.to_string()))
}

fn run() -> Result<(), CliError> {
    let matches = Cli::command().get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let cmd = build(&cli, &matches)?;
    let manifest = commands::execute(&cmd)?;
    for p in &manifest.outputs {
        println!("{}", p.display());
    }
    println!("{}", cmd.manifest_path().display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
