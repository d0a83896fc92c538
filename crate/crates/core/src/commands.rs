//! The command layer behind the `uq` binary: typed configurations, file
//! artifacts and run manifests.
//!
//! Every command writes a manifest next to its outputs (`<dir>/manifest.json`
//! for directory outputs, `<file>.manifest.json` otherwise). A manifest holds
//! the fully resolved configuration, so [`rerun`] reproduces the outputs
//! bit for bit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{
    adversarial_group_calibration, calibration_curve, CalibrationCurve, CalibrationError, DEFAULT_SUBGROUPS,
    DEFAULT_TRIALS,
};
use crate::data::{DataError, LabeledDataset, PredictionSet, RngSeed};
use crate::io::{self, IoError};
use crate::neural::{train, Activation, LossKind, MlpConfig, MlpModel, NeuralError, Optimizer, TrainConfig};
use crate::recalibration::{
    apply_scalar, fit_scalar_with, RecalibrationError, RecalibrationOptions, RecalibrationResult, DEFAULT_BRACKET_HI,
    DEFAULT_BRACKET_LO,
};
use crate::report::{self, MetricsReport, ReportOptions, DEFAULT_VIOLIN_POINTS};
use crate::screening::{
    screen, ScreenCriteria, ScreenError, ScreenReport, DEFAULT_HONESTY_MULTIPLIER, DEFAULT_SIGMA_MAX, DEFAULT_VALUE_HI,
    DEFAULT_VALUE_LO,
};
use crate::synthetic::{generate, GeneratorConfig};
use crate::uq_methods::{
    ensemble_predict, evidential_predict, mc_dropout_predict, train_ensemble, DropoutError, DropoutSpec, EnsembleError,
    EnsembleSpec, EvidentialError, MemberTraining, UncertaintyChannel, UncertaintyOutput, DEFAULT_DROPOUT_RATE,
    DEFAULT_K, DEFAULT_LAMBDA, DEFAULT_MC_SAMPLES,
};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DEFAULT_N_TRAIN: usize = 5000;
pub const DEFAULT_N_TEST: usize = 2000;
pub const DEFAULT_DIM: usize = 1;
pub const DEFAULT_GROUPS: usize = 3;
pub const DEFAULT_HIDDEN: [usize; 2] = [32, 32];
pub const DEFAULT_EPOCHS: usize = 400;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_LEARNING_RATE: f64 = 0.002;
pub const DEFAULT_FRACTIONS: [f64; 9] = [0.005, 0.01, 0.015, 0.02, 0.05, 0.1, 0.25, 0.5, 1.0];
pub const DEFAULT_FIT_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Dropout(#[from] DropoutError),
    #[error(transparent)]
    Evidential(#[from] EvidentialError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Recalibration(#[from] RecalibrationError),
    #[error(transparent)]
    Screen(#[from] ScreenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ensemble,
    Dropout,
    Evidential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitPolicy {
    /// Fit the scalar on the file being recalibrated.
    #[serde(rename = "self")]
    SelfFit,
    /// Fit on a seeded random subset of the file, keeping the rest out of
    /// the fit.
    #[default]
    Split,
    /// Fit on a separate prediction file.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateCommand {
    pub out: PathBuf,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCommand {
    pub method: Method,
    pub train: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub k: usize,
    pub member_training: MemberTraining,
    pub dropout_rate: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictCommand {
    pub model: PathBuf,
    pub test: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub samples: usize,
    /// Overrides the rate stored in a dropout checkpoint.
    #[serde(default)]
    pub dropout_rate: Option<f64>,
    pub uncertainty: UncertaintyChannel,
    pub sqrt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateCommand {
    pub predictions: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub grid_size: usize,
    pub violin_points: usize,
    pub honesty_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialCommand {
    pub predictions: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub fractions: Vec<f64>,
    pub trials: usize,
    pub subgroups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecalibrateCommand {
    pub predictions: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub fit: FitPolicy,
    pub fit_fraction: f64,
    #[serde(default)]
    pub fit_file: Option<PathBuf>,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenCommand {
    pub predictions: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub value_lo: f64,
    pub value_hi: f64,
    pub sigma_max: f64,
    pub honesty_multiplier: f64,
}

impl GenerateCommand {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self {
            out: out.into(),
            seed: 0,
            n_train: DEFAULT_N_TRAIN,
            n_test: DEFAULT_N_TEST,
            dim: DEFAULT_DIM,
            groups: DEFAULT_GROUPS,
        }
    }
}

impl TrainCommand {
    pub fn new(method: Method, train: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            method,
            train: train.into(),
            out: out.into(),
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            activation: Activation::Relu,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            k: DEFAULT_K,
            member_training: MemberTraining::OneFoldEach,
            dropout_rate: DEFAULT_DROPOUT_RATE,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl PredictCommand {
    pub fn new(model: impl Into<PathBuf>, test: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            model: model.into(),
            test: test.into(),
            out: out.into(),
            seed: 0,
            samples: DEFAULT_MC_SAMPLES,
            dropout_rate: None,
            uncertainty: UncertaintyChannel::Epistemic,
            sqrt: false,
        }
    }
}

impl EvaluateCommand {
    pub fn new(predictions: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        let o = ReportOptions::default();
        Self {
            predictions: predictions.into(),
            out: out.into(),
            seed: 0,
            grid_size: o.grid_size,
            violin_points: DEFAULT_VIOLIN_POINTS,
            honesty_multiplier: o.honesty_multiplier,
        }
    }
}

impl AdversarialCommand {
    pub fn new(predictions: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            predictions: predictions.into(),
            out: out.into(),
            seed: 0,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            trials: DEFAULT_TRIALS,
            subgroups: DEFAULT_SUBGROUPS,
        }
    }
}

impl RecalibrateCommand {
    pub fn new(predictions: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            predictions: predictions.into(),
            out: out.into(),
            seed: 0,
            fit: FitPolicy::Split,
            fit_fraction: DEFAULT_FIT_FRACTION,
            fit_file: None,
            bracket_lo: DEFAULT_BRACKET_LO,
            bracket_hi: DEFAULT_BRACKET_HI,
        }
    }
}

impl ScreenCommand {
    pub fn new(predictions: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            predictions: predictions.into(),
            out: out.into(),
            seed: 0,
            value_lo: DEFAULT_VALUE_LO,
            value_hi: DEFAULT_VALUE_HI,
            sigma_max: DEFAULT_SIGMA_MAX,
            honesty_multiplier: DEFAULT_HONESTY_MULTIPLIER,
        }
    }
}

/// One resolved command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum Command {
    Generate(GenerateCommand),
    Train(TrainCommand),
    Predict(PredictCommand),
    Evaluate(EvaluateCommand),
    Adversarial(AdversarialCommand),
    Recalibrate(RecalibrateCommand),
    Screen(ScreenCommand),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub run: Command,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
    /// Set when the command failed after writing some outputs.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub method: Method,
    pub models: Vec<MlpModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecalibrationReport {
    pub schema_version: u32,
    pub scalar: f64,
    /// Miscalibration area of the whole input file before and after scaling.
    pub area_before: f64,
    pub area_after: f64,
    pub fit_policy: FitPolicy,
    pub n_fit: usize,
    /// Optimizer details on the fitting set.
    pub fit: RecalibrationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenOutput {
    pub schema_version: u32,
    pub report: ScreenReport,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Generate(_) => "generate",
            Self::Train(_) => "train",
            Self::Predict(_) => "predict",
            Self::Evaluate(_) => "evaluate",
            Self::Adversarial(_) => "adversarial",
            Self::Recalibrate(_) => "recalibrate",
            Self::Screen(_) => "screen",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::Generate(c) => c.seed,
            Self::Train(c) => c.seed,
            Self::Predict(c) => c.seed,
            Self::Evaluate(c) => c.seed,
            Self::Adversarial(c) => c.seed,
            Self::Recalibrate(c) => c.seed,
            Self::Screen(c) => c.seed,
        }
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Self::Generate(_) => vec![],
            Self::Train(c) => vec![c.train.clone()],
            Self::Predict(c) => vec![c.model.clone(), c.test.clone()],
            Self::Evaluate(c) => vec![c.predictions.clone()],
            Self::Adversarial(c) => vec![c.predictions.clone()],
            Self::Recalibrate(c) => std::iter::once(c.predictions.clone())
                .chain(c.fit_file.clone())
                .collect(),
            Self::Screen(c) => vec![c.predictions.clone()],
        }
    }

    /// Where this command's manifest lives.
    pub fn manifest_path(&self) -> PathBuf {
        match self {
            Self::Generate(c) => c.out.join("manifest.json"),
            Self::Evaluate(c) => c.out.join("manifest.json"),
            Self::Recalibrate(c) => c.out.join("manifest.json"),
            Self::Train(c) => sidecar(&c.out),
            Self::Predict(c) => sidecar(&c.out),
            Self::Adversarial(c) => sidecar(&c.out),
            Self::Screen(c) => sidecar(&c.out),
        }
    }
}

fn sidecar(file: &Path) -> PathBuf {
    let mut s = file.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Default)]
struct Outputs(Vec<PathBuf>);

impl Outputs {
    fn add(&mut self, p: &Path) {
        self.0.push(p.to_path_buf());
    }
}

/// Runs a command and writes its manifest. On failure, a manifest carrying
/// the error is still written if any output file was produced.
pub fn execute(cmd: &Command) -> Result<RunManifest, CommandError> {
    let start = Instant::now();
    let mut out = Outputs::default();
    let result = match cmd {
        Command::Generate(c) => run_generate(c, &mut out),
        Command::Train(c) => run_train(c, &mut out),
        Command::Predict(c) => run_predict(c, &mut out),
        Command::Evaluate(c) => run_evaluate(c, &mut out),
        Command::Adversarial(c) => run_adversarial(c, &mut out),
        Command::Recalibrate(c) => run_recalibrate(c, &mut out),
        Command::Screen(c) => run_screen(c, &mut out),
    };
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION.to_string(),
        run: cmd.clone(),
        seed: cmd.seed(),
        inputs: cmd.inputs(),
        outputs: out.0,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    if result.is_ok() || !manifest.outputs.is_empty() {
        io::write_json(&cmd.manifest_path(), &manifest)?;
    }
    result.map(|_| manifest)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CommandError> {
    Ok(io::read_json(path)?)
}

/// Executes the command recorded in a manifest file again.
pub fn rerun(manifest: &Path) -> Result<RunManifest, CommandError> {
    execute(&read_manifest(manifest)?.run)
}

fn run_generate(c: &GenerateCommand, out: &mut Outputs) -> Result<(), CommandError> {
    if c.dim == 0 {
        return Err(CommandError::Config("dim must be at least 1".into()));
    }
    let base = RngSeed::new(c.seed);
    for (name, n, tag, prefix) in [
        ("train.csv", c.n_train, 0, "train-"),
        ("test.csv", c.n_test, 1, "test-"),
    ] {
        let d = generate(
            &GeneratorConfig {
                n,
                dim: c.dim,
                groups: c.groups,
                seed: base.derive(tag),
            },
            prefix,
        );
        let path = c.out.join(name);
        io::write_dataset(&path, &d, c.dim)?;
        out.add(&path);
    }
    Ok(())
}

fn read_training_set(path: &Path) -> Result<LabeledDataset, CommandError> {
    let d = io::read_dataset(path)?;
    if d.is_empty() {
        return Err(DataError::Empty.into());
    }
    Ok(d)
}

fn run_train(c: &TrainCommand, out: &mut Outputs) -> Result<(), CommandError> {
    if c.hidden.is_empty() {
        return Err(CommandError::Config("at least one hidden layer is required".into()));
    }
    let data = read_training_set(&c.train)?;
    let base = RngSeed::new(c.seed);
    let head = if c.method == Method::Evidential { 4 } else { 1 };
    let mut widths = vec![data.dim()];
    widths.extend(&c.hidden);
    widths.push(head);
    let mlp = MlpConfig {
        layer_widths: widths,
        activation: c.activation,
        dropout_rate: if c.method == Method::Dropout {
            c.dropout_rate
        } else {
            0.0
        },
        seed: base.derive(0),
    };
    let loss = match c.method {
        Method::Evidential => LossKind::Evidential { lambda: c.lambda },
        _ => LossKind::SquaredError,
    };
    let cfg = TrainConfig {
        epochs: c.epochs,
        batch_size: c.batch_size,
        learning_rate: c.learning_rate,
        loss,
        optimizer: Optimizer::Sgd,
        seed: base.derive(1),
    };
    let models = match c.method {
        Method::Ensemble => train_ensemble(
            &data,
            &EnsembleSpec {
                k: c.k,
                member_training: c.member_training,
                mlp,
                train: cfg,
                split_seed: base.derive(2),
            },
        )?,
        Method::Dropout | Method::Evidential => {
            let outcome = train(MlpModel::new(mlp)?, &data, &cfg)?;
            if let Some(last) = outcome.loss_history.last() {
                log::info!("final training loss {last}");
            }
            vec![outcome.model]
        }
    };
    let ckpt = Checkpoint {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        method: c.method,
        models,
    };
    io::write_json(&c.out, &ckpt)?;
    out.add(&c.out);
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CommandError> {
    let ckpt: Checkpoint = io::read_json(path)?;
    if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(CommandError::Config(format!(
            "checkpoint schema {} is not supported",
            ckpt.schema_version
        )));
    }
    if ckpt.models.is_empty() {
        return Err(CommandError::Config("checkpoint holds no models".into()));
    }
    Ok(ckpt)
}

fn run_predict(c: &PredictCommand, out: &mut Outputs) -> Result<(), CommandError> {
    let ckpt = read_checkpoint(&c.model)?;
    let test = io::read_dataset(&c.test)?;
    let p = if test.is_empty() {
        PredictionSet {
            ids: vec![],
            y_true: vec![],
            mu: vec![],
            sigma: vec![],
            groups: test.groups.clone(),
        }
    } else {
        match ckpt.method {
            Method::Ensemble => ensemble_predict(&ckpt.models, &test)?,
            Method::Dropout => {
                let m = &ckpt.models[0];
                let spec = DropoutSpec {
                    samples: c.samples,
                    rate: c.dropout_rate.unwrap_or(m.config.dropout_rate),
                    seed: RngSeed::new(c.seed),
                };
                mc_dropout_predict(m, &test, &spec)?
            }
            Method::Evidential => evidential_predict(
                &ckpt.models[0],
                &test,
                UncertaintyOutput {
                    channel: c.uncertainty,
                    sqrt: c.sqrt,
                },
            )?,
        }
    };
    io::write_predictions(&c.out, &p)?;
    out.add(&c.out);
    Ok(())
}

fn run_evaluate(c: &EvaluateCommand, out: &mut Outputs) -> Result<(), CommandError> {
    let p = io::read_predictions(&c.predictions)?;
    let e = report::evaluate(
        &p,
        &ReportOptions {
            grid_size: c.grid_size,
            violin_points: c.violin_points,
            honesty_multiplier: c.honesty_multiplier,
        },
    );
    for msg in &e.report.errors {
        log::warn!("{msg}");
    }
    let report_path = c.out.join("report.json");
    io::write_json(&report_path, &e.report)?;
    out.add(&report_path);

    let curve_path = c.out.join("calibration_curve.csv");
    match &e.curve {
        Some(curve) => io::write_calibration_curve(&curve_path, curve)?,
        None => io::write_calibration_curve(
            &curve_path,
            &CalibrationCurve {
                expected: vec![],
                observed: vec![],
                miscalibration_area: f64::NAN,
                n_used: 0,
                n_excluded_zero_sigma: 0,
            },
        )?,
    }
    out.add(&curve_path);

    let violin_path = c.out.join("violin.csv");
    match &e.violin {
        Some(v) => io::write_density(&violin_path, &v.eval_grid, &v.density)?,
        None => io::write_density(&violin_path, &[], &[])?,
    }
    out.add(&violin_path);
    Ok(())
}

fn run_adversarial(c: &AdversarialCommand, out: &mut Outputs) -> Result<(), CommandError> {
    let p = io::read_predictions(&c.predictions)?;
    let curve = adversarial_group_calibration(&p, &c.fractions, c.trials, c.subgroups, RngSeed::new(c.seed))?;
    io::write_adversarial_curve(&c.out, &curve)?;
    out.add(&c.out);
    Ok(())
}

/// Scalar fitted under the configured policy, with the fitting set size.
pub fn fit_for_policy(c: &RecalibrateCommand, p: &PredictionSet) -> Result<(RecalibrationResult, usize), CommandError> {
    let fit_set = match c.fit {
        FitPolicy::SelfFit => p.clone(),
        FitPolicy::Split => {
            if !(c.fit_fraction > 0.0 && c.fit_fraction <= 1.0) {
                return Err(CommandError::Config(format!(
                    "fit_fraction {} outside (0, 1]",
                    c.fit_fraction
                )));
            }
            let size = ((c.fit_fraction * p.len() as f64).round() as usize).clamp(1, p.len().max(1));
            let mut idx: Vec<usize> =
                rand::seq::index::sample(&mut RngSeed::new(c.seed).rng(), p.len(), size.min(p.len())).into_vec();
            idx.sort_unstable();
            p.subset(&idx)
        }
        FitPolicy::File => {
            let path = c
                .fit_file
                .as_ref()
                .ok_or_else(|| CommandError::Config("fit policy `file` needs fit_file".into()))?;
            io::read_predictions(path)?
        }
    };
    let opts = RecalibrationOptions {
        bracket_lo: c.bracket_lo,
        bracket_hi: c.bracket_hi,
        ..Default::default()
    };
    Ok((fit_scalar_with(&fit_set, opts)?, fit_set.len()))
}

fn run_recalibrate(c: &RecalibrateCommand, out: &mut Outputs) -> Result<(), CommandError> {
    let p = io::read_predictions(&c.predictions)?;
    let (fit, n_fit) = fit_for_policy(c, &p)?;
    let scaled = apply_scalar(&p, fit.scalar)?;
    let grid = fit.options.grid_size;
    let area = |q: &PredictionSet| calibration_curve(q, grid).map(|cv| cv.miscalibration_area);
    let rep = RecalibrationReport {
        schema_version: report::REPORT_SCHEMA_VERSION,
        scalar: fit.scalar,
        area_before: area(&p)?,
        area_after: area(&scaled)?,
        fit_policy: c.fit,
        n_fit,
        fit,
    };
    let csv_path = c.out.join("recalibrated.csv");
    io::write_predictions(&csv_path, &scaled)?;
    out.add(&csv_path);
    let json_path = c.out.join("recalibration.json");
    io::write_json(&json_path, &rep)?;
    out.add(&json_path);
    Ok(())
}

fn run_screen(c: &ScreenCommand, out: &mut Outputs) -> Result<(), CommandError> {
    let p = io::read_predictions(&c.predictions)?;
    let criteria = ScreenCriteria {
        value_lo: c.value_lo,
        value_hi: c.value_hi,
        sigma_max: c.sigma_max,
        honesty_multiplier: c.honesty_multiplier,
    };
    let report = screen(&p, &criteria)?;
    io::write_json(
        &c.out,
        &ScreenOutput {
            schema_version: report::REPORT_SCHEMA_VERSION,
            report,
        },
    )?;
    out.add(&c.out);
    Ok(())
}

/// Parsed `report.json` from an evaluate run.
pub fn read_report(path: &Path) -> Result<MetricsReport, CommandError> {
    Ok(io::read_json(path)?)
}
