//! Command-line interface: argument parsing and the command runners.
//!
//! Every runner writes human-readable progress to `out` and its artifacts to
//! the paths given on the command line. All randomness is seeded from flags.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jhat_core::cloud::SampleSet;
use jhat_core::estimator::{fit_with_observer, PreparedData, TrainObserver, TrainedEstimator};
use jhat_core::evaluation::{e_delta_sweep, e_star_delta_sweep, export_vector_field, ErrorReport, FieldGrid};
use jhat_core::field::{Difference, JacobianField};
use jhat_core::neighbors::{build_pairs, NeighborIndex};
use jhat_core::nn::lipschitz_upper_bound;
use jhat_core::testbed::{add_noise, NoiseSpec, TestFunction};
use jhat_core::theory::{empirical_bound_check, epsilon_density, neighbor_system_stats, residual_max, PartialBounds};

use crate::config::TrainSettings;
use crate::dataset::{column_names, read_dataset, read_points, write_dataset, write_rows};
use crate::error::{Error, Result};
use crate::model::{load_model, save_model, Radius};
use crate::report::{field_header, to_json, write_field, write_json, ErrorRecord, TheoryRecord};

/// Neural Jacobian estimation from scattered samples.
#[derive(Debug, Parser)]
#[command(name = "jhat", version)]
pub struct Cli {
    /// Command to run.
    #[command(subcommand)]
    pub command: Command,
}

/// Available commands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a bank function on its domain and write a dataset.
    GenData(GenDataArgs),
    /// Train an estimator on a dataset and write the model.
    Train(TrainArgs),
    /// Report E_delta (oracle mode) or E*_delta (star mode).
    Evaluate(EvaluateArgs),
    /// Predict Jacobians (and optionally function values) at query points.
    Predict(PredictArgs),
    /// Evaluate a field on a regular grid for quiver plots.
    ExportField(ExportFieldArgs),
    /// Measure the constants of the uniform error bound and check it.
    VerifyTheory(VerifyTheoryArgs),
}

/// `gen-data` flags.
#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Bank function name, e.g. F0.
    #[arg(long)]
    pub function: String,
    /// Number of samples.
    #[arg(long, short = 'n')]
    pub n: usize,
    /// Seed for the sample positions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of Gaussian noise added to the outputs.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Seed for the noise; defaults to `seed + 1`.
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Output dataset path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Estimator settings given as flags; each overrides the settings file.
#[derive(Debug, Args, Default)]
pub struct SettingsFlags {
    /// Settings file (TOML, or JSON when the extension is .json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hidden layer widths, comma separated.
    #[arg(long, alias = "layers", value_delimiter = ',')]
    pub hidden_layers: Option<Vec<usize>>,
    /// Neighbors per sample point.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Neighbor radius, or "inf".
    #[arg(long)]
    pub r_max: Option<Radius>,
    /// Batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long, alias = "lr")]
    pub learning_rate: Option<f64>,
    /// Max-norm of incoming weights (0 disables).
    #[arg(long, alias = "max-w")]
    pub max_weight_norm: Option<f64>,
    /// Seed for initialization and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SettingsFlags {
    /// File settings overlaid with the flags.
    pub fn settings(&self) -> Result<TrainSettings> {
        let base = match &self.config {
            Some(p) => TrainSettings::load(p)?,
            None => TrainSettings::default(),
        };
        Ok(base.overlay(TrainSettings {
            input_dim: None,
            output_dim: None,
            hidden_layers: self.hidden_layers.clone(),
            k_max: self.k_max,
            r_max: self.r_max,
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            max_weight_norm: self.max_weight_norm,
            seed: self.seed,
        }))
    }
}

/// `train` flags.
#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Estimator settings.
    #[command(flatten)]
    pub settings: SettingsFlags,
    /// Output model path.
    #[arg(long)]
    pub out: PathBuf,
    /// Suppress per-epoch lines.
    #[arg(long)]
    pub quiet: bool,
}

/// Reference used by `evaluate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Compare against a bank function's analytic Jacobian.
    Oracle,
    /// Linear-approximation residuals on a held-out dataset.
    Star,
}

/// `evaluate` flags.
#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Metric to compute.
    #[arg(long, value_enum, default_value_t = EvalMode::Oracle)]
    pub mode: EvalMode,
    /// Bank function (oracle mode).
    #[arg(long)]
    pub function: Option<String>,
    /// Held-out dataset (star mode).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Thresholds; default 0,0.001,0.01,0.1 (oracle) or 0.01 (star).
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// Random evaluation points (oracle mode).
    #[arg(long, default_value_t = 1_000_000)]
    pub points: usize,
    /// Seed for the evaluation points.
    #[arg(long, default_value_t = 1)]
    pub points_seed: u64,
    /// Neighbor count for star mode; defaults to the model's.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Neighbor radius for star mode; defaults to the model's.
    #[arg(long)]
    pub r_max: Option<Radius>,
    /// Also write the reports to this JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `predict` flags.
#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Query points (columns x0..).
    #[arg(long)]
    pub points: PathBuf,
    /// Training samples; when given, function values are predicted too.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Output file: x columns, Jacobian entries, then predicted y columns.
    #[arg(long)]
    pub out: PathBuf,
}

/// Field written by `export-field`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldMode {
    /// The trained estimator.
    Estimate,
    /// The analytic Jacobian.
    Oracle,
    /// Estimator minus analytic Jacobian.
    Difference,
}

/// `export-field` flags.
#[derive(Debug, Args)]
pub struct ExportFieldArgs {
    /// Which field to export.
    #[arg(long, value_enum)]
    pub mode: FieldMode,
    /// Model file (estimate and difference modes).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Bank function (oracle and difference modes; sets the default box).
    #[arg(long)]
    pub function: Option<String>,
    /// Nodes per axis.
    #[arg(long, default_value_t = 20)]
    pub resolution: usize,
    /// Lower box corner: one value for every axis, or one per axis.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lower: Option<Vec<f64>>,
    /// Upper box corner: one value for every axis, or one per axis.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub upper: Option<Vec<f64>>,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

/// `verify-theory` flags.
#[derive(Debug, Args)]
pub struct VerifyTheoryArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Bank function the model was trained on.
    #[arg(long)]
    pub function: String,
    /// Training dataset of the model.
    #[arg(long)]
    pub data: PathBuf,
    /// Near-orthogonality parameter in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Random probes for the density estimate.
    #[arg(long, default_value_t = 10_000)]
    pub probes: usize,
    /// Random points for the error check.
    #[arg(long, default_value_t = 10_000)]
    pub points: usize,
    /// Sample points searched for near-orthogonal neighbor systems.
    #[arg(long, default_value_t = 1_000)]
    pub systems: usize,
    /// Seed for probes and check points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report to this JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command, writing progress and results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(&a, out),
        Command::Train(a) => train(&a, out).map(|_| ()),
        Command::Evaluate(a) => evaluate(&a, out).map(|_| ()),
        Command::Predict(a) => predict(&a, out),
        Command::ExportField(a) => export_field(&a, out),
        Command::VerifyTheory(a) => verify_theory(&a, out).map(|_| ()),
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

/// `gen-data`.
pub fn gen_data(a: &GenDataArgs, out: &mut dyn Write) -> Result<()> {
    let f = TestFunction::by_name(&a.function)?;
    let samples = SampleSet::from_function(&f, f.sample_domain(a.n, a.seed))?;
    let samples = if a.noise_sigma != 0.0 {
        let spec = NoiseSpec {
            sigma: a.noise_sigma,
            seed: a.noise_seed.unwrap_or(a.seed.wrapping_add(1)),
        };
        let noisy = add_noise(samples.outputs(), spec)?;
        samples.with_outputs(noisy)?
    } else {
        samples
    };
    write_dataset(&a.out, &samples)?;
    say(
        out,
        format_args!("wrote {} samples of {} to {}", samples.len(), f.name(), a.out.display()),
    )
}

struct Progress<'a> {
    out: &'a mut dyn Write,
    quiet: bool,
    epochs: usize,
    failed: Option<std::io::Error>,
}

impl Progress<'_> {
    fn line(&mut self, args: std::fmt::Arguments<'_>) {
        if self.failed.is_none() {
            if let Err(e) = writeln!(self.out, "{args}") {
                self.failed = Some(e);
            }
        }
    }
}

impl TrainObserver for Progress<'_> {
    fn prepared(&mut self, p: &PreparedData) {
        self.line(format_args!(
            "neighbor distance min/avg/max: {} / {} / {}",
            p.stats.min_distance, p.stats.mean_distance, p.stats.max_distance
        ));
        self.line(format_args!(
            "training pairs: {} (points without neighbors: {})",
            p.pair_count, p.stats.isolated_points
        ));
        self.line(format_args!(
            "finalized batch size: {} (padding {}, {} batches per epoch)",
            p.batch_size, p.padding, p.batches_per_epoch
        ));
    }

    fn epoch_finished(&mut self, epoch: usize, loss: f64) {
        if !self.quiet {
            let total = self.epochs;
            self.line(format_args!("epoch {}/{total} loss {loss:e}", epoch + 1));
        }
    }
}

/// `train`; returns the trained estimator.
pub fn train(a: &TrainArgs, out: &mut dyn Write) -> Result<TrainedEstimator> {
    let samples = read_dataset(&a.data)?;
    let config = a.settings.settings()?.resolve(samples.input_dim(), samples.output_dim())?;
    say(
        out,
        format_args!(
            "samples: {} (d = {}, c = {})",
            samples.len(),
            samples.input_dim(),
            samples.output_dim()
        ),
    )?;
    let mut progress = Progress {
        out,
        quiet: a.quiet,
        epochs: config.epochs,
        failed: None,
    };
    let est = fit_with_observer(&samples, &config, &mut progress)?;
    if let Some(e) = progress.failed {
        return Err(Error::io("<stdout>", e));
    }
    save_model(&a.out, &est)?;
    say(out, format_args!("model written to {}", a.out.display()))?;
    Ok(est)
}

fn collect_reports(results: Vec<jhat_core::Result<ErrorReport>>) -> Result<Vec<ErrorReport>> {
    results.into_iter().map(|r| r.map_err(Error::from)).collect()
}

/// `evaluate`; returns one report per threshold.
pub fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<Vec<ErrorReport>> {
    let est = load_model(&a.model)?;
    let reports = match a.mode {
        EvalMode::Oracle => {
            let name = a
                .function
                .as_deref()
                .ok_or_else(|| Error::Usage("oracle mode needs --function".into()))?;
            let f = TestFunction::by_name(name)?;
            let deltas = a.deltas.clone().unwrap_or_else(|| vec![0.0, 0.001, 0.01, 0.1]);
            let points = f.sample_domain(a.points, a.points_seed);
            collect_reports(e_delta_sweep(&est, &f, &points, &deltas)?)?
        }
        EvalMode::Star => {
            let path = a
                .data
                .as_deref()
                .ok_or_else(|| Error::Usage("star mode needs --data".into()))?;
            let validation = read_dataset(path)?;
            let deltas = a.deltas.clone().unwrap_or_else(|| vec![0.01]);
            let k = a.k_max.unwrap_or(est.config().k_max);
            let r = a.r_max.map_or(est.config().r_max, |r| r.0);
            collect_reports(e_star_delta_sweep(&est, &validation, &deltas, k, r)?)?
        }
    };
    let records: Vec<ErrorRecord> = reports.iter().map(ErrorRecord::from).collect();
    for r in &records {
        say(out, format_args!("{}", serde_json::to_string(r).expect("finite report")))?;
    }
    if let Some(path) = &a.out {
        write_json(path, &records)?;
    }
    Ok(reports)
}

/// `predict`.
pub fn predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let est = load_model(&a.model)?;
    let points = read_points(&a.points)?;
    let jac = est.predict_jacobians(&points)?;
    let (d, c) = (est.input_dim(), est.output_dim());
    let mut header = field_header(d, c);
    let values = match &a.samples {
        Some(path) => {
            let samples = read_dataset(path)?;
            let predictor = est.function_predictor(&samples)?;
            header.extend(column_names("y", c));
            Some(points.iter().map(|x| predictor.predict(x)).collect::<jhat_core::Result<Vec<_>>>()?)
        }
        None => None,
    };
    let rows = points.iter().enumerate().map(|(i, x)| {
        let mut row = vec![x, jac[i].as_slice()];
        if let Some(v) = &values {
            row.push(v[i].as_slice());
        }
        row
    });
    write_rows(&a.out, &header, rows)?;
    say(out, format_args!("wrote {} predictions to {}", points.len(), a.out.display()))
}

fn broadcast(name: &str, v: &[f64], d: usize) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(Error::Usage(format!("--{name} has {n} values; expected 1 or {d}"))),
    }
}

fn grid_for(a: &ExportFieldArgs, d: usize, f: Option<&TestFunction>) -> Result<FieldGrid> {
    let (lower, upper) = match (&a.lower, &a.upper, f) {
        (Some(l), Some(u), _) => (broadcast("lower", l, d)?, broadcast("upper", u, d)?),
        (l, u, Some(f)) => {
            let b = f.domain_box();
            let lower = l.as_ref().map_or(Ok(b.lower().to_vec()), |l| broadcast("lower", l, d))?;
            let upper = u.as_ref().map_or(Ok(b.upper().to_vec()), |u| broadcast("upper", u, d))?;
            (lower, upper)
        }
        _ => return Err(Error::Usage("give --lower and --upper, or --function".into())),
    };
    Ok(FieldGrid::new(lower, upper, vec![a.resolution; d])?)
}

/// `export-field`.
pub fn export_field(a: &ExportFieldArgs, out: &mut dyn Write) -> Result<()> {
    let function = a.function.as_deref().map(TestFunction::by_name).transpose()?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let need_model = || Error::Usage("this mode needs --model".into());
    let need_function = || Error::Usage("this mode needs --function".into());
    let nodes = match a.mode {
        FieldMode::Estimate => {
            let est = model.as_ref().ok_or_else(need_model)?;
            if let Some(f) = &function {
                // A function only supplies the box; it must match the model's shape.
                Difference::new(est, f)?;
            }
            let grid = grid_for(a, est.input_dim(), function.as_ref())?;
            match &function {
                Some(f) => {
                    for p in grid.nodes().iter() {
                        if !f.domain_box().contains(p) {
                            return Err(jhat_core::Error::OutsideDomain {
                                function: f.name().to_owned(),
                            }
                            .into());
                        }
                    }
                    export_vector_field(est, &grid)?
                }
                None => export_vector_field(est, &grid)?,
            }
        }
        FieldMode::Oracle => {
            let f = function.as_ref().ok_or_else(need_function)?;
            export_vector_field(f, &grid_for(a, f.input_dim(), Some(f))?)?
        }
        FieldMode::Difference => {
            let est = model.as_ref().ok_or_else(need_model)?;
            let f = function.as_ref().ok_or_else(need_function)?;
            let diff = Difference::new(est, f)?;
            export_vector_field(&diff, &grid_for(a, f.input_dim(), Some(f))?)?
        }
    };
    write_field(&a.out, &nodes)?;
    say(out, format_args!("wrote {} grid nodes to {}", nodes.len(), a.out.display()))
}

/// `verify-theory`; returns the report.
pub fn verify_theory(a: &VerifyTheoryArgs, out: &mut dyn Write) -> Result<TheoryRecord> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let est = load_model(&a.model)?;
    let f = TestFunction::by_name(&a.function)?;
    let samples = read_dataset(&a.data)?;
    Difference::new(&est, &f)?;
    let d = f.input_dim();
    let index = NeighborIndex::new(samples.inputs());

    let density = epsilon_density(&index, &f.sample_domain(a.probes, a.seed))?;
    let (k, r_max) = (est.config().k_max, est.config().r_max);
    let pairs = build_pairs(&samples, k, r_max)?;
    let residual = residual_max(&est, &pairs, samples.inputs())?;
    let epsilon = density.max(residual);

    let tried: Vec<usize> = if samples.len() <= a.systems {
        (0..samples.len()).collect()
    } else {
        (0..a.systems).map(|i| i * samples.len() / a.systems).collect()
    };
    let systems = neighbor_system_stats(&index, &tried, k, r_max, a.alpha);
    let hessian = f.hessian_bound();
    let l_prime = lipschitz_upper_bound(est.network());
    let r = (systems.found > 0 && epsilon > 0.0).then(|| systems.max_radius / epsilon);

    let bounds = PartialBounds {
        l: hessian.map(|h| h.value),
        l_prime: Some(l_prime),
        alpha: Some(a.alpha),
        r,
        epsilon: Some(epsilon),
        d: Some(d),
    };
    let check_points = f.sample_domain(a.points, a.seed.wrapping_add(1));
    let check = empirical_bound_check(&est, &f, &bounds, &check_points)?;
    let record = TheoryRecord {
        function: f.name().to_owned(),
        d,
        alpha: a.alpha,
        hessian_bound: check.inputs.l,
        hessian_bound_closed_form: hessian.is_some_and(|h| h.closed_form),
        lipschitz_bound: l_prime,
        epsilon_density: density,
        residual_max: residual,
        epsilon,
        systems_tried: systems.tried,
        systems_found: systems.found,
        system_success_rate: systems.success_rate(),
        system_max_radius: systems.max_radius,
        r: check.inputs.r,
        constant: check.constant,
        bound: check.bound,
        max_error: check.max_error,
        check_points: check_points.len(),
        holds: check.holds,
    };
    out.write_all(to_json(&record).as_bytes())
        .map_err(|e| Error::io("<stdout>", e))?;
    if let Some(path) = &a.out {
        write_json(path, &record)?;
    }
    Ok(record)
}

/// Parses `args` (program name first) and runs; used by the binary and tests.
pub fn run_args<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string().trim().replace('\n', " ")))?;
    run(cli, out)
}
