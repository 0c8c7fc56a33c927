//! `bkalman`: batch smoothing, filtering and prediction for scalar
//! linear-Gaussian models, plus grid-oracle validation and the Bertrand demo.
//!
//! Exit status: 0 success, 1 usage error, 2 validation failure,
//! 3 numeric failure. Every failure prints one line on stderr.

mod error;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bayes_kalman::bertrand::{exact_probability, mc_probability, Parameterization};
use bayes_kalman::estimator::{bayes_kalman, classify_mode, estimate_series, SeriesMode};
use bayes_kalman::model::{
    parse_model, parse_observations, render_observations, render_states, sample_trajectory,
    validate, ModelError, ModelSpec, ObservationSeries, RandomModel,
};
use bayes_kalman::oracle::{moments, GridChain, GridConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use error::CliError;
use output::{json_text, Cell, Format, Table};

/// Seed used whenever `--seed` is not given.
const DEFAULT_SEED: u64 = 0;

/// Largest estimator/oracle disagreement `validate` accepts.
const VALIDATE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "bkalman",
    version,
    about = "Scalar Kalman smoothing, filtering and prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Posterior of each state given the observations up to that time.
    Filter(EstimateArgs),
    /// Posterior of each state (or of state `--s`) given the whole record.
    Smooth(SmoothArgs),
    /// Causal estimates with mode tags; the model must leave some step unobserved.
    Predict(EstimateArgs),
    /// Draw a state path and observations from a model.
    Simulate(SimulateArgs),
    /// Compare the estimator with the grid-quadrature oracle.
    Validate(ValidateArgs),
    /// Bertrand's chord problem: exact and Monte Carlo probabilities.
    Bertrand(BertrandArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write results here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Model config (TOML).
    #[arg(long)]
    model: PathBuf,
    /// Observations (CSV with header `t,x`).
    #[arg(long)]
    obs: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SmoothArgs {
    #[command(flatten)]
    inputs: EstimateArgs,
    /// Report only this time index.
    #[arg(long)]
    s: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Directory receiving `states.csv` and `observations.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Model to check; without it, `--samples` random models are drawn.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Observations for `--model`; simulated from `--seed` when omitted.
    #[arg(long, requires = "model")]
    obs: Option<PathBuf>,
    /// Number of random models.
    #[arg(long, default_value_t = 20, conflicts_with = "model")]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Minimum grid points per time step.
    #[arg(long, default_value_t = 4097)]
    grid_points: usize,
    /// Padding on each side of the automatic grid window, relative to its width.
    #[arg(long, default_value_t = 0.2)]
    grid_pad: f64,
    /// Fixed lower grid bound for every step (with `--grid-hi`).
    #[arg(long, requires = "grid_hi", allow_hyphen_values = true)]
    grid_lo: Option<f64>,
    #[arg(long, requires = "grid_lo", allow_hyphen_values = true)]
    grid_hi: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ParamChoice {
    First,
    Second,
    Both,
}

#[derive(Debug, Args)]
struct BertrandArgs {
    #[arg(long, value_enum, default_value = "both")]
    param: ParamChoice,
    /// Chord length threshold ℓ in (0, 2].
    #[arg(long, default_value_t = 3f64.sqrt())]
    length: f64,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: &OutputArgs, text: &str) -> Result<(), CliError> {
    match &out.out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<ModelSpec<f64>, CliError> {
    let spec = parse_model(&read(path)?)?;
    validate(&spec).map_err(ModelError::Invalid)?;
    Ok(spec)
}

fn load_inputs(args: &EstimateArgs) -> Result<(ModelSpec<f64>, ObservationSeries<f64>), CliError> {
    let spec = load_model(&args.model)?;
    let obs = parse_observations(&read(&args.obs)?)?;
    obs.aligned(&spec)?;
    Ok((spec, obs))
}

fn estimate_table(
    spec: &ModelSpec<f64>,
    obs: &ObservationSeries<f64>,
    mode: SeriesMode,
    tagged: bool,
) -> Result<Table, CliError> {
    let series = estimate_series(spec, obs, mode)?;
    let mut table = if tagged {
        Table::new(&["t", "mean", "variance", "mode"])
    } else {
        Table::new(&["t", "mean", "variance"])
    };
    for e in series.rows {
        let mut row = vec![e.t.into(), e.mean.into(), e.variance.into()];
        if tagged {
            row.push(e.mode.as_str().into());
        }
        table.push(row);
    }
    Ok(table)
}

fn run_filter(args: EstimateArgs) -> Result<(), CliError> {
    let (spec, obs) = load_inputs(&args)?;
    let table = estimate_table(&spec, &obs, SeriesMode::AllFilter, false)?;
    emit(&args.output, &table.render(args.output.format))
}

fn run_smooth(args: SmoothArgs) -> Result<(), CliError> {
    let (spec, obs) = load_inputs(&args.inputs)?;
    let table = match args.s {
        None => estimate_table(&spec, &obs, SeriesMode::AllSmooth, false)?,
        Some(s) => {
            let g = bayes_kalman(&spec, &obs, s)?;
            let mut table = Table::new(&["t", "mean", "variance"]);
            table.push(vec![s.into(), g.mean.into(), g.variance.into()]);
            table
        }
    };
    emit(
        &args.inputs.output,
        &table.render(args.inputs.output.format),
    )
}

fn run_predict(args: EstimateArgs) -> Result<(), CliError> {
    let (spec, obs) = load_inputs(&args)?;
    if spec.fully_observed() {
        return Err(CliError::Usage(
            "predict needs a model with at least one step marked `observed = false`".into(),
        ));
    }
    let table = estimate_table(&spec, &obs, SeriesMode::AllFilter, true)?;
    emit(&args.output, &table.render(args.output.format))
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = load_model(&args.model)?;
    let traj = sample_trajectory(&spec, args.seed)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.out.display())))?;
    write(&args.out.join("states.csv"), &render_states(&traj.states))?;
    write(
        &args.out.join("observations.csv"),
        &render_observations(&traj.observations),
    )
}

fn run_validate(args: ValidateArgs) -> Result<(), CliError> {
    let cfg = GridConfig {
        n_points: args.grid_points,
        pad: args.grid_pad,
        bounds: args.grid_lo.zip(args.grid_hi),
        ..GridConfig::default()
    };
    let cases: Vec<(ModelSpec<f64>, ObservationSeries<f64>)> = match &args.model {
        Some(path) => {
            let spec = load_model(path)?;
            let obs = match &args.obs {
                Some(p) => parse_observations(&read(p)?)?,
                None => sample_trajectory(&spec, args.seed)?.observations,
            };
            vec![(spec, obs)]
        }
        None => {
            let gen = RandomModel {
                unobserved: 0.2,
                ..RandomModel::default()
            };
            (0..args.samples as u64)
                .map(|k| {
                    let (spec, traj) = gen.sample(args.seed.wrapping_add(k));
                    (spec, traj.observations)
                })
                .collect()
        }
    };

    let mut table = Table::new(&[
        "model",
        "s",
        "mode",
        "mean",
        "oracle_mean",
        "variance",
        "oracle_variance",
        "abs_diff",
    ]);
    let mut worst = 0.0f64;
    for (k, (spec, obs)) in cases.iter().enumerate() {
        let series = estimate_series(spec, obs, SeriesMode::AllSmooth)?;
        let chain = GridChain::build(spec, obs, &cfg)?;
        for e in series.rows {
            let (m, v) = moments(&chain.posterior(e.t)?);
            let diff = (e.mean - m).abs().max((e.variance - v).abs());
            worst = worst.max(diff);
            let mode = classify_mode(spec, e.t)?.tag;
            table.push(vec![
                k.into(),
                e.t.into(),
                mode.as_str().into(),
                e.mean.into(),
                m.into(),
                e.variance.into(),
                v.into(),
                diff.into(),
            ]);
        }
    }

    let pass = worst <= VALIDATE_TOLERANCE;
    let text = match args.output.format {
        Format::Csv => table.to_csv(),
        Format::Json => json_text(&json!({
            "rows": table.to_json(),
            "max_abs_diff": worst,
            "tolerance": VALIDATE_TOLERANCE,
            "pass": pass,
        })),
    };
    emit(&args.output, &text)?;
    let summary = format!(
        "max_abs_diff {} over {} models (tolerance {})",
        bayes_kalman::model::fmt_num(worst),
        cases.len(),
        bayes_kalman::model::fmt_num(VALIDATE_TOLERANCE)
    );
    if pass {
        eprintln!("{summary}");
        Ok(())
    } else {
        Err(CliError::Validation(summary))
    }
}

fn run_bertrand(args: BertrandArgs) -> Result<(), CliError> {
    let params: &[Parameterization] = match args.param {
        ParamChoice::First => &[Parameterization::First],
        ParamChoice::Second => &[Parameterization::Second],
        ParamChoice::Both => &Parameterization::ALL,
    };
    let mut table = Table::new(&[
        "param", "length", "exact", "estimate", "stderr", "samples", "seed",
    ]);
    for &p in params {
        let exact = exact_probability(p, args.length)?;
        let mc = mc_probability(p, args.length, args.samples, args.seed)?;
        table.push(vec![
            p.as_str().into(),
            args.length.into(),
            exact.into(),
            mc.estimate.into(),
            mc.stderr.into(),
            mc.samples.into(),
            Cell::Int(args.seed),
        ]);
    }
    emit(&args.output, &table.render(args.output.format))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Filter(a) => run_filter(a),
        Command::Smooth(a) => run_smooth(a),
        Command::Predict(a) => run_predict(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Validate(a) => run_validate(a),
        Command::Bertrand(a) => run_bertrand(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                CliError::Usage(line.trim_start_matches("error: ").to_string())
            );
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
