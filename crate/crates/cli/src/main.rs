//! `tidewave`: water-level estimation and tide-turn detection from logged
//! LTE power metrics.
//!
//! Every command reads its settings from defaults, an optional TOML file
//! (`--config`), `--set key=value` overrides and named flags, in increasing
//! priority. Outputs go to `--out-dir` together with `manifest.json` and
//! `config.resolved.toml`; `tidewave rerun <manifest>` replays a run.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
//! failure.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::{CliError, CliResult, EXIT_OK, EXIT_VALIDATION};
use manifest::{Manifest, Outputs, MANIFEST_FILE, RESOLVED_CONFIG_FILE};

#[derive(Parser, Debug)]
#[command(name = "tidewave", version, about = "Water level and tide turns from LTE downlink power metrics")]
struct Cli {
    /// Master seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML configuration file (a manifest.json is also accepted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Config override, e.g. `--set detector.look_ahead=600`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a tide and the matching raw metric log.
    Simulate(SimulateArgs),
    /// Clean raw logs and resample them onto a uniform grid, one file per cell.
    Preprocess(PreprocessArgs),
    /// Tide-band CWT, S(b), detections and plots for preprocessed series.
    Analyze(Inputs),
    /// Detect high/low water and maximum flow in S(b) files.
    Detect(Inputs),
    /// Robust median fusion of several S(b) files.
    Fuse(Inputs),
    /// Build the regression feature matrix for one cell.
    Features(FeaturesArgs),
    /// Train a water-level model, or fine-tune an existing one.
    Train(TrainArgs),
    /// Predict water level from a feature matrix.
    Predict(PredictArgs),
    /// RMSE/MAE report for a prediction file.
    Evaluate(EvaluateArgs),
    /// SVG plots of CSV outputs.
    Plot(PlotArgs),
    /// Replay a run from its manifest and check the outputs match.
    Rerun {
        manifest: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Inputs {
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    duration_h: Option<f64>,
    /// Snapshot interval, seconds.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Tide phase, radians.
    #[arg(long, allow_hyphen_values = true)]
    phase: Option<f64>,
    #[arg(long)]
    noise_std_db: Option<f64>,
    #[arg(long)]
    cell_id: Option<String>,
    /// Link range, metres.
    #[arg(long)]
    range: Option<f64>,
    #[arg(long)]
    carrier_hz: Option<f64>,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    inputs: Vec<PathBuf>,
    /// Grid step, seconds.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    inputs: Vec<PathBuf>,
    /// Tide CSV; when given, targets.csv is written on the feature grid.
    #[arg(long)]
    tide: Option<PathBuf>,
    /// Detections whose high/low-water event nearest the start fixes the phase origin.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Fused S(b) to include as a feature.
    #[arg(long)]
    fused: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    inputs: Vec<PathBuf>,
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Fine-tune this model instead of training from scratch.
    #[arg(long)]
    fine_tune_from: Option<PathBuf>,
    #[arg(long)]
    adapt_frac: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    inputs: Vec<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    targets: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    inputs: Vec<PathBuf>,
    #[arg(long)]
    targets: Option<PathBuf>,
    /// split.json from `train`; the headline numbers then cover the test rows.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    inputs: Vec<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
}

fn path_value(p: &Path) -> toml::Value {
    toml::Value::String(p.display().to_string())
}

fn paths_value(ps: &[PathBuf]) -> toml::Value {
    toml::Value::Array(ps.iter().map(|p| path_value(p)).collect())
}

/// Named flags as config keys, in the order they are applied.
fn flag_overrides(cli: &Cli) -> Vec<(&'static str, toml::Value)> {
    use toml::Value as V;
    let mut out: Vec<(&str, V)> = Vec::new();
    if let Some(s) = cli.seed {
        out.push(("seed", V::Integer(s as i64)));
    }
    let mut f = |key: &'static str, v: Option<V>| {
        if let Some(v) = v {
            out.push((key, v));
        }
    };
    let float = |x: Option<f64>| x.map(V::Float);
    let int = |x: Option<usize>| x.map(|v| V::Integer(v as i64));
    let path = |x: &Option<PathBuf>| x.as_deref().map(path_value);
    let inputs = |x: &[PathBuf]| (!x.is_empty()).then(|| paths_value(x));
    match &cli.command {
        Command::Simulate(a) => {
            f("simulate.duration_h", float(a.duration_h));
            f("simulate.dt", float(a.dt));
            f("simulate.tide.amplitude", float(a.amplitude));
            f("simulate.tide.phase", float(a.phase));
            f("simulate.noise_std_db", float(a.noise_std_db));
            f("simulate.cell_id", a.cell_id.clone().map(V::String));
            f("geometry.range", float(a.range));
            f("geometry.carrier_freq", float(a.carrier_hz));
        }
        Command::Preprocess(a) => {
            f("paths.inputs", inputs(&a.inputs));
            if let Some(dt) = a.dt {
                f("ingest.dt", Some(V::Float(dt)));
                f("ingest.max_gap", Some(V::Float(3.0 * dt)));
            }
        }
        Command::Analyze(a) | Command::Detect(a) | Command::Fuse(a) => f("paths.inputs", inputs(&a.inputs)),
        Command::Features(a) => {
            f("paths.inputs", inputs(&a.inputs));
            f("paths.tide", path(&a.tide));
            f("paths.events", path(&a.events));
            f("paths.fused", path(&a.fused));
        }
        Command::Train(a) => {
            f("paths.inputs", inputs(&a.inputs));
            f("paths.targets", path(&a.targets));
            f("paths.fine_tune_from", path(&a.fine_tune_from));
            f("fine_tune.adapt_frac", float(a.adapt_frac));
            f("train.max_epochs", int(a.max_epochs));
            f("train.hidden", int(a.hidden));
            f("train.learning_rate", float(a.learning_rate));
        }
        Command::Predict(a) => {
            f("paths.inputs", inputs(&a.inputs));
            f("paths.model", path(&a.model));
            f("paths.targets", path(&a.targets));
        }
        Command::Evaluate(a) => {
            f("paths.inputs", inputs(&a.inputs));
            f("paths.targets", path(&a.targets));
            f("paths.split", path(&a.split));
        }
        Command::Plot(a) => {
            f("paths.inputs", inputs(&a.inputs));
            f("paths.events", path(&a.events));
        }
        Command::Rerun { .. } => {}
    }
    out
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Preprocess(_) => "preprocess",
        Command::Analyze(_) => "analyze",
        Command::Detect(_) => "detect",
        Command::Fuse(_) => "fuse",
        Command::Features(_) => "features",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
        Command::Evaluate(_) => "evaluate",
        Command::Plot(_) => "plot",
        Command::Rerun { .. } => "rerun",
    }
}

/// Runs one stage and writes its resolved config and manifest.
fn execute(command: &str, cfg: &RunConfig, out_dir: &Path) -> CliResult<Manifest> {
    let inputs = manifest::digest_inputs(cfg)?;
    let mut out = Outputs::new(out_dir)?;
    match command {
        "simulate" => commands::simulate(cfg, &mut out)?,
        "preprocess" => commands::preprocess(cfg, &mut out)?,
        "analyze" => commands::analyze(cfg, &mut out)?,
        "detect" => commands::detect(cfg, &mut out)?,
        "fuse" => commands::fuse(cfg, &mut out)?,
        "features" => commands::features_cmd(cfg, &mut out)?,
        "train" => commands::train(cfg, &mut out)?,
        "predict" => commands::predict(cfg, &mut out)?,
        "evaluate" => commands::evaluate(cfg, &mut out)?,
        "plot" => commands::plot_cmd(cfg, &mut out)?,
        other => return Err(CliError::Validation(format!("unknown command '{other}'"))),
    }
    out.write(RESOLVED_CONFIG_FILE, &cfg.to_toml()?)?;
    let m = Manifest {
        tool: "tidewave".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seeds: manifest::seeds(cfg),
        config: cfg.clone(),
        inputs,
        outputs: out.digests(),
    };
    let path = out.root().join(MANIFEST_FILE);
    std::fs::write(&path, m.to_json()?).map_err(|e| CliError::io(&path, e))?;
    Ok(m)
}

fn rerun(manifest_path: &Path, out_dir: &Path) -> CliResult<()> {
    let recorded = Manifest::load(manifest_path)?;
    recorded.verify_inputs()?;
    let fresh = execute(&recorded.command, &recorded.config, out_dir)?;
    let differing: Vec<&str> = recorded
        .outputs
        .iter()
        .filter(|o| !fresh.outputs.iter().any(|f| f == *o))
        .map(|o| o.path.as_str())
        .collect();
    if !differing.is_empty() || fresh.outputs.len() != recorded.outputs.len() {
        return Err(CliError::Numerical(format!("rerun did not reproduce: {}", differing.join(", "))));
    }
    eprintln!("reproduced {} outputs of '{}' in {}", fresh.outputs.len(), recorded.command, out_dir.display());
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Command::Rerun { manifest } = &cli.command {
        return rerun(manifest, &cli.out_dir);
    }
    let mut cfg = config::resolve(cli.config.as_deref(), &cli.sets, flag_overrides(cli))?;
    cfg.absolutize_paths()?;
    let m = execute(command_name(&cli.command), &cfg, &cli.out_dir)?;
    eprintln!("{}: wrote {} files to {}", m.command, m.outputs.len() + 1, cli.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are validation errors; --help and --version succeed.
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
