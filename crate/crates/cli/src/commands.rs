use std::path::Path;

use serde::Serialize;
use tidewave::cwt::{self, Scalogram, TideBandFeature};
use tidewave::detector::{self, DetectionEvent};
use tidewave::features::{self, FeatureMatrix, SplitPlan};
use tidewave::fusion;
use tidewave::ingest::{self, FormatDescriptor, Metric, MetricSeries};
use tidewave::io::{self, Table};
use tidewave::plot;
use tidewave::regressor::{self, RegressorModel};
use tidewave::sim::{self, SimConfig};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{corruption_seed, Outputs};

fn require<'a, T>(opt: &'a Option<T>, what: &str) -> CliResult<&'a T> {
    opt.as_ref().ok_or_else(|| CliError::Validation(format!("missing required input: {what}")))
}

fn require_inputs(cfg: &RunConfig, min: usize, what: &str) -> CliResult<()> {
    if cfg.paths.inputs.len() < min {
        return Err(CliError::Validation(format!("expected at least {min} {what} input file(s), got {}", cfg.paths.inputs.len())));
    }
    Ok(())
}

fn file_stem(path: &Path) -> String {
    sanitize(&path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into()))
}

/// Keeps cell ids and stems safe as file-name components.
fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect()
}

fn json<T: Serialize>(v: &T) -> CliResult<String> {
    Ok(io::to_json_pretty(v)?)
}

fn read_series(paths: &[impl AsRef<Path>]) -> CliResult<Vec<MetricSeries>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(io::metric_series_from_table(&io::read_table_file(p.as_ref())?)?);
    }
    Ok(out)
}

/// Reads an `S(b)` table (`s` column, or `s_fused` from a fusion output).
fn read_feature(path: &Path) -> CliResult<TideBandFeature> {
    let mut table = io::read_table_file(path)?;
    if table.column_index("s").is_err() {
        if let Ok(j) = table.column_index("s_fused") {
            table.header[j] = "s".into();
        }
    }
    Ok(io::feature_from_table(&table, &file_stem(path))?)
}

fn read_events(path: &Path) -> CliResult<Vec<DetectionEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(detector::events_from_jsonl(&text)?)
}

fn check_finite(values: &[f64], what: &str) -> CliResult<()> {
    if values.iter().any(|v| v.is_infinite()) {
        return Err(CliError::Numerical(format!("{what} contains infinite values")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn simulate(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let s = &cfg.simulate;
    if !(s.duration_h > 0.0 && s.dt > 0.0) {
        return Err(CliError::Validation(format!("simulation needs positive duration and dt, got {} h / {} s", s.duration_h, s.dt)));
    }
    let geom = &cfg.geometry;
    let grid = sim::uniform_grid(s.start, s.duration_h * 3600.0, s.dt)?;
    let tide = sim::synth_tide(&s.tide, &grid)?;
    let reflection = sim::ReflectionModel::new(s.reflection.magnitude, s.reflection.phase)?;
    let sim_cfg = SimConfig {
        cell_id: s.cell_id.clone(),
        base_power_dbm: vec![s.base_power_dbm; geom.antenna_count()],
        noise_std_db: s.noise_std_db,
        noise_floor_dbm: s.noise_floor_dbm,
        mode: s.mode,
        reflection,
        seed: cfg.seed,
    };
    let series = sim::simulate_metric_series(geom, &tide, &sim_cfg)?;
    let mut records = series.to_records();
    if let Some(c) = &s.corruption {
        records = sim::corrupt_records(&records, c, corruption_seed(cfg.seed))?;
    }
    out.write("tide.csv", &io::tide_to_csv(&tide))?;
    out.write("raw_log.csv", &io::records_to_csv(&records))?;
    out.write("tide.svg", &plot::lines_svg("Simulated water level", "h (m)", tide.times(), &[("h", tide.heights())], "tide.csv"))
}

#[derive(Serialize)]
struct PreprocessSidecar<'a> {
    #[serde(flatten)]
    report: &'a ingest::IngestReport,
    parse_errors: &'a [ingest::RowError],
}

pub fn preprocess(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    require_inputs(cfg, 1, "raw log")?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for p in &cfg.paths.inputs {
        let f = std::fs::File::open(p).map_err(|e| CliError::io(p, e))?;
        let rep = ingest::parse_records(f, &FormatDescriptor::default())?;
        records.extend(rep.records);
        errors.extend(rep.errors);
    }
    for (series, report) in ingest::preprocess(records, &cfg.ingest)? {
        let cell = sanitize(series.cell_id());
        out.write(&format!("series_{cell}.csv"), &io::metric_series_to_csv(&series))?;
        out.write(&format!("ingest_{cell}.json"), &json(&PreprocessSidecar { report: &report, parse_errors: &errors })?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PeriodSummary {
    period_s: f64,
    f_peak_hz: f64,
    stability: f64,
    persistent: bool,
}

#[derive(Serialize)]
struct AnalysisSummary {
    cell_id: String,
    metric: Metric,
    n_samples: usize,
    dt: f64,
    n_scales: usize,
    coi_valid_fraction: f64,
    high_low_events: usize,
    max_flow_events: usize,
    /// Dominant period over 3-24 h of the antenna-mean series, when the
    /// record supports it.
    period: Option<PeriodSummary>,
}

struct CellAnalysis {
    cell: String,
    scalograms: Vec<Scalogram>,
    feature: TideBandFeature,
    events: Vec<DetectionEvent>,
    summary: AnalysisSummary,
}

fn analyze_cell(series: &MetricSeries, cfg: &RunConfig) -> CliResult<CellAnalysis> {
    let spec = cfg.wavelet.spec()?;
    let band = cfg.wavelet.band(&spec)?;
    let (scalograms, feature) = cwt::series_feature(series, cfg.wavelet.metric, &band, &spec)?;
    check_finite(&feature.values, "S(b)")?;
    let (events, _) = detector::detect_offline(&feature, &cfg.detector)?;
    let lin = series.to_linear();
    let mean: Vec<f64> = (0..lin.len())
        .map(|i| {
            let vals: Vec<f64> = (0..lin.antennas()).map(|a| lin.channel(cfg.wavelet.metric, a)[i]).filter(|v| v.is_finite()).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    let period = cwt::estimate_period(&mean, lin.start(), lin.dt(), &spec).ok().map(|(p, r)| PeriodSummary {
        period_s: p,
        f_peak_hz: r.f_peak,
        stability: r.stability,
        persistent: r.is_persistent(),
    });
    let count = |k| events.iter().filter(|e| e.kind == k).count();
    let summary = AnalysisSummary {
        cell_id: series.cell_id().to_string(),
        metric: cfg.wavelet.metric,
        n_samples: feature.len(),
        dt: feature.dt,
        n_scales: band.len(),
        coi_valid_fraction: feature.coi_valid.iter().filter(|v| **v).count() as f64 / feature.len().max(1) as f64,
        high_low_events: count(detector::EventKind::HighLowWater),
        max_flow_events: count(detector::EventKind::MaxFlow),
        period,
    };
    Ok(CellAnalysis { cell: sanitize(series.cell_id()), scalograms, feature, events, summary })
}

pub fn analyze(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    require_inputs(cfg, 1, "preprocessed series")?;
    let all = read_series(&cfg.paths.inputs)?;
    // One worker per cell; results are written in input order.
    let results: Vec<CliResult<CellAnalysis>> = std::thread::scope(|scope| {
        let handles: Vec<_> = all.iter().map(|s| scope.spawn(move || analyze_cell(s, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("analysis worker panicked")).collect()
    });
    let center = cfg.wavelet.center_freq;
    for r in results {
        let a = r?;
        let c = &a.cell;
        for (k, sg) in a.scalograms.iter().enumerate() {
            let [scales, times, mags, meta] = io::scalogram_export(sg, center)?;
            let dir = format!("scalogram_{c}_ant{k}");
            out.write(&format!("{dir}/scales.csv"), &scales)?;
            out.write(&format!("{dir}/times.csv"), &times)?;
            out.write(&format!("{dir}/coeffs_mag.csv"), &mags)?;
            out.write(&format!("{dir}/scalogram.json"), &meta)?;
        }
        out.write(&format!("s_{c}.csv"), &io::feature_to_csv(&a.feature))?;
        out.write(&format!("events_{c}.jsonl"), &detector::events_to_jsonl(&a.events)?)?;
        out.write(&format!("analysis_{c}.json"), &json(&a.summary)?)?;
        if let Some(sg) = a.scalograms.first() {
            out.write(&format!("scalogram_{c}.svg"), &plot::scalogram_svg(sg, &format!("scalogram_{c}_ant0/coeffs_mag.csv")))?;
        }
        out.write(&format!("s_{c}.svg"), &plot::feature_svg(&a.feature, &a.events, &format!("s_{c}.csv, events_{c}.jsonl")))?;
    }
    Ok(())
}

pub fn detect(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    require_inputs(cfg, 1, "S(b)")?;
    for p in &cfg.paths.inputs {
        let f = read_feature(p)?;
        let (events, _) = detector::detect_offline(&f, &cfg.detector)?;
        out.write(&format!("events_{}.jsonl", file_stem(p)), &detector::events_to_jsonl(&events)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FusionSummary {
    cells: Vec<String>,
    valid_samples: Vec<usize>,
    lags: Vec<Option<fusion::LagEstimate>>,
    fused_samples: usize,
    high_low_events: usize,
    max_flow_events: usize,
}

pub fn fuse(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    require_inputs(cfg, 1, "S(b)")?;
    let cells = cfg.paths.inputs.iter().map(|p| read_feature(p)).collect::<CliResult<Vec<_>>>()?;
    let result = fusion::fuse_cells(&cells, &cfg.fusion)?;
    let feature = result.fused.to_feature();
    let (events, _) = detector::detect_offline(&feature, &cfg.detector)?;
    let count = |k| events.iter().filter(|e| e.kind == k).count();
    let summary = FusionSummary {
        cells: result.fused.cell_ids.clone(),
        valid_samples: result.standardized.iter().map(|s| s.valid_count()).collect(),
        lags: result.lag_estimates.clone(),
        fused_samples: result.fused.len(),
        high_low_events: count(detector::EventKind::HighLowWater),
        max_flow_events: count(detector::EventKind::MaxFlow),
    };
    out.write("fused.csv", &io::fused_to_csv(&result.fused))?;
    out.write("events_fused.jsonl", &detector::events_to_jsonl(&events)?)?;
    out.write("fusion.json", &json(&summary)?)?;
    out.write("fused.svg", &plot::feature_svg(&feature, &events, "fused.csv, events_fused.jsonl"))
}

pub fn build_feature_matrix(cfg: &RunConfig) -> CliResult<(MetricSeries, FeatureMatrix)> {
    require_inputs(cfg, 1, "preprocessed series")?;
    let mut all = read_series(&cfg.paths.inputs)?;
    if all.len() != 1 {
        return Err(CliError::Validation(format!("features need exactly one cell, found {}", all.len())));
    }
    let series = all.remove(0);
    let origin = match &cfg.paths.events {
        Some(p) => features::phase_origin(series.start(), &read_events(p)?),
        None => series.start(),
    };
    let phase = cwt::tide_phase(&series.times(), cfg.features.period_s, origin)?;
    let fused = cfg.paths.fused.as_deref().map(read_feature).transpose()?;
    let fm = features::build_features(&series, &phase, fused.as_ref())?;
    Ok((series, fm))
}

pub fn features_cmd(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let (series, fm) = build_feature_matrix(cfg)?;
    out.write("features.csv", &io::feature_matrix_to_csv(&fm))?;
    if let Some(p) = &cfg.paths.tide {
        let tide = io::tide_from_table(&io::read_table_file(p)?)?;
        let times = series.times();
        let y: Vec<f64> = times.iter().map(|&t| tide.height_at(t)).collect();
        let table = Table { header: vec!["t_unix_s".into(), "h_m".into()], rows: times.iter().zip(&y).map(|(t, h)| vec![*t, *h]).collect() };
        out.write("targets.csv", &table.to_csv())?;
    }
    Ok(())
}

fn read_matrix(cfg: &RunConfig) -> CliResult<FeatureMatrix> {
    require_inputs(cfg, 1, "feature matrix")?;
    if cfg.paths.inputs.len() > 1 {
        return Err(CliError::Validation("expected a single feature matrix".into()));
    }
    Ok(io::feature_matrix_from_table(&io::read_table_file(&cfg.paths.inputs[0])?)?)
}

/// Targets aligned row-by-row with `times`.
fn read_targets(path: &Path, times: &[f64]) -> CliResult<Vec<f64>> {
    let table = io::read_table_file(path)?;
    let t = table.column("t_unix_s")?;
    let y = table.column("h_m")?;
    if t.len() == times.len() && t.iter().zip(times).all(|(a, b)| a == b) {
        return Ok(y);
    }
    // Otherwise interpolate, e.g. straight from a simulated tide file.
    let tide = tidewave::sim::TideSeries::new(t, y)?;
    Ok(times.iter().map(|&x| tide.height_at(x)).collect())
}

fn pick(y: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| y[i]).collect()
}

#[derive(Serialize)]
struct TrainingSummary {
    mode: &'static str,
    rows: usize,
    input_columns: usize,
    dropped_columns: Vec<String>,
    epochs: usize,
    best_epoch: usize,
    fine_tune_epochs: usize,
    final_train_loss: Option<f64>,
    final_val_loss: Option<f64>,
    schema_hash: String,
}

pub fn train(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let fm = read_matrix(cfg)?;
    let targets = require(&cfg.paths.targets, "targets (--targets)")?;
    let y = read_targets(targets, fm.times())?;
    let (model, plan, mode) = match &cfg.paths.fine_tune_from {
        None => {
            let plan = features::chrono_split(fm.n_rows(), cfg.split_fractions())?;
            let (stats, z) = features::fit_standardize(&fm, plan.train.clone())?;
            let tr = z.valid_rows(plan.train.clone());
            let va = z.valid_rows(plan.val.clone());
            let init = regressor::init_model(z.column_names(), cfg.train.hidden, cfg.train.seed)?;
            let mut m = regressor::train(init, &z.rows(&tr), &pick(&y, &tr), &z.rows(&va), &pick(&y, &va), &cfg.train)?;
            m.feature_stats = Some(stats);
            (m, plan, "scratch")
        }
        Some(base) => {
            let base = regressor::load_model(base)?;
            let stats = base
                .feature_stats
                .clone()
                .ok_or_else(|| CliError::Validation("base model carries no feature statistics".into()))?;
            let z = stats.apply(&fm)?;
            let (adapt, rest) = features::adaptation_split(fm.n_rows(), cfg.fine_tune.adapt_frac)?;
            let idx = z.valid_rows(adapt.clone());
            let m = regressor::fine_tune(base, z.column_names(), &z.rows(&idx), &pick(&y, &idx), &cfg.train, &cfg.fine_tune.config())?;
            let plan = SplitPlan { train: adapt.clone(), val: adapt.end..adapt.end, test: rest };
            (m, plan, "fine_tune")
        }
    };
    let md = &model.metadata;
    let summary = TrainingSummary {
        mode,
        rows: fm.n_rows(),
        input_columns: model.input_dim(),
        dropped_columns: model.feature_stats.as_ref().map(|s| s.dropped.clone()).unwrap_or_default(),
        epochs: md.epochs,
        best_epoch: md.best_epoch,
        fine_tune_epochs: md.fine_tune_epochs,
        final_train_loss: md.train_loss.last().copied(),
        final_val_loss: md.val_loss.last().copied(),
        schema_hash: model.schema_hash(),
    };
    out.write("model.json", &(model.to_json()? + "\n"))?;
    out.write("split.json", &json(&plan)?)?;
    out.write("training.json", &json(&summary)?)
}

/// Applies the model's stored standardization after checking that the
/// feature file has exactly the columns the model was fitted on.
fn standardized_for(model: &RegressorModel, fm: &FeatureMatrix) -> CliResult<FeatureMatrix> {
    let stats = model
        .feature_stats
        .as_ref()
        .ok_or_else(|| CliError::Validation("model carries no feature statistics".into()))?;
    let mut expected: Vec<&String> = stats.columns.iter().chain(&stats.dropped).collect();
    let mut got: Vec<&String> = fm.column_names().iter().collect();
    expected.sort();
    got.sort();
    if expected != got {
        return Err(tidewave::Error::Schema(format!(
            "feature file has {} columns, model expects {} (schema {})",
            got.len(),
            expected.len(),
            model.schema_hash()
        ))
        .into());
    }
    let z = stats.apply(fm)?;
    model.check_schema(z.column_names())?;
    Ok(z)
}

pub fn predict(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let fm = read_matrix(cfg)?;
    let model = regressor::load_model(require(&cfg.paths.model, "model (--model)")?)?;
    let z = standardized_for(&model, &fm)?;
    let valid = z.valid_rows(0..z.n_rows());
    let pred = model.predict(&z.rows(&valid))?;
    check_finite(&pred, "predictions")?;
    let mut y_hat = vec![f64::NAN; z.n_rows()];
    for (&i, p) in valid.iter().zip(pred) {
        y_hat[i] = p;
    }
    let y_true = cfg.paths.targets.as_deref().map(|p| read_targets(p, fm.times())).transpose()?;
    out.write("predictions.csv", &io::predictions_to_csv(fm.times(), y_true.as_deref(), &y_hat))
}

pub fn evaluate(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    require_inputs(cfg, 1, "predictions")?;
    let table = io::read_table_file(&cfg.paths.inputs[0])?;
    let times = table.column("t_unix_s")?;
    let y_hat = table.column("y_hat_m")?;
    let y_true = match &cfg.paths.targets {
        Some(p) => read_targets(p, &times)?,
        None => table
            .column("y_true_m")
            .map_err(|_| CliError::Validation("predictions carry no y_true_m column; pass --targets".into()))?,
    };
    let report = match &cfg.paths.split {
        None => regressor::evaluate(&y_hat, &y_true)?,
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let plan: SplitPlan = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            if plan.test.end > y_hat.len() {
                return Err(CliError::Validation("split ranges exceed the prediction rows".into()));
            }
            let segments = [("train", &plan.train), ("val", &plan.val), ("test", &plan.test)]
                .into_iter()
                .filter(|(_, r)| !r.is_empty())
                .map(|(n, r)| (n.to_string(), r.clone()))
                .collect::<Vec<_>>();
            let mut r = regressor::evaluate_segments(&y_hat, &y_true, &segments)?;
            let test = regressor::evaluate(&y_hat[plan.test.clone()], &y_true[plan.test.clone()])?;
            r.rmse_cm = test.rmse_cm;
            r.mae_cm = test.mae_cm;
            r.n_samples = test.n_samples;
            r
        }
    };
    out.write("report.json", &json(&report)?)
}

pub fn plot_cmd(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    require_inputs(cfg, 1, "CSV")?;
    let events = cfg.paths.events.as_deref().map(read_events).transpose()?;
    for p in &cfg.paths.inputs {
        let table = io::read_table_file(p)?;
        let stem = file_stem(p);
        let source = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let is_feature = table.column_index("s").is_ok() || table.column_index("s_fused").is_ok();
        let svg = match (&events, is_feature) {
            (Some(ev), true) => plot::feature_svg(&read_feature(p)?, ev, &source),
            _ => {
                let times = table.column("t_unix_s")?;
                let skip = |h: &str| h == "t_unix_s" || h == "coi_valid" || h == "contributing_count" || h.starts_with("avail_");
                let cols: Vec<(String, Vec<f64>)> =
                    table.header.iter().filter(|h| !skip(h)).map(|h| Ok((h.clone(), table.column(h)?))).collect::<CliResult<_>>()?;
                let series: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
                plot::lines_svg(&stem, "value", &times, &series, &source)
            }
        };
        out.write(&format!("{stem}.svg"), &svg)?;
    }
    Ok(())
}
