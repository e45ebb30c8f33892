//! Run configuration: TOML file, `--set` overrides and named flags layered
//! over built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tidewave::cwt::{build_scales, ScaleBand, WaveletSpec, DEFAULT_CENTER_FREQ, DEFAULT_VOICES, TIDE_BAND_MAX_PERIOD_S, TIDE_BAND_MIN_PERIOD_S};
use tidewave::detector::DetectorConfig;
use tidewave::fusion::FusionConfig;
use tidewave::ingest::{IngestConfig, Metric};
use tidewave::regressor::{FineTuneConfig, TrainConfig};
use tidewave::sim::{Corruption, LinkGeometry, PhaseMode, ReflectionModel, TideParams, SEMIDIURNAL_PERIOD_S};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub simulate: SimulateSection,
    pub geometry: LinkGeometry,
    pub ingest: IngestConfig,
    pub wavelet: WaveletSection,
    pub detector: DetectorConfig,
    pub fusion: FusionConfig,
    pub features: FeaturesSection,
    pub split: SplitSection,
    pub train: TrainConfig,
    pub fine_tune: FineTuneSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            paths: Paths::default(),
            simulate: SimulateSection::default(),
            geometry: LinkGeometry::river_los(),
            ingest: IngestConfig::default(),
            wavelet: WaveletSection::default(),
            detector: DetectorConfig::default(),
            fusion: FusionConfig::default(),
            features: FeaturesSection::default(),
            split: SplitSection::default(),
            train: TrainConfig { seed: DEFAULT_SEED, ..TrainConfig::default() },
            fine_tune: FineTuneSection::default(),
        }
    }
}

/// Input files. Outputs always go to `--out-dir`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub inputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tide: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fused: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fine_tune_from: Option<PathBuf>,
}

impl Paths {
    /// Every input file referenced, in a fixed order.
    pub fn all(&self) -> Vec<&Path> {
        let named = [&self.tide, &self.targets, &self.events, &self.fused, &self.model, &self.split, &self.fine_tune_from];
        self.inputs.iter().map(PathBuf::as_path).chain(named.into_iter().flatten().map(PathBuf::as_path)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub cell_id: String,
    pub start: f64,
    pub duration_h: f64,
    /// Snapshot interval, seconds.
    pub dt: f64,
    pub tide: TideParams,
    pub noise_std_db: f64,
    pub base_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub mode: PhaseMode,
    pub reflection: ReflectionModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corruption: Option<Corruption>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            cell_id: "cell0".into(),
            start: 0.0,
            duration_h: 7.0,
            dt: 6.0,
            tide: TideParams::default(),
            noise_std_db: 1.0,
            base_power_dbm: -78.0,
            noise_floor_dbm: -120.0,
            mode: PhaseMode::Exact,
            reflection: ReflectionModel::default(),
            corruption: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveletSection {
    pub center_freq: f64,
    pub voices: usize,
    /// Band edges as periods, seconds.
    pub min_period_s: f64,
    pub max_period_s: f64,
    pub metric: Metric,
}

impl Default for WaveletSection {
    fn default() -> Self {
        Self {
            center_freq: DEFAULT_CENTER_FREQ,
            voices: DEFAULT_VOICES,
            min_period_s: TIDE_BAND_MIN_PERIOD_S,
            max_period_s: TIDE_BAND_MAX_PERIOD_S,
            metric: Metric::Rsrp,
        }
    }
}

impl WaveletSection {
    pub fn spec(&self) -> CliResult<WaveletSpec> {
        Ok(WaveletSpec::new(self.center_freq)?)
    }

    pub fn band(&self, spec: &WaveletSpec) -> CliResult<ScaleBand> {
        if !(self.min_period_s > 0.0 && self.min_period_s < self.max_period_s) {
            return Err(CliError::Validation(format!(
                "wavelet band is empty: min_period_s {} must be positive and below max_period_s {}",
                self.min_period_s, self.max_period_s
            )));
        }
        Ok(build_scales(spec, 1.0 / self.max_period_s, 1.0 / self.min_period_s, self.voices)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    /// Tide period for the phase columns, seconds.
    pub period_s: f64,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self { period_s: SEMIDIURNAL_PERIOD_S }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let (train, val, test) = tidewave::features::DEFAULT_SPLIT;
        Self { train, val, test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FineTuneSection {
    pub lr_scale: f64,
    pub epochs: usize,
    /// Leading fraction of the rows used for adaptation.
    pub adapt_frac: f64,
}

impl Default for FineTuneSection {
    fn default() -> Self {
        let d = FineTuneConfig::default();
        Self { lr_scale: d.lr_scale, epochs: d.epochs, adapt_frac: 0.10 }
    }
}

impl FineTuneSection {
    pub fn config(&self) -> FineTuneConfig {
        FineTuneConfig { lr_scale: self.lr_scale, epochs: self.epochs }
    }
}

/// Parses `a.b.c=value`. The value is read as a TOML literal, falling back
/// to a plain string.
fn parse_override(s: &str) -> CliResult<(Vec<String>, toml::Value)> {
    let (key, raw) = s.split_once('=').ok_or_else(|| CliError::Validation(format!("override '{s}' is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Validation(format!("override key '{key}' is malformed")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn set_path(root: &mut toml::Table, path: &[String], value: toml::Value) -> CliResult<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = root;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Validation(format!("config key '{p}' is not a table")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Recursively overlays `top` onto `base`; tables merge, everything else
/// replaces.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn has_path(t: &toml::Table, path: &[&str]) -> bool {
    match path.split_first() {
        None => true,
        Some((k, rest)) => match t.get(*k) {
            Some(toml::Value::Table(sub)) => has_path(sub, rest),
            Some(_) => rest.is_empty(),
            None => false,
        },
    }
}

fn strip_nulls(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.retain(|_, x| !x.is_null());
            m.values_mut().for_each(strip_nulls);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_nulls),
        _ => {}
    }
}

/// Resolves the configuration with precedence flags > file > defaults.
/// `sets` holds `key=value` strings and `flags` typed values from named
/// options, both applied in order after the file. The trainer seed follows
/// the top-level seed unless set explicitly.
pub fn resolve(file: Option<&Path>, sets: &[String], flags: Vec<(&str, toml::Value)>) -> CliResult<RunConfig> {
    let mut user = toml::Table::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let parsed: toml::Table = if path.extension().is_some_and(|e| e == "json") {
            let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            // a run manifest carries its config under "config"
            if v.get("command").is_some() {
                if let Some(inner) = v.get_mut("config") {
                    v = inner.take();
                }
            }
            strip_nulls(&mut v);
            toml::Table::try_from(v).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        };
        user = parsed;
    }
    for o in sets {
        let (path, value) = parse_override(o)?;
        set_path(&mut user, &path, value)?;
    }
    for (key, value) in flags {
        let path: Vec<String> = key.split('.').map(str::to_string).collect();
        set_path(&mut user, &path, value)?;
    }
    let explicit_train_seed = has_path(&user, &["train", "seed"]);

    let mut merged = toml::Table::try_from(RunConfig::default()).map_err(|e| CliError::Validation(e.to_string()))?;
    merge(&mut merged, user);
    let mut cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| CliError::Validation(format!("config: {}", e.message())))?;
    if !explicit_train_seed {
        cfg.train.seed = cfg.seed;
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Validation(format!("config is not representable as TOML: {e}")))
    }

    pub fn split_fractions(&self) -> (f64, f64, f64) {
        (self.split.train, self.split.val, self.split.test)
    }

    /// Makes every input path absolute so a manifest can be replayed from
    /// any working directory.
    pub fn absolutize_paths(&mut self) -> CliResult<()> {
        let cwd = std::env::current_dir().map_err(|e| CliError::io(Path::new("."), e))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = cwd.join(&*p);
            }
        };
        self.paths.inputs.iter_mut().for_each(fix);
        let p = &mut self.paths;
        for opt in [&mut p.tide, &mut p.targets, &mut p.events, &mut p.fused, &mut p.model, &mut p.split, &mut p.fine_tune_from] {
            if let Some(x) = opt.as_mut() {
                fix(x);
            }
        }
        Ok(())
    }
}
