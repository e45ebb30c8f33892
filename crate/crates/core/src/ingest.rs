//! Raw metric log ingestion and cleaning.
//!
//! The pipeline order is fixed:
//!
//! ```text
//! drop_invalid -> db_to_linear -> iqr_mask -> hampel_filter -> resample_uniform [-> lowpass]
//! ```
//!
//! Cleaning (IQR and Hampel) runs per channel, i.e. per `(metric, antenna)`
//! of one cell, on linear-domain values in record time order. Resampling
//! averages the linear values falling in each grid bin and linearly
//! interpolates empty bins unless the bracketing samples are further apart
//! than `max_gap`, in which case the grid cell stays masked (NaN).

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Header of the raw log CSV.
pub const RAW_LOG_HEADER: [&str; 6] = ["t_unix_s", "cell_id", "antenna", "rsrp_dbm", "rssi_dbm", "rsrq_db"];

/// Gaussian consistency factor for the MAD used by the Hampel filter.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rsrp,
    Rssi,
    Rsrq,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Rsrp, Metric::Rssi, Metric::Rsrq];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Rsrp => "rsrp",
            Metric::Rssi => "rssi",
            Metric::Rsrq => "rsrq",
        }
    }

    /// Column unit suffix for the given domain.
    pub fn unit(self, domain: Domain) -> &'static str {
        match (self, domain) {
            (Metric::Rsrq, Domain::Db) => "db",
            (_, Domain::Db) => "dbm",
            (Metric::Rsrq, Domain::Linear) => "ratio",
            (_, Domain::Linear) => "mw",
        }
    }
}

/// Whether channel values are logarithmic (dBm / dB) or linear (mW / ratio).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Db,
    Linear,
}

/// One logged snapshot of one antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub timestamp: f64,
    pub cell_id: String,
    pub antenna: usize,
    pub rsrp: f64,
    pub rssi: f64,
    pub rsrq: f64,
}

impl MetricRecord {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Rsrp => self.rsrp,
            Metric::Rssi => self.rssi,
            Metric::Rsrq => self.rsrq,
        }
    }
}

/// Uniform-grid, per-antenna metric series of a single cell. Masked samples
/// are stored as NaN, so "valid" and "finite" are the same thing.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    cell_id: String,
    start: f64,
    dt: f64,
    len: usize,
    antennas: usize,
    domain: Domain,
    channels: BTreeMap<(Metric, usize), Vec<f64>>,
}

impl MetricSeries {
    /// Empty (all-masked) series.
    pub fn new(cell_id: impl Into<String>, start: f64, dt: f64, len: usize, antennas: usize, domain: Domain) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("grid step must be positive, got {dt}")));
        }
        if !start.is_finite() {
            return Err(Error::invalid("grid start must be finite"));
        }
        if antennas == 0 {
            return Err(Error::invalid("at least one antenna is required"));
        }
        let mut channels = BTreeMap::new();
        for m in Metric::ALL {
            for a in 0..antennas {
                channels.insert((m, a), vec![f64::NAN; len]);
            }
        }
        Ok(Self { cell_id: cell_id.into(), start, dt, len, antennas, domain, channels })
    }

    /// Builds a series from explicit timestamps, checking the grid step is
    /// constant to 1e-6 relative.
    pub fn from_times(cell_id: impl Into<String>, times: &[f64], antennas: usize, domain: Domain) -> Result<Self> {
        let dt = uniform_step(times)?;
        Self::new(cell_id, times[0], dt, times.len(), antennas, domain)
    }

    pub fn cell_id(&self) -> &str {
        &self.cell_id
    }
    pub fn start(&self) -> f64 {
        self.start
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn antennas(&self) -> usize {
        self.antennas
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.time(i)).collect()
    }

    pub fn channel(&self, metric: Metric, antenna: usize) -> &[f64] {
        &self.channels[&(metric, antenna)]
    }

    pub fn channel_mut(&mut self, metric: Metric, antenna: usize) -> &mut [f64] {
        self.channels.get_mut(&(metric, antenna)).expect("antenna index within series")
    }

    pub fn channels(&self) -> impl Iterator<Item = (Metric, usize, &[f64])> {
        self.channels.iter().map(|((m, a), v)| (*m, *a, v.as_slice()))
    }

    pub fn is_valid(&self, metric: Metric, antenna: usize, i: usize) -> bool {
        self.channel(metric, antenna)[i].is_finite()
    }

    /// Fraction of masked samples over all channels.
    pub fn masked_fraction(&self) -> f64 {
        let total = self.channels.values().map(Vec::len).sum::<usize>();
        if total == 0 {
            return 0.0;
        }
        let masked = self.channels.values().flatten().filter(|v| !v.is_finite()).count();
        masked as f64 / total as f64
    }

    /// Column name used in CSV exports, e.g. `cellA_ant0_rsrp_dbm`.
    pub fn column_name(&self, metric: Metric, antenna: usize) -> String {
        format!("{}_ant{}_{}_{}", self.cell_id, antenna, metric.as_str(), metric.unit(self.domain))
    }

    pub fn to_linear(&self) -> MetricSeries {
        self.convert(Domain::Linear, db_to_linear)
    }

    pub fn to_db(&self) -> MetricSeries {
        self.convert(Domain::Db, linear_to_db)
    }

    fn convert(&self, target: Domain, f: fn(f64) -> f64) -> MetricSeries {
        if self.domain == target {
            return self.clone();
        }
        let mut out = self.clone();
        out.domain = target;
        for v in out.channels.values_mut().flatten() {
            if v.is_finite() {
                *v = f(*v);
            }
        }
        out
    }

    /// Re-expands the series into raw log records (dB domain), one per
    /// antenna per grid point. Masked samples are written as 0, the raw
    /// log's own invalid marker.
    pub fn to_records(&self) -> Vec<MetricRecord> {
        let db = self.to_db();
        let mut out = Vec::with_capacity(self.len * self.antennas);
        for i in 0..self.len {
            for a in 0..self.antennas {
                let get = |m| {
                    let v = db.channel(m, a)[i];
                    if v.is_finite() {
                        v
                    } else {
                        0.0
                    }
                };
                out.push(MetricRecord {
                    timestamp: self.time(i),
                    cell_id: self.cell_id.clone(),
                    antenna: a,
                    rsrp: get(Metric::Rsrp),
                    rssi: get(Metric::Rssi),
                    rsrq: get(Metric::Rsrq),
                });
            }
        }
        out
    }
}

/// Returns the common step of `times`, or an error if the grid is not
/// uniform to 1e-6 relative or has fewer than two points.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::invalid("a uniform grid needs at least two samples"));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::invalid("grid times must be strictly increasing"));
    }
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if ((step - dt) / dt).abs() > 1e-6 {
            return Err(Error::invalid(format!("grid step at index {i} is {step}, expected {dt}")));
        }
    }
    Ok(dt)
}

// ---------------------------------------------------------------------------
// Parsing

/// Layout options for the raw log CSV.
#[derive(Debug, Clone)]
pub struct FormatDescriptor {
    pub delimiter: u8,
    /// When set, records with `antenna >= antenna_count` are reported as errors.
    pub antenna_count: Option<usize>,
}

impl Default for FormatDescriptor {
    fn default() -> Self {
        Self { delimiter: b',', antenna_count: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

/// Parsed records plus every malformed row that was skipped.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub records: Vec<MetricRecord>,
    pub errors: Vec<RowError>,
}

impl ParseReport {
    /// Fails on the first malformed row, if any.
    pub fn into_strict(self) -> Result<Vec<MetricRecord>> {
        match self.errors.into_iter().next() {
            Some(e) => Err(Error::Parse { line: e.line, message: e.message }),
            None => Ok(self.records),
        }
    }
}

/// Parses a raw log. An unreadable or wrong header is an error; malformed
/// data rows are collected in the report with their 1-based line number.
pub fn parse_records<R: Read>(reader: R, format: &FormatDescriptor) -> Result<ParseReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: format!("unreadable header: {e}") })?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != RAW_LOG_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", RAW_LOG_HEADER.join(","), names.join(",")),
        });
    }

    let mut report = ParseReport::default();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                report.errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&row, format) {
            Ok(rec) => report.records.push(rec),
            Err(message) => report.errors.push(RowError { line, message }),
        }
    }
    Ok(report)
}

fn parse_row(row: &csv::StringRecord, format: &FormatDescriptor) -> std::result::Result<MetricRecord, String> {
    if row.len() != RAW_LOG_HEADER.len() {
        return Err(format!("expected {} columns, found {}", RAW_LOG_HEADER.len(), row.len()));
    }
    let num = |idx: usize| -> std::result::Result<f64, String> {
        let field = row[idx].trim();
        let v: f64 = field.parse().map_err(|_| format!("column {} is not numeric: {field:?}", RAW_LOG_HEADER[idx]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("column {} is not finite", RAW_LOG_HEADER[idx]))
        }
    };
    let antenna: usize = row[2].trim().parse().map_err(|_| format!("antenna is not an index: {:?}", &row[2]))?;
    if let Some(count) = format.antenna_count {
        if antenna >= count {
            return Err(format!("antenna {antenna} out of range ({count} configured)"));
        }
    }
    Ok(MetricRecord {
        timestamp: num(0)?,
        cell_id: row[1].trim().to_string(),
        antenna,
        rsrp: num(3)?,
        rssi: num(4)?,
        rsrq: num(5)?,
    })
}

// ---------------------------------------------------------------------------
// Cleaning

/// Discards records where any of RSRP, RSSI or RSRQ is exactly zero (the
/// decoder's "no measurement" marker).
pub fn drop_invalid(records: Vec<MetricRecord>) -> Vec<MetricRecord> {
    records.into_iter().filter(|r| r.rsrp != 0.0 && r.rssi != 0.0 && r.rsrq != 0.0).collect()
}

pub fn db_to_linear(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Tukey fences `(Q1 - k*IQR, Q3 + k*IQR)` over the finite values, or `None`
/// when fewer than four finite values are available.
pub fn iqr_fences(values: &[f64], k: f64) -> Option<(f64, f64)> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.len() < 4 {
        return None;
    }
    sorted.sort_by(f64::total_cmp);
    let q1 = stats::quantile_sorted(&sorted, 0.25);
    let q3 = stats::quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    Some((q1 - k * iqr, q3 + k * iqr))
}

/// Validity mask of the IQR test: `true` keeps the value. Non-finite values
/// are always invalid. With fewer than four finite values every finite value
/// is kept (see [`iqr_fences`]).
pub fn iqr_mask(values: &[f64], k: f64) -> Vec<bool> {
    match iqr_fences(values, k) {
        Some((lo, hi)) => values.iter().map(|&v| v.is_finite() && v >= lo && v <= hi).collect(),
        None => values.iter().map(|v| v.is_finite()).collect(),
    }
}

/// Hampel filter. A sample is replaced by its window median when it deviates
/// from it by more than `n_mad * 1.4826 * MAD`; windows are truncated at the
/// edges and skip non-finite values, which are passed through untouched.
pub fn hampel_filter(values: &[f64], window_half: usize, n_mad: f64) -> Result<Vec<f64>> {
    if window_half < 1 {
        return Err(Error::invalid("Hampel window half-width must be at least 1"));
    }
    if n_mad.is_infinite() && n_mad > 0.0 {
        return Ok(values.to_vec());
    }
    let n = values.len();
    let mut out = values.to_vec();
    let mut buf = Vec::with_capacity(2 * window_half + 1);
    for i in 0..n {
        let x = values[i];
        if !x.is_finite() {
            continue;
        }
        let lo = i.saturating_sub(window_half);
        let hi = (i + window_half + 1).min(n);
        buf.clear();
        buf.extend(values[lo..hi].iter().copied().filter(|v| v.is_finite()));
        let med = stats::median_in_place(&mut buf).expect("window holds the centre sample");
        for v in buf.iter_mut() {
            *v = (*v - med).abs();
        }
        let mad = stats::median_in_place(&mut buf).expect("non-empty");
        if (x - med).abs() > n_mad * MAD_SCALE * mad {
            out[i] = med;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Resampling and smoothing

/// Bins `(time, value)` samples onto the grid `start + i*dt` (bins of width
/// `dt` centred on grid points), averages each bin, and linearly interpolates
/// empty bins from the nearest non-empty neighbours when those are at most
/// `max_gap` seconds apart. Everything else is NaN.
pub fn resample_channel(times: &[f64], values: &[f64], start: f64, dt: f64, len: usize, max_gap: f64) -> Vec<f64> {
    let mut sum = vec![0.0; len];
    let mut count = vec![0usize; len];
    for (&t, &v) in times.iter().zip(values) {
        if !v.is_finite() || !t.is_finite() {
            continue;
        }
        let pos = ((t - start) / dt).round();
        if pos < 0.0 || pos >= len as f64 {
            continue;
        }
        let i = pos as usize;
        sum[i] += v;
        count[i] += 1;
    }
    let mut out: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();

    let filled: Vec<usize> = (0..len).filter(|&i| count[i] > 0).collect();
    for pair in filled.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        if (b - a) as f64 * dt > max_gap * (1.0 + 1e-12) {
            continue;
        }
        let (va, vb) = (out[a], out[b]);
        for i in a + 1..b {
            let w = (i - a) as f64 / (b - a) as f64;
            out[i] = va + (vb - va) * w;
        }
    }
    out
}

/// Resamples records of a single cell onto a uniform grid starting at the
/// earliest record, in the linear domain (bin means of linear values).
/// Antenna count is inferred from the largest antenna index present.
pub fn resample_uniform(records: &[MetricRecord], dt: f64, max_gap: f64) -> Result<MetricSeries> {
    if !(dt > 0.0) {
        return Err(Error::invalid("resampling step must be positive"));
    }
    if records.len() < 2 {
        return Err(Error::invalid("resampling needs at least two records"));
    }
    let cell = &records[0].cell_id;
    if records.iter().any(|r| &r.cell_id != cell) {
        return Err(Error::invalid("resample_uniform expects records of a single cell"));
    }
    let antennas = records.iter().map(|r| r.antenna).max().unwrap_or(0) + 1;
    let mut channels: BTreeMap<(Metric, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        for m in Metric::ALL {
            let e = channels.entry((m, r.antenna)).or_default();
            e.0.push(r.timestamp);
            e.1.push(db_to_linear(r.metric(m)));
        }
    }
    let (t0, t1) = records
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.timestamp), hi.max(r.timestamp)));
    build_series(cell, antennas, &channels, t0, t1, dt, max_gap)
}

fn build_series(
    cell: &str,
    antennas: usize,
    channels: &BTreeMap<(Metric, usize), (Vec<f64>, Vec<f64>)>,
    t0: f64,
    t1: f64,
    dt: f64,
    max_gap: f64,
) -> Result<MetricSeries> {
    let len = ((t1 - t0) / dt + 1e-9).floor() as usize + 1;
    if len < 2 {
        return Err(Error::invalid("records span less than one grid step"));
    }
    let mut series = MetricSeries::new(cell, t0, dt, len, antennas, Domain::Linear)?;
    for ((m, a), (times, values)) in channels {
        let resampled = resample_channel(times, values, t0, dt, len, max_gap);
        series.channel_mut(*m, *a).copy_from_slice(&resampled);
    }
    Ok(series)
}

/// Zero-phase moving average: a trailing mean of `window` samples followed
/// by a leading mean of the result. Non-finite samples are excluded from the
/// window sums and stay masked in the output.
pub fn moving_average_zero_phase(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::invalid("low-pass window must be at least one sample"));
    }
    let n = values.len();
    let pass = |x: &[f64], forward: bool| -> Vec<f64> {
        let mut out = vec![f64::NAN; n];
        let (mut s, mut c) = (0.0, 0usize);
        let idx = |k: usize| if forward { k } else { n - 1 - k };
        for k in 0..n {
            let v = x[idx(k)];
            if v.is_finite() {
                s += v;
                c += 1;
            }
            if k >= window {
                let old = x[idx(k - window)];
                if old.is_finite() {
                    s -= old;
                    c -= 1;
                }
            }
            if values[idx(k)].is_finite() && c > 0 {
                out[idx(k)] = s / c as f64;
            }
        }
        out
    };
    let fwd = pass(values, true);
    Ok(pass(&fwd, false))
}

/// Applies [`moving_average_zero_phase`] to every channel with
/// `window = round(cutoff_period / dt)`.
pub fn lowpass(series: &MetricSeries, cutoff_period: f64) -> Result<MetricSeries> {
    let window = (cutoff_period / series.dt()).round();
    if !(window >= 1.0) {
        return Err(Error::invalid(format!(
            "low-pass cutoff {cutoff_period} s is shorter than the grid step {} s",
            series.dt()
        )));
    }
    let mut out = series.clone();
    for v in out.channels.values_mut() {
        *v = moving_average_zero_phase(v, window as usize)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Full pipeline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub dt: f64,
    pub max_gap: f64,
    pub iqr_k: f64,
    pub hampel_half: usize,
    pub hampel_n_mad: f64,
    /// Optional low-pass cutoff period in seconds.
    pub lowpass_period: Option<f64>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { dt: 60.0, max_gap: 180.0, iqr_k: 1.0, hampel_half: 5, hampel_n_mad: 3.0, lowpass_period: None }
    }
}

impl IngestConfig {
    /// Defaults for a given grid step (`max_gap = 3 * dt`).
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, max_gap: 3.0 * dt, ..Self::default() }
    }
}

/// Sidecar summary written next to each preprocessed series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub cell_id: String,
    pub dt: f64,
    pub max_gap: f64,
    pub masked_fraction: f64,
    pub dropped_rows: usize,
    pub iqr_flagged: usize,
    pub hampel_replaced: usize,
    /// Channels with too few samples for the IQR test (left uncleaned).
    pub iqr_skipped_channels: Vec<String>,
}

/// Runs the full cleaning pipeline and returns one linear-domain series per
/// cell, ordered by cell id.
pub fn preprocess(records: Vec<MetricRecord>, config: &IngestConfig) -> Result<Vec<(MetricSeries, IngestReport)>> {
    let total = records.len();
    let kept = drop_invalid(records);
    let dropped_total = total - kept.len();

    let mut by_cell: BTreeMap<String, Vec<MetricRecord>> = BTreeMap::new();
    let mut dropped_by_cell: BTreeMap<String, usize> = BTreeMap::new();
    for r in kept {
        by_cell.entry(r.cell_id.clone()).or_default().push(r);
    }
    if by_cell.is_empty() {
        return Err(Error::invalid(format!("no valid records left after dropping {dropped_total} invalid rows")));
    }
    // Dropped rows are attributed to cells only in aggregate; report them on
    // every cell so a single-cell log carries the exact number.
    for cell in by_cell.keys() {
        dropped_by_cell.insert(cell.clone(), dropped_total);
    }

    let mut out = Vec::new();
    for (cell, mut recs) in by_cell {
        recs.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let antennas = recs.iter().map(|r| r.antenna).max().unwrap_or(0) + 1;
        let mut channels: BTreeMap<(Metric, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in &recs {
            for m in Metric::ALL {
                let e = channels.entry((m, r.antenna)).or_default();
                e.0.push(r.timestamp);
                e.1.push(db_to_linear(r.metric(m)));
            }
        }

        let mut iqr_flagged = 0;
        let mut hampel_replaced = 0;
        let mut skipped = Vec::new();
        for ((m, a), (_, values)) in channels.iter_mut() {
            if iqr_fences(values, config.iqr_k).is_none() {
                skipped.push(format!("ant{a}_{}", m.as_str()));
            }
            let mask = iqr_mask(values, config.iqr_k);
            let valid_idx: Vec<usize> = (0..values.len()).filter(|&i| mask[i]).collect();
            iqr_flagged += values.len() - valid_idx.len();
            let compact: Vec<f64> = valid_idx.iter().map(|&i| values[i]).collect();
            let filtered = hampel_filter(&compact, config.hampel_half, config.hampel_n_mad)?;
            hampel_replaced += compact.iter().zip(&filtered).filter(|(x, y)| x != y).count();
            let mut cleaned = vec![f64::NAN; values.len()];
            for (k, &i) in valid_idx.iter().enumerate() {
                cleaned[i] = filtered[k];
            }
            *values = cleaned;
        }

        let t0 = recs.first().map(|r| r.timestamp).unwrap_or(0.0);
        let t1 = recs.last().map(|r| r.timestamp).unwrap_or(0.0);
        let mut series = build_series(&cell, antennas, &channels, t0, t1, config.dt, config.max_gap)?;
        if let Some(period) = config.lowpass_period {
            series = lowpass(&series, period)?;
        }
        let report = IngestReport {
            cell_id: cell.clone(),
            dt: config.dt,
            max_gap: config.max_gap,
            masked_fraction: series.masked_fraction(),
            dropped_rows: dropped_by_cell[&cell],
            iqr_flagged,
            hampel_replaced,
            iqr_skipped_channels: skipped,
        };
        out.push((series, report));
    }
    Ok(out)
}
