//! Regression features: per-antenna levels, within-metric pairwise
//! differences and ratios, tide phase, and optionally the fused tide-band
//! feature. Also column standardization and chronological splits.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cwt::TideBandFeature;
use crate::detector::{DetectionEvent, EventKind};
use crate::error::{Error, Result};
use crate::ingest::{Domain, Metric, MetricSeries};

/// Dense row-major feature table on a time grid. Rows with any masked input
/// are flagged invalid and hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    times: Vec<f64>,
    columns: Vec<String>,
    data: Vec<f64>,
    row_valid: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(times: Vec<f64>, columns: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if data.len() != times.len() * columns.len() {
            return Err(Error::invalid(format!(
                "feature data has {} values for {} rows x {} columns",
                data.len(),
                times.len(),
                columns.len()
            )));
        }
        let n_cols = columns.len();
        let row_valid = (0..times.len()).map(|r| data[r * n_cols..(r + 1) * n_cols].iter().all(|v| v.is_finite())).collect();
        Ok(Self { times, columns, data, row_valid })
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn column_names(&self) -> &[String] {
        &self.columns
    }
    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[r * c..(r + 1) * c]
    }
    pub fn is_row_valid(&self, r: usize) -> bool {
        self.row_valid[r]
    }
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some((0..self.n_rows()).map(|r| self.data[r * self.n_cols() + j]).collect())
    }

    /// Valid row indices within `range`.
    pub fn valid_rows(&self, range: Range<usize>) -> Vec<usize> {
        range.filter(|&r| self.row_valid[r]).collect()
    }

    pub fn rows(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&r| self.row(r).to_vec()).collect()
    }

    pub fn schema_hash(&self) -> String {
        schema_hash(&self.columns)
    }
}

/// SHA-256 of the column names joined by newlines, hex encoded.
pub fn schema_hash(columns: &[String]) -> String {
    hex::encode(Sha256::digest(columns.join("\n").as_bytes()))
}

/// Ordered column names for `antennas` antennas.
pub fn feature_columns(antennas: usize, include_fused: bool) -> Vec<String> {
    let mut cols = Vec::new();
    for m in Metric::ALL {
        for a in 0..antennas {
            cols.push(format!("{}_a{a}", m.as_str()));
        }
    }
    for m in Metric::ALL {
        for i in 0..antennas {
            for j in i + 1..antennas {
                cols.push(format!("{}_diff_a{i}_a{j}", m.as_str()));
            }
        }
        for i in 0..antennas {
            for j in i + 1..antennas {
                cols.push(format!("{}_ratio_a{i}_a{j}", m.as_str()));
            }
        }
    }
    cols.push("sin_phi".into());
    cols.push("cos_phi".into());
    if include_fused {
        cols.push("s_fused".into());
        cols.push("s_fused_available".into());
    }
    cols
}

/// Builds the feature matrix. `metrics` is converted to the linear domain
/// if needed; `phase` holds `(sin, cos)` per grid sample. A fused feature,
/// if given, must share the grid; its masked samples are zero-imputed and
/// flagged by the availability column.
pub fn build_features(metrics: &MetricSeries, phase: &[(f64, f64)], fused: Option<&TideBandFeature>) -> Result<FeatureMatrix> {
    let lin;
    let metrics = if metrics.domain() == Domain::Linear {
        metrics
    } else {
        lin = metrics.to_linear();
        &lin
    };
    let n = metrics.len();
    if phase.len() != n {
        return Err(Error::invalid(format!("phase has {} samples for a {n}-sample grid", phase.len())));
    }
    if let Some(f) = fused {
        let tol = 1e-6 * metrics.dt();
        if f.len() != n || (f.start - metrics.start()).abs() > tol || (f.dt - metrics.dt()).abs() > tol {
            return Err(Error::invalid("fused feature is not on the metric grid"));
        }
    }
    let k = metrics.antennas();
    let columns = feature_columns(k, fused.is_some());
    let mut data = Vec::with_capacity(n * columns.len());
    for r in 0..n {
        let start = data.len();
        let level = |m: Metric, a: usize| metrics.channel(m, a)[r];
        for m in Metric::ALL {
            for a in 0..k {
                data.push(level(m, a));
            }
        }
        let mut bad_ratio = false;
        for m in Metric::ALL {
            for i in 0..k {
                for j in i + 1..k {
                    data.push(level(m, i) - level(m, j));
                }
            }
            for i in 0..k {
                for j in i + 1..k {
                    let den = level(m, j);
                    bad_ratio |= !(den > 0.0);
                    data.push(level(m, i) / den);
                }
            }
        }
        data.push(phase[r].0);
        data.push(phase[r].1);
        if let Some(f) = fused {
            let v = f.values[r];
            data.push(if v.is_finite() { v } else { 0.0 });
            data.push(if v.is_finite() { 1.0 } else { 0.0 });
        }
        if bad_ratio || data[start..].iter().any(|v| !v.is_finite()) {
            data[start..].iter_mut().for_each(|v| *v = f64::NAN);
        }
    }
    FeatureMatrix::new(metrics.times(), columns, data)
}

/// Phase origin: the high/low-water event nearest to `record_start`, or the
/// record start when no such event exists.
pub fn phase_origin(record_start: f64, events: &[DetectionEvent]) -> f64 {
    events
        .iter()
        .filter(|e| e.kind == EventKind::HighLowWater)
        .map(|e| e.time)
        .min_by(|a, b| (a - record_start).abs().total_cmp(&(b - record_start).abs()))
        .unwrap_or(record_start)
}

/// Per-column mean and population standard deviation over training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Zero-variance columns removed at fit time.
    pub dropped: Vec<String>,
}

impl StandardizationStats {
    /// Selects the retained columns of `m` by name and standardizes them.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let idx = self
            .columns
            .iter()
            .map(|c| {
                m.columns
                    .iter()
                    .position(|x| x == c)
                    .ok_or_else(|| Error::Schema(format!("feature column '{c}' missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(m.n_rows() * idx.len());
        for r in 0..m.n_rows() {
            let row = m.row(r);
            for (k, &j) in idx.iter().enumerate() {
                data.push((row[j] - self.means[k]) / self.stds[k]);
            }
        }
        FeatureMatrix::new(m.times.clone(), self.columns.clone(), data)
    }
}

/// Fits standardization on the valid rows of `train_rows` and applies it to
/// every row.
pub fn fit_standardize(m: &FeatureMatrix, train_rows: Range<usize>) -> Result<(StandardizationStats, FeatureMatrix)> {
    let rows = m.valid_rows(train_rows.start..train_rows.end.min(m.n_rows()));
    if rows.len() < 2 {
        return Err(Error::invalid(format!("standardization needs at least 2 valid training rows, got {}", rows.len())));
    }
    let nf = rows.len() as f64;
    let (mut columns, mut means, mut stds, mut dropped) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (j, name) in m.columns.iter().enumerate() {
        let mean = rows.iter().map(|&r| m.row(r)[j]).sum::<f64>() / nf;
        let var = rows.iter().map(|&r| (m.row(r)[j] - mean).powi(2)).sum::<f64>() / nf;
        let std = var.sqrt();
        if std > 1e-12 * mean.abs() && std > 0.0 {
            columns.push(name.clone());
            means.push(mean);
            stds.push(std);
        } else {
            dropped.push(name.clone());
        }
    }
    let stats = StandardizationStats { columns, means, stds, dropped };
    let out = stats.apply(m)?;
    Ok((stats, out))
}

/// Contiguous chronological train/validation/test ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.60, 0.05, 0.35);

fn boundary(frac: f64, n: usize) -> usize {
    ((frac * n as f64) + 1e-9).floor() as usize
}

/// Boundaries at `floor(cumulative fraction * n)`.
pub fn chrono_split(n: usize, fractions: (f64, f64, f64)) -> Result<SplitPlan> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(*f >= 0.0)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions must be non-negative and sum to 1, got {a}/{b}/{c}")));
    }
    let i1 = boundary(a, n);
    let i2 = boundary(a + b, n).max(i1);
    let plan = SplitPlan { train: 0..i1, val: i1..i2, test: i2..n };
    let empty = [(a, &plan.train), (b, &plan.val), (c, &plan.test)].iter().any(|(f, r)| *f > 0.0 && r.is_empty());
    if empty {
        return Err(Error::invalid(format!("{n} rows are too few for a {a}/{b}/{c} split")));
    }
    Ok(plan)
}

/// Leading adaptation rows for fine-tuning and the remainder.
pub fn adaptation_split(n: usize, frac: f64) -> Result<(Range<usize>, Range<usize>)> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::invalid(format!("adaptation fraction must lie in (0, 1), got {frac}")));
    }
    let k = boundary(frac, n);
    if k == 0 || k == n {
        return Err(Error::invalid(format!("{n} rows are too few for a {frac} adaptation split")));
    }
    Ok((0..k, k..n))
}
