//! Multi-cell combination of tide-band features.
//!
//! Each cell's `S(b)` is standardized with a rolling median and (unscaled)
//! MAD, optionally shifted by an integer lag estimated by cross-correlation,
//! and the cells are combined by a pointwise median over the cells valid at
//! each sample.

use serde::{Deserialize, Serialize};

use crate::cwt::TideBandFeature;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowAlignment {
    #[default]
    Centered,
    Trailing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Rolling standardization window, seconds.
    pub window: f64,
    /// Minimum valid samples in a window for a standardized value.
    pub min_count: usize,
    pub alignment: WindowAlignment,
    /// Output grid step, seconds.
    pub grid_dt: f64,
    /// Largest lag searched, seconds; `None` disables lag estimation.
    pub max_lag: Option<f64>,
    /// Correlation below which an estimated lag is replaced by 0.
    pub lag_threshold: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            window: 9.0 * 3600.0,
            min_count: 10,
            alignment: WindowAlignment::Centered,
            grid_dt: 60.0,
            max_lag: None,
            lag_threshold: 0.5,
        }
    }
}

/// Rolling-standardized feature `S~(b)`; masked samples are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedFeature {
    pub cell_id: String,
    pub start: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub window: f64,
    /// Samples masked because the window MAD was zero.
    pub mad_zero: usize,
    /// Samples masked because the window held too few valid values.
    pub sparse: usize,
}

impl StandardizedFeature {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }
    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }
}

/// `(S(b) - median_W S) / MAD_W S` over a rolling window of `window` seconds.
pub fn rolling_standardize(
    s: &TideBandFeature,
    window: f64,
    min_count: usize,
    alignment: WindowAlignment,
) -> Result<StandardizedFeature> {
    if s.is_empty() {
        return Err(Error::invalid("cannot standardize an empty feature"));
    }
    if !(s.dt > 0.0) || !(window >= 10.0 * s.dt * (1.0 - 1e-9)) {
        return Err(Error::invalid(format!("standardization window {window} s must be at least 10 grid steps of {} s", s.dt)));
    }
    let n = s.len();
    let span = (window / s.dt + 1e-9).floor() as usize;
    let (mut mad_zero, mut sparse) = (0, 0);
    let mut buf = Vec::with_capacity(span + 1);
    let values = (0..n)
        .map(|i| {
            let x = s.values[i];
            if !x.is_finite() {
                return f64::NAN;
            }
            let (lo, hi) = match alignment {
                WindowAlignment::Centered => (i.saturating_sub(span / 2), (i + span / 2).min(n - 1)),
                WindowAlignment::Trailing => (i.saturating_sub(span), i),
            };
            buf.clear();
            buf.extend(s.values[lo..=hi].iter().copied().filter(|v| v.is_finite()));
            if buf.len() < min_count.max(1) {
                sparse += 1;
                return f64::NAN;
            }
            let med = stats::median_in_place(&mut buf).expect("non-empty window");
            for v in buf.iter_mut() {
                *v = (*v - med).abs();
            }
            let mad = stats::median_in_place(&mut buf).expect("non-empty window");
            if mad <= 0.0 {
                mad_zero += 1;
                return f64::NAN;
            }
            (x - med) / mad
        })
        .collect();
    Ok(StandardizedFeature {
        cell_id: s.provenance.clone(),
        start: s.start,
        dt: s.dt,
        values,
        window,
        mad_zero,
        sparse,
    })
}

/// Linear interpolation of a standardized feature onto another uniform
/// grid. A target point is valid only when both bracketing source samples
/// are valid.
pub fn resample_feature(f: &StandardizedFeature, start: f64, dt: f64, len: usize) -> StandardizedFeature {
    let n = f.len();
    let values = (0..len)
        .map(|i| {
            let t = start + i as f64 * dt;
            let pos = (t - f.start) / f.dt;
            let nearest = pos.round();
            if (pos - nearest).abs() < 1e-9 && nearest >= 0.0 && (nearest as usize) < n {
                return f.values[nearest as usize];
            }
            if pos < 0.0 || pos > (n - 1) as f64 {
                return f64::NAN;
            }
            let j = pos.floor() as usize;
            let w = pos - j as f64;
            let (a, b) = (f.values[j], f.values[(j + 1).min(n - 1)]);
            if a.is_finite() && b.is_finite() {
                a + w * (b - a)
            } else {
                f64::NAN
            }
        })
        .collect();
    StandardizedFeature { values, start, dt, ..f.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagEstimate {
    /// Grid shift maximizing correlation; `b[i] = a[i - shift]`.
    pub best_shift: i64,
    pub correlation: f64,
    /// `best_shift` if `correlation` reaches the threshold, else 0.
    pub accepted_shift: i64,
}

fn check_same_grid(a: &StandardizedFeature, b: &StandardizedFeature) -> Result<()> {
    let tol = 1e-6 * a.dt.abs().max(1.0);
    if (a.dt - b.dt).abs() > tol || (a.start - b.start).abs() > tol || a.len() != b.len() {
        return Err(Error::invalid(format!(
            "features '{}' and '{}' are not on a common grid",
            a.cell_id, b.cell_id
        )));
    }
    Ok(())
}

/// Integer lag of `b` relative to `a` by masked Pearson correlation over
/// shifts in `[-max_lag, max_lag]`. Ties go to the smallest `|shift|`,
/// then to the negative shift.
pub fn estimate_lag(a: &StandardizedFeature, b: &StandardizedFeature, max_lag: f64, threshold: f64) -> Result<LagEstimate> {
    check_same_grid(a, b)?;
    let max_steps = (max_lag / a.dt + 1e-9).floor().max(0.0) as i64;
    let n = a.len() as i64;
    let overlap = (0..a.len()).filter(|&i| a.values[i].is_finite() && b.values[i].is_finite()).count();
    if (overlap as f64) * a.dt < 4.0 * max_lag || overlap < 3 {
        return Err(Error::invalid(format!(
            "insufficient overlap for lag search: {} s valid vs {} s required",
            overlap as f64 * a.dt,
            4.0 * max_lag
        )));
    }
    let mut shifts: Vec<i64> = (-max_steps..=max_steps).collect();
    shifts.sort_by_key(|&s| (s.abs(), s > 0));
    let mut best: Option<(i64, f64)> = None;
    for s in shifts {
        let (xa, xb): (Vec<f64>, Vec<f64>) = (0..n)
            .filter(|&i| (0..n).contains(&(i + s)))
            .map(|i| (a.values[i as usize], b.values[(i + s) as usize]))
            .unzip();
        if let Some(r) = stats::pearson(&xa, &xb) {
            if best.is_none_or(|(_, br)| r > br) {
                best = Some((s, r));
            }
        }
    }
    let (best_shift, correlation) = best.ok_or_else(|| Error::invalid("no shift produced a defined correlation"))?;
    let accepted_shift = if correlation >= threshold { best_shift } else { 0 };
    Ok(LagEstimate { best_shift, correlation, accepted_shift })
}

/// Pointwise median over cells, with per-cell availability.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeature {
    pub start: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub contributing_count: Vec<usize>,
    pub cell_ids: Vec<String>,
    pub lags: Vec<i64>,
    /// `availability[cell][i]`.
    pub availability: Vec<Vec<bool>>,
}

impl FusedFeature {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    /// The fused series as a feature for the detector; every finite sample is
    /// marked valid.
    pub fn to_feature(&self) -> TideBandFeature {
        TideBandFeature {
            start: self.start,
            dt: self.dt,
            values: self.values.clone(),
            coi_valid: self.values.iter().map(|v| v.is_finite()).collect(),
            provenance: "fused".to_string(),
        }
    }
}

/// `S_fused(b) = median over cells of S~_l(b + lag_l)`.
pub fn median_fuse(features: &[StandardizedFeature], lags: &[i64]) -> Result<FusedFeature> {
    let first = features.first().ok_or_else(|| Error::invalid("median fusion needs at least one feature"))?;
    if lags.len() != features.len() {
        return Err(Error::invalid(format!("{} lags for {} features", lags.len(), features.len())));
    }
    for f in &features[1..] {
        check_same_grid(first, f)?;
    }
    let n = first.len();
    let availability: Vec<Vec<bool>> = features
        .iter()
        .zip(lags)
        .map(|(f, &lag)| {
            (0..n as i64)
                .map(|i| {
                    let j = i + lag;
                    (0..n as i64).contains(&j) && f.values[j as usize].is_finite()
                })
                .collect()
        })
        .collect();
    let mut buf = Vec::with_capacity(features.len());
    let mut contributing_count = Vec::with_capacity(n);
    let values = (0..n)
        .map(|i| {
            buf.clear();
            for (c, f) in features.iter().enumerate() {
                if availability[c][i] {
                    buf.push(f.values[(i as i64 + lags[c]) as usize]);
                }
            }
            contributing_count.push(buf.len());
            stats::median_in_place(&mut buf).unwrap_or(f64::NAN)
        })
        .collect();
    Ok(FusedFeature {
        start: first.start,
        dt: first.dt,
        values,
        contributing_count,
        cell_ids: features.iter().map(|f| f.cell_id.clone()).collect(),
        lags: lags.to_vec(),
        availability,
    })
}

/// Full multi-cell pipeline result.
#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub fused: FusedFeature,
    pub standardized: Vec<StandardizedFeature>,
    /// Lag estimate of each cell against the first; `None` when lag search
    /// is disabled or for the reference cell.
    pub lag_estimates: Vec<Option<LagEstimate>>,
}

/// Standardizes each cell on its own grid, resamples onto a common grid of
/// step `cfg.grid_dt` spanning all cells, optionally aligns lags against
/// the first cell, and fuses.
pub fn fuse_cells(cells: &[TideBandFeature], cfg: &FusionConfig) -> Result<FusionOutput> {
    if cells.is_empty() {
        return Err(Error::invalid("median fusion needs at least one feature"));
    }
    if !(cfg.grid_dt > 0.0) {
        return Err(Error::invalid("fusion grid step must be positive"));
    }
    let standardized = cells
        .iter()
        .map(|c| rolling_standardize(c, cfg.window, cfg.min_count, cfg.alignment))
        .collect::<Result<Vec<_>>>()?;
    let start = cells.iter().map(|c| c.start).fold(f64::INFINITY, f64::min);
    let end = cells.iter().map(|c| c.time(c.len() - 1)).fold(f64::NEG_INFINITY, f64::max);
    let len = ((end - start) / cfg.grid_dt + 1e-9).floor() as usize + 1;
    let gridded: Vec<StandardizedFeature> = standardized.iter().map(|f| resample_feature(f, start, cfg.grid_dt, len)).collect();
    let mut lags = vec![0i64; gridded.len()];
    let mut lag_estimates = vec![None; gridded.len()];
    if let Some(max_lag) = cfg.max_lag {
        for c in 1..gridded.len() {
            let est = estimate_lag(&gridded[0], &gridded[c], max_lag, cfg.lag_threshold)?;
            lags[c] = est.accepted_shift;
            lag_estimates[c] = Some(est);
        }
    }
    let fused = median_fuse(&gridded, &lags)?;
    Ok(FusionOutput { fused, standardized, lag_estimates })
}
