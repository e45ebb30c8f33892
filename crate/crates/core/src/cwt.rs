//! Morlet continuous wavelet transform over a tide band.
//!
//! The mother wavelet is the analytic Morlet
//! `psi(t) = pi^(-1/4) * exp(j*2*pi*f0*t) * exp(-t^2/2)` and
//!
//! ```text
//! W(a, b) = integral x(t) a^(-1/2) psi*((t - b)/a) dt
//! ```
//!
//! is evaluated by direct time-domain convolution on the sample grid, with
//! scales `a` expressed in seconds so that the pseudo-frequency of scale `a`
//! is `f0/a` Hz. The sampled kernel is truncated at `|t/a| <= 4` and made
//! exactly zero-mean by subtracting a
//! multiple of its Gaussian envelope (the usual admissibility correction,
//! which only removes the `exp(-(2*pi*f0)^2/2)`-sized DC leak plus the
//! truncation residue). Edges are handled by reflection padding and reported
//! through a cone of influence of half-width `sqrt(2) * a` seconds.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Metric, MetricSeries};
use crate::sim::{EnvelopeParams, TideSeries};
use crate::stats;

/// Kernel truncation in units of the Gaussian standard deviation.
pub const KERNEL_HALF_WIDTH: f64 = 4.0;

/// Default Morlet centre frequency, `omega0 = 6` rad per unit time.
pub const DEFAULT_CENTER_FREQ: f64 = 6.0 / (2.0 * std::f64::consts::PI);

/// Tide-band periods: 10 to 120 minutes.
pub const TIDE_BAND_MIN_PERIOD_S: f64 = 600.0;
pub const TIDE_BAND_MAX_PERIOD_S: f64 = 7200.0;

/// Band searched when estimating the semidiurnal period from a record.
pub const TIDE_PERIOD_SEARCH_MIN_S: f64 = 3.0 * 3600.0;
pub const TIDE_PERIOD_SEARCH_MAX_S: f64 = 24.0 * 3600.0;

pub const DEFAULT_VOICES: usize = 8;

/// Morlet wavelet with centre frequency `f0` (cycles per unit of the
/// dimensionless wavelet argument).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WaveletFields", into = "WaveletFields")]
pub struct WaveletSpec {
    center_freq: f64,
    first_moment: Complex64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaveletFields {
    center_freq: f64,
}

impl TryFrom<WaveletFields> for WaveletSpec {
    type Error = Error;
    fn try_from(w: WaveletFields) -> Result<Self> {
        WaveletSpec::new(w.center_freq)
    }
}

impl From<WaveletSpec> for WaveletFields {
    fn from(w: WaveletSpec) -> Self {
        WaveletFields { center_freq: w.center_freq }
    }
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self::new(DEFAULT_CENTER_FREQ).expect("valid default")
    }
}

impl WaveletSpec {
    pub fn new(center_freq: f64) -> Result<Self> {
        if !(center_freq > 0.0 && center_freq.is_finite()) {
            return Err(Error::invalid(format!("wavelet centre frequency must be positive, got {center_freq}")));
        }
        let first_moment = first_moment_quadrature(center_freq);
        Ok(Self { center_freq, first_moment })
    }

    pub fn center_freq(&self) -> f64 {
        self.center_freq
    }

    /// `M1 = integral tau * psi*(tau) dtau`, computed once by quadrature.
    pub fn first_moment(&self) -> Complex64 {
        self.first_moment
    }

    /// Continuous mother wavelet.
    pub fn psi(&self, tau: f64) -> Complex64 {
        morlet(self.center_freq, tau)
    }

    pub fn pseudo_freq(&self, scale: f64) -> f64 {
        self.center_freq / scale
    }

    pub fn scale_for_freq(&self, freq: f64) -> f64 {
        self.center_freq / freq
    }
}

fn morlet(f0: f64, tau: f64) -> Complex64 {
    let norm = std::f64::consts::PI.powf(-0.25);
    let env = (-0.5 * tau * tau).exp();
    Complex64::from_polar(norm * env, 2.0 * std::f64::consts::PI * f0 * tau)
}

fn first_moment_quadrature(f0: f64) -> Complex64 {
    // Trapezoid rule is spectrally accurate for this smooth, rapidly
    // decaying integrand.
    let (lim, h): (f64, f64) = (12.0, 1e-3);
    let n = (2.0 * lim / h).round() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..=n {
        let tau = -lim + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += morlet(f0, tau).conj() * (w * tau);
    }
    acc * h
}

/// Sampled, truncated, zero-mean kernel `psi_c(m*dt/a)` for `m = -M..=M`.
/// `taps()` returns the convolution weights `conj(psi) * a^(-1/2) * dt`.
#[derive(Debug, Clone)]
pub struct SampledKernel {
    half: usize,
    psi: Vec<Complex64>,
    taps: Vec<Complex64>,
}

impl SampledKernel {
    pub fn new(spec: &WaveletSpec, scale: f64, dt: f64) -> Result<Self> {
        let half = (KERNEL_HALF_WIDTH * scale / dt).floor() as usize;
        if half < 1 {
            return Err(Error::invalid(format!("scale {scale} s is too small for grid step {dt} s")));
        }
        let omega = 2.0 * std::f64::consts::PI * spec.center_freq;
        let norm = std::f64::consts::PI.powf(-0.25);
        let len = 2 * half + 1;
        let mut env = Vec::with_capacity(len);
        let mut osc = Vec::with_capacity(len);
        for i in 0..len {
            let m = i as f64 - half as f64;
            let tau = m * dt / scale;
            let g = (-0.5 * tau * tau).exp();
            env.push(g);
            osc.push(Complex64::from_polar(g, omega * tau));
        }
        let sum_g: f64 = env.iter().sum();
        let sum_e: Complex64 = osc.iter().sum();
        let kappa = sum_e / sum_g;
        let psi: Vec<Complex64> = osc.iter().zip(&env).map(|(e, g)| (e - kappa * g) * norm).collect();
        let scale_norm = dt / scale.sqrt();
        let taps = psi.iter().map(|p| p.conj() * scale_norm).collect();
        Ok(Self { half, psi, taps })
    }

    pub fn half_width(&self) -> usize {
        self.half
    }

    /// Sampled wavelet values (before conjugation and normalization).
    pub fn values(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    /// `|sum psi| / sum |psi|` over the samples.
    pub fn mean_leak(&self) -> f64 {
        let s: Complex64 = self.psi.iter().sum();
        let l1: f64 = self.psi.iter().map(|p| p.norm()).sum();
        s.norm() / l1
    }
}

/// Geometrically spaced scales whose pseudo-frequencies span a band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleBand {
    /// Scales in seconds, strictly increasing.
    pub scales: Vec<f64>,
    /// `f0 / a` for each scale, Hz (decreasing).
    pub pseudo_freqs: Vec<f64>,
    pub f_min: f64,
    pub f_max: f64,
}

impl ScaleBand {
    pub fn len(&self) -> usize {
        self.scales.len()
    }
    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

/// Scales covering `[f_min, f_max]` inclusively with `ceil(log2(f_max/f_min)
/// * voices) + 1` geometrically spaced points; both band edges are hit
/// exactly.
pub fn build_scales(spec: &WaveletSpec, f_min: f64, f_max: f64, voices_per_octave: usize) -> Result<ScaleBand> {
    if !(f_min > 0.0 && f_max.is_finite()) || f_min > f_max {
        return Err(Error::invalid(format!("invalid band [{f_min}, {f_max}] Hz")));
    }
    if voices_per_octave < 1 {
        return Err(Error::invalid("voices per octave must be at least 1"));
    }
    let octaves = (f_max / f_min).log2();
    let n = ((octaves * voices_per_octave as f64) - 1e-9).ceil().max(0.0) as usize + 1;
    let a_min = spec.scale_for_freq(f_max);
    let a_max = spec.scale_for_freq(f_min);
    let scales: Vec<f64> = if n == 1 {
        vec![a_min]
    } else {
        let ratio = (a_max / a_min).ln() / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { a_max } else { a_min * (ratio * i as f64).exp() })
            .collect()
    };
    let pseudo_freqs = scales
        .iter()
        .map(|&a| spec.pseudo_freq(a).clamp(f_min, f_max))
        .collect();
    Ok(ScaleBand { scales, pseudo_freqs, f_min, f_max })
}

/// The 10-120 minute tide band at the default voice density.
pub fn tide_band(spec: &WaveletSpec) -> ScaleBand {
    build_scales(spec, 1.0 / TIDE_BAND_MAX_PERIOD_S, 1.0 / TIDE_BAND_MIN_PERIOD_S, DEFAULT_VOICES).expect("valid band")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    #[default]
    Reflect,
    Zero,
}

/// Complex CWT coefficients over (scale, time).
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    pub start: f64,
    pub dt: f64,
    pub scales: Vec<f64>,
    pub pseudo_freqs: Vec<f64>,
    /// `coeffs[scale][time]`.
    pub coeffs: Vec<Vec<Complex64>>,
    /// Cone-of-influence half-width per scale, seconds.
    pub coi: Vec<f64>,
}

impl Scalogram {
    pub fn len(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, col: usize) -> f64 {
        self.start + col as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Whether column `col` lies outside the cone of influence of scale `row`.
    pub fn is_interior(&self, row: usize, col: usize) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let left = col as f64 * self.dt;
        let right = (n - 1 - col) as f64 * self.dt;
        let coi = self.coi[row] * (1.0 - 1e-12);
        left >= coi && right >= coi
    }

    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        self.coeffs.iter().map(|row| row.iter().map(|c| c.norm()).collect()).collect()
    }
}

/// Maps position `i` into `0..n` by whole-sample symmetric reflection.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

/// Discrete CWT of a uniformly sampled real series.
pub fn cwt(values: &[f64], start: f64, dt: f64, band: &ScaleBand, spec: &WaveletSpec, padding: Padding) -> Result<Scalogram> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid("CWT needs at least two samples"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("CWT grid step must be positive"));
    }
    if band.is_empty() {
        return Err(Error::invalid("empty scale band"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("CWT input contains non-finite value {v}; fill gaps first")));
    }
    let nyquist = 0.5 / dt;
    if let Some(f) = band.pseudo_freqs.iter().find(|&&f| f >= nyquist) {
        return Err(Error::invalid(format!("pseudo-frequency {f} Hz is above the Nyquist frequency {nyquist} Hz")));
    }
    let kernels = band
        .scales
        .iter()
        .map(|&a| SampledKernel::new(spec, a, dt))
        .collect::<Result<Vec<_>>>()?;
    let pad = kernels.iter().map(SampledKernel::half_width).max().unwrap_or(0);
    let padded: Vec<f64> = (0..n + 2 * pad)
        .map(|i| {
            let j = i as isize - pad as isize;
            if (0..n as isize).contains(&j) {
                values[j as usize]
            } else {
                match padding {
                    Padding::Reflect => values[reflect_index(j, n)],
                    Padding::Zero => 0.0,
                }
            }
        })
        .collect();

    let row = |k: &SampledKernel| -> Vec<Complex64> {
        let half = k.half_width();
        let (re, im): (Vec<f64>, Vec<f64>) = k.taps().iter().map(|c| (c.re, c.im)).unzip();
        (0..n)
            .map(|col| {
                let base = col + pad - half;
                let window = &padded[base..base + re.len()];
                let (mut sr, mut si) = (0.0, 0.0);
                for ((x, r), i) in window.iter().zip(&re).zip(&im) {
                    sr += x * r;
                    si += x * i;
                }
                Complex64::new(sr, si)
            })
            .collect()
    };

    // Rows are independent; compute them on scoped threads and keep scale order.
    let threads = std::thread::available_parallelism().map_or(1, |p| p.get()).min(kernels.len());
    let coeffs: Vec<Vec<Complex64>> = if threads <= 1 || n * pad < 50_000 {
        kernels.iter().map(row).collect()
    } else {
        let chunk = kernels.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = kernels
                .chunks(chunk)
                .map(|ks| s.spawn(move || ks.iter().map(row).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("CWT worker panicked")).collect()
        })
    };

    let coi = band.scales.iter().map(|a| std::f64::consts::SQRT_2 * a).collect();
    Ok(Scalogram {
        start,
        dt,
        scales: band.scales.clone(),
        pseudo_freqs: band.pseudo_freqs.clone(),
        coeffs,
        coi,
    })
}

// ---------------------------------------------------------------------------
// Tide-band feature

/// Summed tide-band magnitude `S(b) = sum_a |W(a, b)|` on a uniform grid.
/// Masked samples are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TideBandFeature {
    pub start: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    /// `true` where every scale is inside its cone of influence.
    pub coi_valid: Vec<bool>,
    /// Cell id, or `"fused"`.
    pub provenance: String,
}

impl TideBandFeature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Finite, cone-of-influence-valid samples as `(time, value)` pairs.
    pub fn interior_samples(&self) -> Vec<(f64, f64)> {
        (0..self.len())
            .filter(|&i| self.coi_valid[i] && self.values[i].is_finite())
            .map(|i| (self.time(i), self.values[i]))
            .collect()
    }

    /// All finite samples as `(time, value)` pairs.
    pub fn finite_samples(&self) -> Vec<(f64, f64)> {
        (0..self.len())
            .filter(|&i| self.values[i].is_finite())
            .map(|i| (self.time(i), self.values[i]))
            .collect()
    }
}

pub fn summed_coefficient(scalogram: &Scalogram, provenance: impl Into<String>) -> TideBandFeature {
    let n = scalogram.len();
    let mut values = vec![0.0; n];
    for row in &scalogram.coeffs {
        for (v, c) in values.iter_mut().zip(row) {
            *v += c.norm();
        }
    }
    let coi_valid = (0..n).map(|col| (0..scalogram.scales.len()).all(|r| scalogram.is_interior(r, col))).collect();
    TideBandFeature { start: scalogram.start, dt: scalogram.dt, values, coi_valid, provenance: provenance.into() }
}

/// Linearly interpolates NaN gaps (nearest value at the ends). Returns the
/// filled series and the original validity mask, or `None` if nothing is
/// finite.
pub fn fill_gaps(values: &[f64]) -> Option<(Vec<f64>, Vec<bool>)> {
    let mask: Vec<bool> = values.iter().map(|v| v.is_finite()).collect();
    let idx: Vec<usize> = (0..values.len()).filter(|&i| mask[i]).collect();
    let (&first, &last) = (idx.first()?, idx.last()?);
    let mut out = values.to_vec();
    for v in out[..first].iter_mut() {
        *v = values[first];
    }
    for v in out[last + 1..].iter_mut() {
        *v = values[last];
    }
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a + 1..b {
            let t = (i - a) as f64 / (b - a) as f64;
            out[i] = values[a] + t * (values[b] - values[a]);
        }
    }
    Some((out, mask))
}

/// CWT + summed coefficient for a series that may contain masked (NaN)
/// samples: gaps are interpolated for the transform and masked again in the
/// resulting feature.
pub fn tide_band_feature(
    values: &[f64],
    start: f64,
    dt: f64,
    band: &ScaleBand,
    spec: &WaveletSpec,
    provenance: &str,
) -> Result<(Scalogram, TideBandFeature)> {
    let (filled, mask) = fill_gaps(values).ok_or_else(|| Error::invalid("series has no valid samples"))?;
    let scalogram = cwt(&filled, start, dt, band, spec, Padding::Reflect)?;
    let mut feature = summed_coefficient(&scalogram, provenance);
    for (v, ok) in feature.values.iter_mut().zip(mask) {
        if !ok {
            *v = f64::NAN;
        }
    }
    Ok((scalogram, feature))
}

/// Antenna-averaged summed coefficient of one metric of a series, computed
/// in the linear domain. A sample is NaN only when every antenna is masked
/// there. Returns the per-antenna scalograms alongside the feature, whose
/// provenance is the cell id.
pub fn series_feature(
    series: &MetricSeries,
    metric: Metric,
    band: &ScaleBand,
    spec: &WaveletSpec,
) -> Result<(Vec<Scalogram>, TideBandFeature)> {
    let lin = series.to_linear();
    let n = lin.len();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    let mut coi_valid = vec![true; n];
    let mut scalograms = Vec::with_capacity(lin.antennas());
    for a in 0..lin.antennas() {
        let (sg, f) = tide_band_feature(lin.channel(metric, a), lin.start(), lin.dt(), band, spec, lin.cell_id())?;
        for i in 0..n {
            if f.values[i].is_finite() {
                sum[i] += f.values[i];
                count[i] += 1;
            }
            coi_valid[i] &= f.coi_valid[i];
        }
        scalograms.push(sg);
    }
    let values = sum.iter().zip(&count).map(|(&s, &c)| if c == 0 { f64::NAN } else { s / c as f64 }).collect();
    let feature = TideBandFeature { start: lin.start(), dt: lin.dt(), values, coi_valid, provenance: lin.cell_id().to_string() };
    Ok((scalograms, feature))
}

// ---------------------------------------------------------------------------
// Ridge and phase

/// Dominant scale of a scalogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ridge {
    /// Peak pseudo-frequency, refined by a parabolic fit in log-scale.
    pub f_peak: f64,
    pub peak_scale_index: usize,
    /// Time-averaged interior magnitude per scale (NaN where a scale has no
    /// interior samples).
    pub mean_magnitude: Vec<f64>,
    /// Per-column argmax scale index.
    pub ridge: Vec<usize>,
    /// Fraction of interior columns whose argmax lies within one scale of
    /// the peak.
    pub stability: f64,
}

impl Ridge {
    /// Stability at or above this level counts as a persistent ridge.
    pub const PERSISTENT: f64 = 0.5;

    pub fn is_persistent(&self) -> bool {
        self.stability >= Self::PERSISTENT
    }
}

pub fn dominant_ridge(scalogram: &Scalogram) -> Result<Ridge> {
    let mags = scalogram.magnitudes();
    let n = scalogram.len();
    let rows = scalogram.scales.len();
    let mean_magnitude: Vec<f64> = (0..rows)
        .map(|r| {
            let vals: Vec<f64> = (0..n).filter(|&c| scalogram.is_interior(r, c)).map(|c| mags[r][c]).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    let peak = (0..rows)
        .filter(|&r| mean_magnitude[r].is_finite())
        .max_by(|&a, &b| mean_magnitude[a].total_cmp(&mean_magnitude[b]))
        .ok_or_else(|| Error::invalid("no scale has samples outside the cone of influence"))?;

    let mut log_scale = scalogram.scales[peak].ln();
    if peak > 0 && peak + 1 < rows {
        let (y0, y1, y2) = (mean_magnitude[peak - 1], mean_magnitude[peak], mean_magnitude[peak + 1]);
        if y0.is_finite() && y2.is_finite() && y0 > 0.0 && y2 > 0.0 {
            let (l0, l1, l2) = (y0.ln(), y1.ln(), y2.ln());
            let denom = l0 - 2.0 * l1 + l2;
            if denom < 0.0 {
                let x0 = scalogram.scales[peak - 1].ln();
                let x2 = scalogram.scales[peak + 1].ln();
                // Scales are geometric, so log-scale steps are equal.
                let offset = 0.5 * (l0 - l2) / denom;
                log_scale += offset.clamp(-1.0, 1.0) * 0.5 * (x2 - x0);
            }
        }
    }
    let f_peak = scalogram.pseudo_freqs[peak] * scalogram.scales[peak] / log_scale.exp();

    let ridge: Vec<usize> = (0..n)
        .map(|c| (0..rows).max_by(|&a, &b| mags[a][c].total_cmp(&mags[b][c])).unwrap_or(0))
        .collect();
    let interior: Vec<usize> = (0..n).filter(|&c| scalogram.is_interior(peak, c)).collect();
    let stable = interior.iter().filter(|&&c| ridge[c].abs_diff(peak) <= 1).count();
    let stability = if interior.is_empty() { 0.0 } else { stable as f64 / interior.len() as f64 };

    Ok(Ridge { f_peak, peak_scale_index: peak, mean_magnitude, ridge, stability })
}

/// Estimates the dominant period of a record (e.g. the semidiurnal tide)
/// from its scalogram over 3-24 h periods.
pub fn estimate_period(values: &[f64], start: f64, dt: f64, spec: &WaveletSpec) -> Result<(f64, Ridge)> {
    let band = build_scales(spec, 1.0 / TIDE_PERIOD_SEARCH_MAX_S, 1.0 / TIDE_PERIOD_SEARCH_MIN_S, 16)?;
    let (filled, _) = fill_gaps(values).ok_or_else(|| Error::invalid("series has no valid samples"))?;
    let scalogram = cwt(&filled, start, dt, &band, spec, Padding::Reflect)?;
    let ridge = dominant_ridge(&scalogram)?;
    Ok((1.0 / ridge.f_peak, ridge))
}

/// `(sin phi, cos phi)` with `phi = 2*pi*(t - origin)/period`.
pub fn tide_phase(times: &[f64], period: f64, origin: f64) -> Result<Vec<(f64, f64)>> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid(format!("tide period must be positive, got {period}")));
    }
    Ok(times
        .iter()
        .map(|&t| {
            let phi = 2.0 * std::f64::consts::PI * (t - origin) / period;
            phi.sin_cos()
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Rate relationship check

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleCorrelation {
    pub scale: f64,
    pub pseudo_freq: f64,
    pub interior_samples: usize,
    /// Pearson correlation of `|W(a, b)|` with `C(a, b) |h'(b)|`.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    /// The tide is flat, so the predicted magnitude is identically zero.
    pub degenerate: bool,
    pub first_moment: Complex64,
    pub per_scale: Vec<ScaleCorrelation>,
    /// Pearson correlation of `S(b)` with `|h'(b)| |sin(k h(b))|` over
    /// samples inside every scale's cone of influence.
    pub summed_correlation: Option<f64>,
    /// Pearson correlation of `S(b)` with `|h'(b)|` alone.
    pub rate_correlation: Option<f64>,
    /// Interior local minima of `S(b)`.
    pub minima: usize,
    /// Largest distance, in grid steps, from an interior local minimum of
    /// `S(b)` to the nearest zero crossing of `h'(b)`.
    pub minima_max_offset: Option<usize>,
    pub interior_samples: usize,
    pub max_abs_coefficient: f64,
}

/// Builds `x(t) = A + B cos(k h(t))` from a uniform tide series, transforms
/// it over `band`, and correlates the magnitudes with the first-order
/// prediction `C(a, b) |h'(b)|`, `C = B k |sin(k h(b))| |M1| a^(1/2)`.
pub fn verify_rate_lemma(tide: &TideSeries, envelope: &EnvelopeParams, band: &ScaleBand, spec: &WaveletSpec) -> Result<LemmaReport> {
    let dt = crate::ingest::uniform_step(tide.times())?;
    let h = tide.heights();
    let rate = tide.rate();
    let k = envelope.spatial_rate();
    let x: Vec<f64> = h.iter().map(|&hh| envelope.eval(hh)).collect();
    let scalogram = cwt(&x, tide.times()[0], dt, band, spec, Padding::Reflect)?;
    let max_abs_coefficient = scalogram.coeffs.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);

    let rate_scale = rate.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let h_range = h.iter().copied().fold(f64::NEG_INFINITY, f64::max) - h.iter().copied().fold(f64::INFINITY, f64::min);
    let degenerate = h_range == 0.0 || rate_scale == 0.0;
    let m1 = spec.first_moment().norm();

    let weight: Vec<f64> = h.iter().zip(&rate).map(|(&hh, r)| r.abs() * (k * hh).sin().abs()).collect();
    let mags = scalogram.magnitudes();
    let n = scalogram.len();
    let per_scale = (0..scalogram.scales.len())
        .map(|r| {
            let a = scalogram.scales[r];
            let cols: Vec<usize> = (0..n).filter(|&c| scalogram.is_interior(r, c)).collect();
            let measured: Vec<f64> = cols.iter().map(|&c| mags[r][c]).collect();
            let predicted: Vec<f64> = cols
                .iter()
                .map(|&c| envelope.amplitude() * k.abs() * m1 * a.sqrt() * weight[c])
                .collect();
            ScaleCorrelation {
                scale: a,
                pseudo_freq: scalogram.pseudo_freqs[r],
                interior_samples: cols.len(),
                correlation: if degenerate { None } else { stats::pearson(&measured, &predicted) },
            }
        })
        .collect();

    let feature = summed_coefficient(&scalogram, "lemma");
    let cols: Vec<usize> = (0..n).filter(|&c| feature.coi_valid[c]).collect();
    let s: Vec<f64> = cols.iter().map(|&c| feature.values[c]).collect();
    let w: Vec<f64> = cols.iter().map(|&c| weight[c]).collect();
    let summed_correlation = if degenerate { None } else { stats::pearson(&s, &w) };
    let r: Vec<f64> = cols.iter().map(|&c| rate[c].abs()).collect();
    let rate_correlation = if degenerate { None } else { stats::pearson(&s, &r) };

    // zero of h' between c-1 and c: take whichever side is closer to zero
    let zeros: Vec<usize> = (1..n)
        .filter(|&c| rate[c] == 0.0 || rate[c - 1].signum() != rate[c].signum())
        .map(|c| if rate[c - 1].abs() < rate[c].abs() { c - 1 } else { c })
        .collect();
    let v = &feature.values;
    let minima_idx: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&c| feature.coi_valid[c] && v[c] < v[c - 1] && v[c] < v[c + 1])
        .collect();
    let minima_max_offset = if zeros.is_empty() {
        None
    } else {
        minima_idx.iter().map(|&m| zeros.iter().map(|&z| z.abs_diff(m)).min().unwrap_or(usize::MAX)).max()
    };

    Ok(LemmaReport {
        degenerate,
        first_moment: spec.first_moment(),
        per_scale,
        summed_correlation,
        rate_correlation,
        minima: minima_idx.len(),
        minima_max_offset,
        interior_samples: cols.len(),
        max_abs_coefficient,
    })
}
