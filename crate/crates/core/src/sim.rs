//! Two-ray (direct + single specular water bounce) channel simulator.
//!
//! Converts a tide-height profile and a link geometry into received-power
//! traces. The received power on antenna `k` is
//!
//! ```text
//! P(h) = P0 * [1 + |rho|^2 + 2|rho| cos(2*pi*dd(h)/lambda + phi_rho)]
//! dd(h) = sqrt(d^2 + (ht + hr - 2h)^2) - sqrt(d^2 + (ht - hr)^2)
//! ```
//!
//! where the reflected path carries the phasor `exp(-j*2*pi*dd/lambda)`.
//! The first-order form `dd ~= 2h(ht - hr)/d` is available as
//! [`PhaseMode::Linearized`]; note that a direct expansion of the exact path
//! difference has slope `-2(ht + hr)/d` at `h = 0`, not `2(ht - hr)/d`, so the
//! two modes are not interchangeable for absolute phase. The exact form is
//! the default.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{db_to_linear, linear_to_db, Domain, Metric, MetricRecord, MetricSeries};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Transmitter/receiver geometry of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryFields", into = "GeometryFields")]
pub struct LinkGeometry {
    tx_height: f64,
    rx_heights: Vec<f64>,
    range: f64,
    carrier_freq: f64,
    wavelength: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFields {
    tx_height: f64,
    rx_heights: Vec<f64>,
    range: f64,
    carrier_freq: f64,
}

impl TryFrom<GeometryFields> for LinkGeometry {
    type Error = Error;
    fn try_from(g: GeometryFields) -> Result<Self> {
        LinkGeometry::new(g.tx_height, g.rx_heights, g.range, g.carrier_freq)
    }
}

impl From<LinkGeometry> for GeometryFields {
    fn from(g: LinkGeometry) -> Self {
        GeometryFields { tx_height: g.tx_height, rx_heights: g.rx_heights, range: g.range, carrier_freq: g.carrier_freq }
    }
}

impl LinkGeometry {
    pub fn new(tx_height: f64, rx_heights: Vec<f64>, range: f64, carrier_freq: f64) -> Result<Self> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(range) {
            return Err(Error::invalid(format!("range must be positive, got {range}")));
        }
        if !positive(tx_height) {
            return Err(Error::invalid(format!("transmitter height must be positive, got {tx_height}")));
        }
        if rx_heights.is_empty() {
            return Err(Error::invalid("at least one receive antenna is required"));
        }
        if let Some(h) = rx_heights.iter().find(|h| !positive(**h)) {
            return Err(Error::invalid(format!("receiver heights must be positive, got {h}")));
        }
        if !positive(carrier_freq) {
            return Err(Error::invalid(format!("carrier frequency must be positive, got {carrier_freq}")));
        }
        Ok(Self { tx_height, rx_heights, range, carrier_freq, wavelength: SPEED_OF_LIGHT / carrier_freq })
    }

    /// River-crossing LOS link: 2659.8 MHz carrier, 45 m transmitter, four
    /// receive elements at 1.95/1.80/1.65/1.50 m, 420 m range.
    pub fn river_los() -> Self {
        Self::new(45.0, vec![1.95, 1.80, 1.65, 1.50], 420.0, 2659.8e6).expect("valid constants")
    }

    /// Obstructed link at 510 m with elements at 2.45/2.30/2.15/2.00 m.
    pub fn river_nlos() -> Self {
        Self::new(45.0, vec![2.45, 2.30, 2.15, 2.00], 510.0, 2659.8e6).expect("valid constants")
    }

    pub fn tx_height(&self) -> f64 {
        self.tx_height
    }
    pub fn rx_heights(&self) -> &[f64] {
        &self.rx_heights
    }
    pub fn range(&self) -> f64 {
        self.range
    }
    pub fn carrier_freq(&self) -> f64 {
        self.carrier_freq
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn antenna_count(&self) -> usize {
        self.rx_heights.len()
    }

    pub fn rx_height(&self, rx_index: usize) -> Result<f64> {
        self.rx_heights
            .get(rx_index)
            .copied()
            .ok_or(Error::AntennaIndex { index: rx_index, count: self.rx_heights.len() })
    }

    /// `d > 10 (ht + max hr)`. Informational only; the exact model is used
    /// regardless.
    pub fn far_field_ok(&self) -> bool {
        let max_rx = self.rx_heights.iter().copied().fold(0.0, f64::max);
        self.range > 10.0 * (self.tx_height + max_rx)
    }

    /// Envelope rate `k = 2*pi*(ht - hr)/(lambda*d)` in rad/m, as used in the
    /// envelope model `A + B cos(k h)`.
    pub fn spatial_rate(&self, rx_index: usize) -> Result<f64> {
        let hr = self.rx_height(rx_index)?;
        Ok(2.0 * std::f64::consts::PI * (self.tx_height - hr) / (self.wavelength * self.range))
    }

    /// Rate at which the linearized two-ray phase advances with tide height,
    /// `2*pi / cycle_height = 2k`.
    pub fn fringe_rate(&self, rx_index: usize) -> Result<f64> {
        Ok(2.0 * std::f64::consts::PI / cycle_height(self, rx_index)?)
    }
}

/// Surface reflection coefficient. Defaults to `|rho| = 1`, `phi = pi`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectionModel {
    pub magnitude: f64,
    pub phase: f64,
    /// Optional override as a function of grazing angle (radians) returning
    /// `(magnitude, phase)`. Unset by default.
    #[serde(skip)]
    pub angle_hook: Option<fn(f64) -> (f64, f64)>,
}

impl PartialEq for ReflectionModel {
    fn eq(&self, other: &Self) -> bool {
        self.magnitude == other.magnitude && self.phase == other.phase && self.angle_hook.is_some() == other.angle_hook.is_some()
    }
}

impl Default for ReflectionModel {
    fn default() -> Self {
        Self { magnitude: 1.0, phase: std::f64::consts::PI, angle_hook: None }
    }
}

impl ReflectionModel {
    pub fn new(magnitude: f64, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&magnitude) {
            return Err(Error::invalid(format!("reflection magnitude must lie in [0, 1], got {magnitude}")));
        }
        Ok(Self { magnitude, phase, angle_hook: None })
    }

    fn at_angle(&self, grazing: f64) -> (f64, f64) {
        match self.angle_hook {
            Some(f) => f(grazing),
            None => (self.magnitude, self.phase),
        }
    }
}

/// How the path difference is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    #[default]
    Exact,
    Linearized,
}

/// Exact excess length of the reflected path over the direct path.
pub fn path_difference_exact(geom: &LinkGeometry, rx_index: usize, h: f64) -> Result<f64> {
    let hr = geom.rx_height(rx_index)?;
    let (d, ht) = (geom.range, geom.tx_height);
    let reflected = d.hypot(ht + hr - 2.0 * h);
    let direct = d.hypot(ht - hr);
    Ok(reflected - direct)
}

/// First-order path difference `2h(ht - hr)/d`.
pub fn path_difference_linear(geom: &LinkGeometry, rx_index: usize, h: f64) -> Result<f64> {
    let hr = geom.rx_height(rx_index)?;
    Ok(2.0 * h * (geom.tx_height - hr) / geom.range)
}

pub fn path_difference(geom: &LinkGeometry, rx_index: usize, h: f64, mode: PhaseMode) -> Result<f64> {
    match mode {
        PhaseMode::Exact => path_difference_exact(geom, rx_index, h),
        PhaseMode::Linearized => path_difference_linear(geom, rx_index, h),
    }
}

/// Two-ray power for a given path difference.
pub fn power_from_path_difference(path_diff: f64, wavelength: f64, magnitude: f64, phase: f64, base_power: f64) -> f64 {
    let arg = 2.0 * std::f64::consts::PI * path_diff / wavelength + phase;
    let p = base_power * (1.0 + magnitude * magnitude + 2.0 * magnitude * arg.cos());
    p.max(0.0)
}

/// Received linear power on antenna `rx_index` at tide height `h`.
pub fn received_power(
    geom: &LinkGeometry,
    rx_index: usize,
    h: f64,
    refl: &ReflectionModel,
    base_power: f64,
    mode: PhaseMode,
) -> Result<f64> {
    if !(base_power > 0.0) {
        return Err(Error::invalid(format!("base power must be positive, got {base_power}")));
    }
    let hr = geom.rx_height(rx_index)?;
    let path_diff = path_difference(geom, rx_index, h, mode)?;
    let grazing = ((geom.tx_height + hr - 2.0 * h) / geom.range).atan();
    let (mag, phase) = refl.at_angle(grazing);
    Ok(power_from_path_difference(path_diff, geom.wavelength, mag, phase, base_power))
}

/// Tide change producing one full fade cycle, `lambda*d / (2(ht - hr))`.
pub fn cycle_height(geom: &LinkGeometry, rx_index: usize) -> Result<f64> {
    let hr = geom.rx_height(rx_index)?;
    let dh = geom.tx_height - hr;
    if dh == 0.0 {
        return Err(Error::NoHeightSensitivity);
    }
    Ok((geom.wavelength * geom.range / (2.0 * dh)).abs())
}

/// Baseband envelope `p(h) = A + B cos(k h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeParams {
    offset: f64,
    amplitude: f64,
    spatial_rate: f64,
}

impl EnvelopeParams {
    pub fn new(offset: f64, amplitude: f64, spatial_rate: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !offset.is_finite() || !amplitude.is_finite() || !spatial_rate.is_finite() {
            return Err(Error::invalid(format!(
                "envelope needs finite offset/rate and amplitude >= 0, got A={offset} B={amplitude} k={spatial_rate}"
            )));
        }
        Ok(Self { offset, amplitude, spatial_rate })
    }

    /// Envelope of antenna `rx_index` with unit offset and amplitude and
    /// `k = 2*pi*(ht - hr)/(lambda*d)`.
    pub fn for_antenna(geom: &LinkGeometry, rx_index: usize) -> Result<Self> {
        Self::new(1.0, 1.0, geom.spatial_rate(rx_index)?)
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn spatial_rate(&self) -> f64 {
        self.spatial_rate
    }

    pub fn eval(&self, h: f64) -> f64 {
        self.offset + self.amplitude * (self.spatial_rate * h).cos()
    }
}

// ---------------------------------------------------------------------------
// Tide profiles

/// Tide height (m above mean sea level) on strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TideSeries {
    times: Vec<f64>,
    heights: Vec<f64>,
}

impl TideSeries {
    pub fn new(times: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if times.len() != heights.len() {
            return Err(Error::invalid("tide times and heights differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("tide times must be strictly increasing"));
        }
        if heights.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tide series contains non-finite values"));
        }
        Ok(Self { times, heights })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation at `t`; NaN outside the covered span.
    pub fn height_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return f64::NAN;
        }
        let j = self.times.partition_point(|&x| x <= t);
        if j == 0 {
            return self.heights[0];
        }
        if j >= n {
            return self.heights[n - 1];
        }
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        self.heights[j - 1] + w * (self.heights[j] - self.heights[j - 1])
    }

    /// Central-difference rate of change (m/s), one-sided at the ends.
    pub fn rate(&self) -> Vec<f64> {
        let (t, h) = (&self.times, &self.heights);
        let n = t.len();
        (0..n)
            .map(|i| match (i, n) {
                (_, 0 | 1) => 0.0,
                (0, _) => (h[1] - h[0]) / (t[1] - t[0]),
                (i, n) if i == n - 1 => (h[i] - h[i - 1]) / (t[i] - t[i - 1]),
                (i, _) => (h[i + 1] - h[i - 1]) / (t[i + 1] - t[i - 1]),
            })
            .collect()
    }
}

/// Sinusoidal tide `mean + amplitude * sin(2*pi*t/period + phase)` with `t`
/// measured from the first grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TideParams {
    pub period: f64,
    pub amplitude: f64,
    pub mean: f64,
    pub phase: f64,
}

/// Semidiurnal tide period used throughout, 12.6 h.
pub const SEMIDIURNAL_PERIOD_S: f64 = 12.6 * 3600.0;

impl Default for TideParams {
    fn default() -> Self {
        Self { period: SEMIDIURNAL_PERIOD_S, amplitude: 0.5, mean: 0.0, phase: 0.0 }
    }
}

impl TideParams {
    fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    /// Height at `t_rel` seconds after the series origin.
    pub fn height(&self, t_rel: f64) -> f64 {
        self.mean + self.amplitude * (self.omega() * t_rel + self.phase).sin()
    }

    /// Analytic rate of change at `t_rel` (m/s).
    pub fn rate(&self, t_rel: f64) -> f64 {
        self.amplitude * self.omega() * (self.omega() * t_rel + self.phase).cos()
    }

    /// Relative times of slack water (`rate == 0`) within `[0, duration]`.
    pub fn slack_times(&self, duration: f64) -> Vec<f64> {
        let half = self.period / 2.0;
        // omega t + phase = pi/2 + n*pi
        let t_first = (std::f64::consts::FRAC_PI_2 - self.phase) / self.omega();
        let n0 = (-t_first / half).ceil() as i64;
        (n0..)
            .map(|n| t_first + n as f64 * half)
            .take_while(|&t| t <= duration)
            .filter(|&t| t >= 0.0)
            .collect()
    }

    /// Relative times of maximum flow (`|rate|` maximal) within `[0, duration]`.
    pub fn peak_flow_times(&self, duration: f64) -> Vec<f64> {
        let half = self.period / 2.0;
        let t_first = -self.phase / self.omega();
        let n0 = (-t_first / half).ceil() as i64;
        (n0..)
            .map(|n| t_first + n as f64 * half)
            .take_while(|&t| t <= duration)
            .filter(|&t| t >= 0.0)
            .collect()
    }
}

/// `floor(duration/dt) + 1` grid points starting at `start`.
pub fn uniform_grid(start: f64, duration: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::invalid("grid needs positive step and non-negative duration"));
    }
    let n = (duration / dt + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * dt).collect())
}

/// Evaluates a sinusoidal tide on `grid`.
pub fn synth_tide(params: &TideParams, grid: &[f64]) -> Result<TideSeries> {
    synth_tide_noisy(params, grid, 0.0, 0)
}

/// Like [`synth_tide`] with additive Gaussian noise of `noise_std` metres.
pub fn synth_tide_noisy(params: &TideParams, grid: &[f64], noise_std: f64, seed: u64) -> Result<TideSeries> {
    if !(params.period > 0.0) {
        return Err(Error::invalid("tide period must be positive"));
    }
    if grid.is_empty() {
        return Err(Error::invalid("tide grid is empty"));
    }
    let t0 = grid[0];
    let mut heights: Vec<f64> = grid.iter().map(|&t| params.height(t - t0)).collect();
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::invalid(e.to_string()))?;
        for h in heights.iter_mut() {
            *h += normal.sample(&mut rng);
        }
    }
    TideSeries::new(grid.to_vec(), heights)
}

// ---------------------------------------------------------------------------
// Metric synthesis

/// RSSI is synthesized as `RSRP + RSSI_OFFSET_DB + noise` (full-band power of
/// 100 resource blocks over the per-RE reference power, minus a little
/// load), and RSRQ as `RSRQ_BASE_DB + RSRQ_SLOPE * (RSRP - RSRQ_REF_DBM) + noise`.
pub const RSSI_OFFSET_DB: f64 = 28.0;
pub const RSRQ_BASE_DB: f64 = -10.8;
pub const RSRQ_SLOPE: f64 = 0.1;
pub const RSRQ_REF_DBM: f64 = -80.0;

/// Parameters of a synthetic capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cell_id: String,
    /// Direct-path power `P0` per antenna in dBm.
    pub base_power_dbm: Vec<f64>,
    /// Standard deviation of the additive dB noise on every metric.
    pub noise_std_db: f64,
    /// Receiver noise floor added in the linear domain before conversion to
    /// dBm, so perfect cancellation stays finite.
    pub noise_floor_dbm: f64,
    pub mode: PhaseMode,
    pub reflection: ReflectionModel,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(antennas: usize) -> Self {
        Self {
            cell_id: "cell0".into(),
            base_power_dbm: vec![-78.0; antennas],
            noise_std_db: 1.0,
            noise_floor_dbm: -120.0,
            mode: PhaseMode::Exact,
            reflection: ReflectionModel::default(),
            seed: 42,
        }
    }
}

/// Noise-free RSRP (dBm) per antenna for every tide sample.
pub fn clean_rsrp_dbm(geom: &LinkGeometry, tide: &TideSeries, cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    if cfg.base_power_dbm.len() != geom.antenna_count() {
        return Err(Error::invalid(format!(
            "{} base powers given for {} antennas",
            cfg.base_power_dbm.len(),
            geom.antenna_count()
        )));
    }
    let floor = db_to_linear(cfg.noise_floor_dbm);
    (0..geom.antenna_count())
        .map(|a| {
            let p0 = db_to_linear(cfg.base_power_dbm[a]);
            tide.heights()
                .iter()
                .map(|&h| Ok(linear_to_db(received_power(geom, a, h, &cfg.reflection, p0, cfg.mode)? + floor)))
                .collect()
        })
        .collect()
}

/// Synthesizes per-antenna RSRP/RSSI/RSRQ (dB domain) on the tide's time grid,
/// which must be uniform. Output is a deterministic function of `cfg.seed`.
pub fn simulate_metric_series(geom: &LinkGeometry, tide: &TideSeries, cfg: &SimConfig) -> Result<MetricSeries> {
    let rsrp = clean_rsrp_dbm(geom, tide, cfg)?;
    let k = geom.antenna_count();
    let mut series = MetricSeries::from_times(&cfg.cell_id, tide.times(), k, Domain::Db)?;
    let normal = Normal::new(0.0, cfg.noise_std_db.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise = || if cfg.noise_std_db > 0.0 { normal.sample(&mut rng) } else { 0.0 };

    let n = tide.len();
    let mut cols = vec![vec![0.0; n]; 3 * k];
    for i in 0..n {
        for a in 0..k {
            let clean = rsrp[a][i];
            let r = clean + noise();
            let s = clean + RSSI_OFFSET_DB + noise();
            let q = RSRQ_BASE_DB + RSRQ_SLOPE * (clean - RSRQ_REF_DBM) + noise();
            cols[3 * a][i] = r;
            cols[3 * a + 1][i] = s;
            cols[3 * a + 2][i] = q;
        }
    }
    for a in 0..k {
        for (j, m) in Metric::ALL.into_iter().enumerate() {
            series.channel_mut(m, a).copy_from_slice(&cols[3 * a + j]);
        }
    }
    Ok(series)
}

/// Heavy-tailed corruption applied to logged records: Student-t noise of
/// `dof` degrees of freedom scaled by `scale_db` on every metric, and
/// independent dropout of whole records with probability `dropout`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corruption {
    pub scale_db: f64,
    pub dof: f64,
    pub dropout: f64,
}

pub fn corrupt_records(records: &[MetricRecord], c: &Corruption, seed: u64) -> Result<Vec<MetricRecord>> {
    if !(0.0..1.0).contains(&c.dropout) || !(c.scale_db >= 0.0) {
        return Err(Error::invalid("dropout must be in [0, 1) and scale non-negative"));
    }
    let t = StudentT::new(c.dof).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let keep = rng.random::<f64>() >= c.dropout;
        let mut r = r.clone();
        r.rsrp += c.scale_db * t.sample(&mut rng);
        r.rssi += c.scale_db * t.sample(&mut rng);
        r.rsrq += c.scale_db * t.sample(&mut rng);
        if keep {
            out.push(r);
        }
    }
    Ok(out)
}
