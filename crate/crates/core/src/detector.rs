//! Online tide-turn and peak-flow detection on a streaming `S(b)` feed.
//!
//! A sample `b_k` is a candidate once every sample up to `b_k + T_fwd` has
//! arrived. It is labelled high/low water when `S(b_k)` is the strict
//! minimum of the window `[b_k - T_back, b_k + T_fwd]`, and max flow when it
//! is the strict maximum. Ties produce no event. After a high/low-water
//! event, candidates within the next `refractory` seconds are skipped.
//!
//! Window extrema are maintained with two monotone deques, so a stream of
//! `N` samples costs `O(N)` deque operations.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cwt::TideBandFeature;
use crate::error::{Error, Result};

/// Slack used when comparing timestamps against window edges.
const TIME_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// `T_back`, seconds.
    pub look_back: f64,
    /// `T_fwd`, seconds.
    pub look_ahead: f64,
    /// Candidates skipped after a high/low-water event, seconds.
    pub refractory: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { look_back: 2700.0, look_ahead: 300.0, refractory: 300.0 }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.look_ahead > 0.0
            && self.look_back > self.look_ahead
            && self.look_back.is_finite()
            && self.refractory >= 0.0
            && self.refractory.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "detector needs look_back > look_ahead > 0 and refractory >= 0, got {} / {} / {}",
                self.look_back, self.look_ahead, self.refractory
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "high_low")]
    HighLowWater,
    #[serde(rename = "max_flow")]
    MaxFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    #[serde(rename = "t")]
    pub time: f64,
    pub kind: EventKind,
    #[serde(rename = "s_value")]
    pub value: f64,
    #[serde(rename = "emitted_at")]
    pub emit_time: f64,
}

/// Non-event messages from the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Notice {
    /// A gap longer than `T_fwd` cleared the window; `at` is the first
    /// sample of the new segment.
    GapReset { at: f64, gap: f64 },
}

#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    /// Samples of the current segment still needed; `base` is the segment
    /// index of `buf[0]`.
    buf: VecDeque<(f64, f64)>,
    base: usize,
    /// Next sample not yet inserted into the deques.
    inserted: usize,
    /// Next candidate to evaluate.
    candidate: usize,
    min_dq: VecDeque<usize>,
    max_dq: VecDeque<usize>,
    segment_start: Option<f64>,
    last_time: Option<f64>,
    refractory_until: Option<f64>,
    notices: Vec<Notice>,
    ops: u64,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            buf: VecDeque::new(),
            base: 0,
            inserted: 0,
            candidate: 0,
            min_dq: VecDeque::new(),
            max_dq: VecDeque::new(),
            segment_start: None,
            last_time: None,
            refractory_until: None,
            notices: Vec::new(),
            ops: 0,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn notices(&self) -> &[Notice] {
        &self.notices
    }

    /// Deque pushes and pops performed so far.
    pub fn operation_count(&self) -> u64 {
        self.ops
    }

    fn sample(&self, idx: usize) -> (f64, f64) {
        self.buf[idx - self.base]
    }

    fn reset(&mut self) {
        self.buf.clear();
        self.base = 0;
        self.inserted = 0;
        self.candidate = 0;
        self.min_dq.clear();
        self.max_dq.clear();
        self.segment_start = None;
        self.refractory_until = None;
    }

    /// Feeds one sample and returns any events that became decidable.
    pub fn push(&mut self, time: f64, value: f64) -> Result<Vec<DetectionEvent>> {
        if !time.is_finite() || !value.is_finite() {
            return Err(Error::invalid(format!("detector sample must be finite, got ({time}, {value})")));
        }
        if let Some(last) = self.last_time {
            if time <= last {
                return Err(Error::invalid(format!("detector timestamps must increase: {time} after {last}")));
            }
            if time - last > self.cfg.look_ahead + TIME_EPS {
                self.reset();
                self.notices.push(Notice::GapReset { at: time, gap: time - last });
            }
        }
        self.last_time = Some(time);
        self.segment_start.get_or_insert(time);
        self.buf.push_back((time, value));

        let mut events = Vec::new();
        while self.candidate < self.base + self.buf.len() {
            let (bk, sk) = self.sample(self.candidate);
            if time < bk + self.cfg.look_ahead - TIME_EPS {
                break;
            }
            self.advance_window(bk);
            if let Some(ev) = self.evaluate(self.candidate, bk, sk) {
                events.push(ev);
            }
            self.candidate += 1;
        }
        self.trim();
        Ok(events)
    }

    fn advance_window(&mut self, bk: f64) {
        let right = bk + self.cfg.look_ahead + TIME_EPS;
        while self.inserted < self.base + self.buf.len() && self.sample(self.inserted).0 <= right {
            let idx = self.inserted;
            let v = self.sample(idx).1;
            while let Some(&back) = self.min_dq.back() {
                if self.sample(back).1 > v {
                    self.min_dq.pop_back();
                    self.ops += 1;
                } else {
                    break;
                }
            }
            while let Some(&back) = self.max_dq.back() {
                if self.sample(back).1 < v {
                    self.max_dq.pop_back();
                    self.ops += 1;
                } else {
                    break;
                }
            }
            self.min_dq.push_back(idx);
            self.max_dq.push_back(idx);
            self.ops += 2;
            self.inserted += 1;
        }
        let left = bk - self.cfg.look_back - TIME_EPS;
        for dq in [&mut self.min_dq, &mut self.max_dq] {
            while let Some(&front) = dq.front() {
                if self.buf[front - self.base].0 < left {
                    dq.pop_front();
                    self.ops += 1;
                } else {
                    break;
                }
            }
        }
    }

    fn evaluate(&mut self, k: usize, bk: f64, sk: f64) -> Option<DetectionEvent> {
        let start = self.segment_start?;
        if start > bk - self.cfg.look_back + TIME_EPS {
            return None;
        }
        if let Some(until) = self.refractory_until {
            if bk <= until + TIME_EPS {
                return None;
            }
        }
        if self.min_dq.len() + self.max_dq.len() <= 2 {
            // Single-sample window: no extremum to speak of.
            return None;
        }
        let strict = |dq: &VecDeque<usize>, better: &dyn Fn(f64) -> bool| {
            dq.front() == Some(&k) && dq.get(1).is_none_or(|&j| better(self.sample(j).1))
        };
        let is_min = strict(&self.min_dq, &|v| v > sk);
        let is_max = strict(&self.max_dq, &|v| v < sk);
        let kind = if is_min {
            self.refractory_until = Some(bk + self.cfg.refractory);
            EventKind::HighLowWater
        } else if is_max {
            EventKind::MaxFlow
        } else {
            return None;
        };
        Some(DetectionEvent { time: bk, kind, value: sk, emit_time: bk + self.cfg.look_ahead })
    }

    /// Drops samples no longer reachable by any future window.
    fn trim(&mut self) {
        let keep_from = [self.candidate, self.inserted]
            .into_iter()
            .chain(self.min_dq.front().copied())
            .chain(self.max_dq.front().copied())
            .min()
            .unwrap_or(self.base);
        while self.base < keep_from {
            self.buf.pop_front();
            self.base += 1;
        }
    }
}

/// Runs the streaming detector over `(time, value)` samples.
pub fn detect_samples(samples: &[(f64, f64)], cfg: &DetectorConfig) -> Result<(Vec<DetectionEvent>, Vec<Notice>)> {
    let mut det = Detector::new(*cfg)?;
    let mut events = Vec::new();
    for &(t, v) in samples {
        events.extend(det.push(t, v)?);
    }
    Ok((events, det.notices))
}

/// Batch detection over the finite samples of a feature.
pub fn detect_offline(series: &TideBandFeature, cfg: &DetectorConfig) -> Result<(Vec<DetectionEvent>, Vec<Notice>)> {
    if series.is_empty() {
        return Err(Error::invalid("cannot run detection on an empty series"));
    }
    detect_samples(&series.finite_samples(), cfg)
}

/// Serializes events as JSON Lines.
pub fn events_to_jsonl(events: &[DetectionEvent]) -> Result<String> {
    let mut out = String::new();
    for ev in events {
        out.push_str(&serde_json::to_string(ev)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn events_from_jsonl(text: &str) -> Result<Vec<DetectionEvent>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
