use proptest::prelude::*;
use tidewave::cwt::TideBandFeature;
use tidewave::detector::*;

const EPS: f64 = 1e-6;

/// Direct window scan: for every sample, look at all samples within
/// `[t - T_back, t + T_fwd]` of the same gap-free segment.
fn oracle(samples: &[(f64, f64)], cfg: &DetectorConfig) -> Vec<DetectionEvent> {
    let mut segments: Vec<&[(f64, f64)]> = Vec::new();
    let mut start = 0;
    for i in 1..=samples.len() {
        if i == samples.len() || samples[i].0 - samples[i - 1].0 > cfg.look_ahead + EPS {
            segments.push(&samples[start..i]);
            start = i;
        }
    }
    let mut out = Vec::new();
    for seg in segments {
        let (t0, t_last) = (seg[0].0, seg[seg.len() - 1].0);
        let mut last_turn: Option<f64> = None;
        for &(t, v) in seg {
            if t_last < t + cfg.look_ahead - EPS || t0 > t - cfg.look_back + EPS {
                continue;
            }
            if last_turn.is_some_and(|lt| t <= lt + cfg.refractory + EPS) {
                continue;
            }
            let others: Vec<f64> = seg
                .iter()
                .filter(|&&(u, _)| u != t && u >= t - cfg.look_back - EPS && u <= t + cfg.look_ahead + EPS)
                .map(|&(_, w)| w)
                .collect();
            if others.is_empty() {
                continue;
            }
            let kind = if others.iter().all(|&w| w > v) {
                last_turn = Some(t);
                EventKind::HighLowWater
            } else if others.iter().all(|&w| w < v) {
                EventKind::MaxFlow
            } else {
                continue;
            };
            out.push(DetectionEvent { time: t, kind, value: v, emit_time: t + cfg.look_ahead });
        }
    }
    out
}

fn stream(steps: Vec<(f64, i32)>) -> Vec<(f64, f64)> {
    let mut t = 0.0;
    steps
        .into_iter()
        .map(|(dt, v)| {
            t += dt;
            (t, v as f64)
        })
        .collect()
}

proptest! {
    #[test]
    fn streaming_matches_window_scan(steps in prop::collection::vec((prop_oneof![9 => 30.0f64..90.0, 1 => 301.0f64..900.0], -6i32..6), 1..400)) {
        let samples = stream(steps);
        let cfg = DetectorConfig::default();
        let (events, _) = detect_samples(&samples, &cfg).unwrap();
        prop_assert_eq!(events, oracle(&samples, &cfg));
    }

    #[test]
    fn offline_equals_concatenated_pushes(values in prop::collection::vec(prop_oneof![9 => -1.0f64..1.0, 1 => Just(f64::NAN)], 1..300)) {
        let f = TideBandFeature { start: 1000.0, dt: 60.0, values: values.clone(), coi_valid: vec![true; values.len()], provenance: "c".into() };
        let cfg = DetectorConfig::default();
        let (offline, _) = detect_offline(&f, &cfg).unwrap();
        let mut det = Detector::new(cfg).unwrap();
        let mut streamed = Vec::new();
        for (i, &v) in values.iter().enumerate() {
            if v.is_finite() {
                streamed.extend(det.push(f.time(i), v).unwrap());
            }
        }
        prop_assert_eq!(offline.len(), streamed.len());
        for (a, b) in offline.iter().zip(&streamed) {
            prop_assert_eq!(a.time.to_bits(), b.time.to_bits());
            prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
            prop_assert_eq!(a.emit_time.to_bits(), b.emit_time.to_bits());
            prop_assert_eq!(a.kind, b.kind);
        }
    }

    #[test]
    fn events_are_causal_and_final(values in prop::collection::vec(-3i32..3, 1..300)) {
        let cfg = DetectorConfig::default();
        let mut det = Detector::new(cfg).unwrap();
        for (i, &v) in values.iter().enumerate() {
            let t = i as f64 * 60.0;
            for ev in det.push(t, v as f64).unwrap() {
                prop_assert!(t >= ev.time + cfg.look_ahead - EPS);
                prop_assert_eq!(ev.emit_time - ev.time, cfg.look_ahead);
            }
        }
    }
}

#[test]
fn deque_work_is_linear() {
    let cfg = DetectorConfig::default();
    for n in [1_000usize, 10_000, 100_000] {
        let mut det = Detector::new(cfg).unwrap();
        let mut x: u64 = 12345;
        for i in 0..n {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            det.push(i as f64 * 60.0, (x >> 33) as f64).unwrap();
        }
        // each sample enters and leaves each of the two deques at most once
        assert!(det.operation_count() <= 4 * n as u64, "{} ops for {n}", det.operation_count());
    }
}

#[test]
fn folded_cosine_extrema_are_found_on_time() {
    let period = 12.6 * 3600.0;
    let n = 3 * 1440;
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = i as f64 * 60.0;
            (t, (2.0 * std::f64::consts::PI * t / period).cos().abs())
        })
        .collect();
    let cfg = DetectorConfig::default();
    let (events, _) = detect_samples(&samples, &cfg).unwrap();
    let half = period / 2.0;
    let turns: Vec<_> = events.iter().filter(|e| e.kind == EventKind::HighLowWater).collect();
    let peaks: Vec<_> = events.iter().filter(|e| e.kind == EventKind::MaxFlow).collect();
    let last = (n - 1) as f64 * 60.0;
    let decidable = |t: &f64| *t >= cfg.look_back && *t <= last - cfg.look_ahead;
    let true_turns = (0..20).map(|k| half / 2.0 + k as f64 * half).filter(decidable).count();
    let true_peaks = (0..20).map(|k| k as f64 * half).filter(decidable).count();
    assert_eq!(turns.len(), true_turns);
    assert_eq!(peaks.len(), true_peaks);
    for e in &turns {
        let k = ((e.time - half / 2.0) / half).round();
        assert!((e.time - (half / 2.0 + k * half)).abs() <= 60.0 + EPS);
    }
    for e in &peaks {
        let k = (e.time / half).round();
        assert!((e.time - k * half).abs() <= 60.0 + EPS);
    }
    assert!(events.iter().all(|e| e.emit_time - e.time == cfg.look_ahead));
}
