use proptest::prelude::*;
use tidewave::ingest::*;

fn sorted_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn clean_records(n: usize, dt: f64) -> Vec<MetricRecord> {
    let mut out = Vec::new();
    for i in 0..n {
        let t = 1.7e9 + i as f64 * dt;
        for a in 0..2 {
            let s = (i as f64 * 0.01 + a as f64).sin();
            out.push(MetricRecord {
                timestamp: t,
                cell_id: "c".into(),
                antenna: a,
                rsrp: -80.0 + 3.0 * s,
                rssi: -52.0 + 2.0 * s,
                rsrq: -11.0 + 0.3 * s,
            });
        }
    }
    out
}

#[test]
fn pipeline_is_idempotent_on_clean_uniform_data() {
    let cfg = IngestConfig::with_dt(60.0);
    let (once, _) = preprocess(clean_records(600, 60.0), &cfg).unwrap().remove(0);
    let (twice, _) = preprocess(once.to_db().to_records(), &cfg).unwrap().remove(0);
    assert_eq!(once.len(), twice.len());
    for ((m, a, x), (_, _, y)) in once.channels().zip(twice.channels()) {
        for (p, q) in x.iter().zip(y) {
            assert!(((p - q) / p).abs() < 1e-12, "{m:?}/{a}: {p} vs {q}");
        }
    }
}

#[test]
fn masked_values_never_reach_the_output() {
    let cfg = IngestConfig::with_dt(60.0);
    let run = |poison: f64| {
        let mut recs = clean_records(300, 60.0);
        recs[301].rsrp = poison;
        preprocess(recs, &cfg).unwrap().remove(0)
    };
    let (a, ra) = run(40.0);
    let (b, rb) = run(250.0);
    assert!(ra.iqr_flagged >= 1);
    assert_eq!(ra.iqr_flagged, rb.iqr_flagged);
    for ((_, _, x), (_, _, y)) in a.channels().zip(b.channels()) {
        for (p, q) in x.iter().zip(y) {
            assert!(p.to_bits() == q.to_bits() || (p.is_nan() && q.is_nan()));
        }
    }
}

proptest! {
    #[test]
    fn db_round_trip(x in -200.0f64..100.0) {
        let back = linear_to_db(db_to_linear(x));
        prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
        let y = db_to_linear(x);
        prop_assert!(((db_to_linear(linear_to_db(y)) - y) / y).abs() <= 1e-12);
    }

    #[test]
    fn hampel_matches_direct_window_oracle(
        values in prop::collection::vec(-50.0f64..50.0, 1..60),
        half in 1usize..5,
        n_mad in 0.5f64..4.0,
    ) {
        let out = hampel_filter(&values, half, n_mad).unwrap();
        for i in 0..values.len() {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            let window = values[lo..hi].to_vec();
            let med = sorted_median(window.clone());
            let mad = sorted_median(window.iter().map(|v| (v - med).abs()).collect());
            let expect = if (values[i] - med).abs() > n_mad * 1.4826 * mad { med } else { values[i] };
            prop_assert_eq!(out[i], expect);
        }
    }

    #[test]
    fn iqr_mask_matches_fences(values in prop::collection::vec(-10.0f64..10.0, 4..50), k in 0.0f64..3.0) {
        let mut s = values.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| {
            let pos = p * (s.len() - 1) as f64;
            let (i, f) = (pos.floor() as usize, pos.fract());
            if i + 1 < s.len() { s[i] + f * (s[i + 1] - s[i]) } else { s[i] }
        };
        let (q1, q3) = (q(0.25), q(0.75));
        let (lo, hi) = (q1 - k * (q3 - q1), q3 + k * (q3 - q1));
        let mask = iqr_mask(&values, k);
        for (v, ok) in values.iter().zip(mask) {
            prop_assert_eq!(ok, *v >= lo && *v <= hi);
        }
    }
}
