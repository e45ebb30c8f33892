use proptest::prelude::*;
use tidewave::features::*;
use tidewave::ingest::{Domain, Metric, MetricSeries};

fn series(levels: &[Vec<f64>]) -> MetricSeries {
    // levels[row][antenna], reused for every metric with a metric-specific scale
    let n = levels.len();
    let k = levels[0].len();
    let mut s = MetricSeries::new("c", 0.0, 60.0, n, k, Domain::Linear).unwrap();
    for (j, m) in Metric::ALL.into_iter().enumerate() {
        for a in 0..k {
            let ch = s.channel_mut(m, a);
            for r in 0..n {
                ch[r] = levels[r][a] * (j + 1) as f64;
            }
        }
    }
    s
}

fn phase(n: usize) -> Vec<(f64, f64)> {
    (0..n).map(|i| (i as f64 * 0.1).sin_cos()).collect()
}

fn columns_matching<'a>(m: &'a FeatureMatrix, tag: &'a str) -> impl Iterator<Item = (usize, &'a String)> {
    m.column_names().iter().enumerate().filter(move |(_, c)| c.contains(tag))
}

fn levels_n(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.5f64..8.0, 3), n)
}

fn levels() -> impl Strategy<Value = Vec<Vec<f64>>> {
    levels_n(12)
}

proptest! {
    #[test]
    fn differences_ignore_a_common_offset(rows in levels(), c in -0.4f64..5.0) {
        let m0 = build_features(&series(&rows), &phase(rows.len()), None).unwrap();
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + c).collect()).collect();
        let m1 = build_features(&series(&shifted), &phase(rows.len()), None).unwrap();
        for (j, name) in columns_matching(&m0, "_diff_") {
            for r in 0..m0.n_rows() {
                let (a, b) = (m0.row(r)[j], m1.row(r)[j]);
                // the offset only enters through rounding of x + c
                let ulp = 4.0 * f64::EPSILON * 30.0;
                prop_assert!((a - b).abs() <= ulp, "{}: {} vs {}", name, a, b);
            }
        }
    }

    #[test]
    fn ratios_ignore_a_common_gain(rows in levels(), p in -6i32..6, gamma in 0.1f64..10.0) {
        let m0 = build_features(&series(&rows), &phase(rows.len()), None).unwrap();
        let scaled = |g: f64| -> Vec<Vec<f64>> { rows.iter().map(|r| r.iter().map(|v| v * g).collect()).collect() };
        let m2 = build_features(&series(&scaled(2f64.powi(p))), &phase(rows.len()), None).unwrap();
        let mg = build_features(&series(&scaled(gamma)), &phase(rows.len()), None).unwrap();
        for (j, _) in columns_matching(&m0, "_ratio_") {
            for r in 0..m0.n_rows() {
                prop_assert_eq!(m0.row(r)[j].to_bits(), m2.row(r)[j].to_bits());
                prop_assert!((m0.row(r)[j] - mg.row(r)[j]).abs() <= 4.0 * f64::EPSILON * m0.row(r)[j].abs());
            }
        }
    }

    #[test]
    fn standardization_never_sees_test_rows(rows in levels_n(40), junk in -1e3f64..1e3) {
        let s = series(&rows);
        let m = build_features(&s, &phase(rows.len()), None).unwrap();
        let plan = chrono_split(m.n_rows(), DEFAULT_SPLIT).unwrap();
        let (stats, _) = fit_standardize(&m, plan.train.clone()).unwrap();
        let mut poisoned = s.clone();
        for (m_, a) in Metric::ALL.into_iter().flat_map(|m_| (0..3).map(move |a| (m_, a))) {
            for r in plan.val.start..plan.test.end {
                poisoned.channel_mut(m_, a)[r] = junk.abs() + 1.0 + r as f64;
            }
        }
        let mp = build_features(&poisoned, &phase(rows.len()), None).unwrap();
        let (stats_p, _) = fit_standardize(&mp, plan.train.clone()).unwrap();
        prop_assert_eq!(stats, stats_p);
    }
}

#[test]
fn column_names_are_deterministic() {
    let a = feature_columns(4, true);
    assert_eq!(a, feature_columns(4, true));
    assert_eq!(schema_hash(&a), schema_hash(&feature_columns(4, true)));
    assert_ne!(schema_hash(&a), schema_hash(&feature_columns(4, false)));
    let pairs = a.iter().filter(|c| c.starts_with("rsrp_diff_")).count();
    assert_eq!(pairs, 6);
    assert!(a.contains(&"rsrq_ratio_a2_a3".to_string()));
    assert_eq!(&a[a.len() - 4..], ["sin_phi", "cos_phi", "s_fused", "s_fused_available"]);
}

#[test]
fn masked_channels_invalidate_rows() {
    let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![1.0 + i as f64, 2.0, 3.0]).collect();
    let mut s = series(&rows);
    s.channel_mut(Metric::Rssi, 1)[4] = f64::NAN;
    let m = build_features(&s, &phase(12), None).unwrap();
    assert!(!m.is_row_valid(4));
    assert!(m.row(4).iter().all(|v| v.is_nan()));
    assert_eq!(m.valid_rows(0..12).len(), 11);
}
