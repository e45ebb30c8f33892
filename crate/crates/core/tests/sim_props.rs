use approx::assert_relative_eq;
use proptest::prelude::*;
use tidewave::ingest::{Metric, MetricRecord};
use tidewave::sim::*;

fn los() -> LinkGeometry {
    LinkGeometry::river_los()
}

#[test]
fn exact_variation_matches_second_order_expansion() {
    let (ht, hr) = (45.0, 1.95);
    let d = 100.0 * (ht + hr) + 1.0;
    let g = LinkGeometry::new(ht, vec![hr], d, 2659.8e6).unwrap();
    let base = path_difference_exact(&g, 0, 0.0).unwrap();
    for i in 1..=20 {
        for h in [i as f64 * 0.05, -(i as f64) * 0.05] {
            let exact = path_difference_exact(&g, 0, h).unwrap() - base;
            let series = 2.0 * (ht - h) * (hr - h) / d - 2.0 * ht * hr / d;
            assert!(((exact - series) / series).abs() < 1e-3, "h={h}: {exact} vs {series}");
        }
    }
}

#[test]
fn linear_mode_is_periodic_in_cycle_height() {
    let g = los();
    let refl = ReflectionModel::default();
    for a in 0..g.antenna_count() {
        let c = cycle_height(&g, a).unwrap();
        for h in [-0.9, -0.31, 0.0, 0.17, 0.6] {
            let p0 = received_power(&g, a, h, &refl, 1.0, PhaseMode::Linearized).unwrap();
            let p1 = received_power(&g, a, h + c, &refl, 1.0, PhaseMode::Linearized).unwrap();
            assert_relative_eq!(p0, p1, max_relative = 1e-9, epsilon = 1e-12);
        }
    }
}

#[test]
fn nulls_sit_on_multiples_of_cycle_height() {
    let g = los();
    let refl = ReflectionModel::default();
    let c = cycle_height(&g, 0).unwrap();
    let step = 1e-4;
    let hs: Vec<f64> = (0..=24_000).map(|i| -1.2 + i as f64 * step).collect();
    let p: Vec<f64> = hs.iter().map(|&h| received_power(&g, 0, h, &refl, 1.0, PhaseMode::Linearized).unwrap()).collect();
    let mut minima = Vec::new();
    for i in 1..p.len() - 1 {
        if p[i] < p[i - 1] && p[i] <= p[i + 1] {
            minima.push(hs[i]);
        }
    }
    // -1.2..1.2 m spans nulls at -2c, -c, 0, c, 2c
    assert_eq!(minima.len(), 5);
    for h in minima {
        let n = (h / c).round();
        assert!((h - n * c).abs() <= step, "null at {h} is not a multiple of {c}");
    }
}

#[test]
fn sensitivity_scales_with_spatial_rate() {
    let refl = ReflectionModel::default();
    let g1 = LinkGeometry::new(45.0, vec![1.95], 420.0, 2659.8e6).unwrap();
    let g2 = LinkGeometry::new(45.0, vec![1.95], 630.0, 2659.8e6).unwrap();
    let slope = |g: &LinkGeometry| {
        // quarter cycle: phase pi/2, where |dP/dh| peaks
        let h = cycle_height(g, 0).unwrap() / 4.0;
        let e = 1e-6;
        let f = |h| received_power(g, 0, h, &refl, 1.0, PhaseMode::Linearized).unwrap();
        ((f(h + e) - f(h - e)) / (2.0 * e)).abs()
    };
    let ratio = slope(&g1) / slope(&g2);
    let k_ratio = g1.spatial_rate(0).unwrap() / g2.spatial_rate(0).unwrap();
    assert_relative_eq!(ratio, k_ratio, max_relative = 1e-6);
}

#[test]
fn full_cycle_sweep_returns_to_start() {
    let g = los();
    let c = cycle_height(&g, 0).unwrap();
    let times: Vec<f64> = (0..101).map(|i| i as f64 * 60.0).collect();
    let heights: Vec<f64> = (0..101).map(|i| i as f64 * c / 100.0).collect();
    let tide = TideSeries::new(times, heights).unwrap();
    let mut cfg = SimConfig::new(4);
    cfg.noise_std_db = 0.0;
    cfg.mode = PhaseMode::Linearized;
    cfg.noise_floor_dbm = -300.0;
    let s = simulate_metric_series(&g, &tide, &cfg).unwrap();
    let rsrp = s.channel(Metric::Rsrp, 0);
    assert_relative_eq!(rsrp[0], rsrp[100], max_relative = 1e-9);
}

#[test]
fn corruption_drops_and_perturbs() {
    let records: Vec<MetricRecord> = (0..5000)
        .map(|i| MetricRecord { timestamp: i as f64, cell_id: "c".into(), antenna: 0, rsrp: -80.0, rssi: -52.0, rsrq: -11.0 })
        .collect();
    let c = Corruption { scale_db: 3.0, dof: 1.5, dropout: 0.2 };
    let out = corrupt_records(&records, &c, 5).unwrap();
    let kept = out.len() as f64 / records.len() as f64;
    assert!((kept - 0.8).abs() < 0.03, "kept {kept}");
    assert!(out.iter().all(|r| r.rsrp != -80.0));
    assert_eq!(out, corrupt_records(&records, &c, 5).unwrap());
    assert!(corrupt_records(&records, &Corruption { dropout: 1.0, ..c }, 5).is_err());
}

proptest! {
    #[test]
    fn received_power_is_bounded(h in -3.0f64..3.0, mag in 0.0f64..1.0, phase in -3.2f64..3.2) {
        let refl = ReflectionModel::new(mag, phase).unwrap();
        let p = received_power(&los(), 1, h, &refl, 2.0, PhaseMode::Exact).unwrap();
        let hi = 2.0 * (1.0 + mag) * (1.0 + mag);
        let lo = 2.0 * (1.0 - mag) * (1.0 - mag);
        prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
    }
}
