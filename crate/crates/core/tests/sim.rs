use tidewave::sim::*;
use tidewave::Error;
use approx::assert_relative_eq;

fn geom() -> LinkGeometry {
    LinkGeometry::river_los()
}

#[test]
fn geometry_validation() {
    assert!(LinkGeometry::new(0.0, vec![1.0], 100.0, 1e9).is_err());
    assert!(LinkGeometry::new(10.0, vec![-1.0], 100.0, 1e9).is_err());
    assert!(LinkGeometry::new(10.0, vec![1.0], 0.0, 1e9).is_err());
    assert!(LinkGeometry::new(10.0, vec![], 100.0, 1e9).is_err());
    let g = geom();
    assert!(((g.wavelength() * g.carrier_freq() - SPEED_OF_LIGHT) / SPEED_OF_LIGHT).abs() < 1e-9);
    assert!(!g.far_field_ok());
    assert!(LinkGeometry::new(10.0, vec![1.0], 1000.0, 1e9).unwrap().far_field_ok());
}

#[test]
fn geometry_serde_validates() {
    let g = geom();
    let text = serde_json::to_string(&g).unwrap();
    let back: LinkGeometry = serde_json::from_str(&text).unwrap();
    assert_eq!(back, g);
    assert!(serde_json::from_str::<LinkGeometry>(
        r#"{"tx_height":-1,"rx_heights":[1],"range":10,"carrier_freq":1e9}"#
    )
    .is_err());
}

#[test]
fn exact_path_difference_at_mean_sea_level() {
    let expected = (420f64.powi(2) + 46.95f64.powi(2)).sqrt() - (420f64.powi(2) + 43.05f64.powi(2)).sqrt();
    let got = path_difference_exact(&geom(), 0, 0.0).unwrap();
    assert_relative_eq!(got, expected, max_relative = 1e-12);
    // 40-digit reference evaluation
    assert_relative_eq!(got, 0.415_474_805_250_625_1, max_relative = 1e-12);
}

#[test]
fn exact_path_difference_grazing_symmetry() {
    let g = geom();
    let hr = g.rx_height(2).unwrap();
    let h = (g.tx_height() + hr) / 2.0;
    let expected = g.range() - g.range().hypot(g.tx_height() - hr);
    assert_relative_eq!(path_difference_exact(&g, 2, h).unwrap(), expected, max_relative = 1e-12);
}

#[test]
fn exact_path_difference_small_step() {
    let g = geom();
    let change = path_difference_exact(&g, 0, 0.10).unwrap() - path_difference_exact(&g, 0, 0.0).unwrap();
    // 40-digit reference evaluation; the first-order estimate
    // -2(ht + hr - 2*0.05)*0.1/d = -0.022310 agrees to within 1%.
    assert_relative_eq!(change, -0.022_172_007_920_684_69, max_relative = 1e-9);
    let first_order = -2.0 * (45.0 + 1.95 - 0.1) * 0.1 / 420.0;
    assert!(((change - first_order) / first_order).abs() < 0.01);
}

#[test]
fn antenna_index_errors() {
    assert!(matches!(path_difference_exact(&geom(), 4, 0.0), Err(Error::AntennaIndex { index: 4, count: 4 })));
    assert!(path_difference_linear(&geom(), 9, 0.0).is_err());
}

#[test]
fn linear_path_difference() {
    let g = geom();
    assert_eq!(path_difference_linear(&g, 0, 0.0).unwrap(), 0.0);
    assert_relative_eq!(path_difference_linear(&g, 0, 0.5).unwrap(), 43.05 / 420.0, max_relative = 1e-12);
    let flat = LinkGeometry::new(2.0, vec![2.0], 100.0, 1e9).unwrap();
    assert_eq!(path_difference_linear(&flat, 0, 0.7).unwrap(), 0.0);
}

#[test]
fn received_power_special_cases() {
    let lam = geom().wavelength();
    let pi = std::f64::consts::PI;
    assert!(power_from_path_difference(0.0, lam, 1.0, pi, 2.0).abs() < 1e-15);
    assert_relative_eq!(power_from_path_difference(lam / 2.0, lam, 1.0, pi, 2.0), 8.0, max_relative = 1e-12);
    let direct = ReflectionModel::new(0.0, pi).unwrap();
    for h in [-0.5, 0.0, 0.3] {
        assert_relative_eq!(received_power(&geom(), 1, h, &direct, 3.0, PhaseMode::Exact).unwrap(), 3.0);
    }
    assert!(received_power(&geom(), 0, 0.0, &Default::default(), 0.0, PhaseMode::Exact).is_err());
    assert!(ReflectionModel::new(1.5, 0.0).is_err());
}

#[test]
fn angle_hook_overrides_coefficient() {
    let refl = ReflectionModel { angle_hook: Some(|_| (0.0, 0.0)), ..Default::default() };
    assert_relative_eq!(received_power(&geom(), 0, 0.1, &refl, 1.0, PhaseMode::Exact).unwrap(), 1.0);
}

#[test]
fn cycle_height_values() {
    let g = geom();
    let c = cycle_height(&g, 0).unwrap();
    assert_relative_eq!(c, 0.549_816_615_590_022_4, max_relative = 1e-12);
    let far = LinkGeometry::new(45.0, vec![1.95], 840.0, 2659.8e6).unwrap();
    assert_relative_eq!(cycle_height(&far, 0).unwrap(), 2.0 * c, max_relative = 1e-12);
    let high = LinkGeometry::new(45.0, vec![1.95], 420.0, 2.0 * 2659.8e6).unwrap();
    assert_relative_eq!(cycle_height(&high, 0).unwrap(), 0.5 * c, max_relative = 1e-12);
    let flat = LinkGeometry::new(2.0, vec![2.0], 100.0, 1e9).unwrap();
    assert!(matches!(cycle_height(&flat, 0), Err(Error::NoHeightSensitivity)));
    assert_relative_eq!(g.fringe_rate(0).unwrap(), 2.0 * g.spatial_rate(0).unwrap(), max_relative = 1e-12);
}

#[test]
fn synth_tide_cases() {
    let grid = uniform_grid(0.0, 3.0 * 86400.0, 210.0).unwrap();
    assert_eq!(grid.len(), 1235);
    let flat = synth_tide(&TideParams { amplitude: 0.0, mean: 0.3, ..Default::default() }, &grid).unwrap();
    assert!(flat.heights().iter().all(|&h| h == 0.3));
    let p = TideParams { period: 400.0, amplitude: 2.0, mean: 1.0, phase: 0.0 };
    let s = synth_tide(&p, &[1000.0, 1100.0]).unwrap();
    assert_relative_eq!(s.heights()[1], 3.0, max_relative = 1e-12);
    assert!(synth_tide(&p, &[]).is_err());
    assert!(synth_tide(&TideParams { period: 0.0, ..p }, &grid).is_err());
}

#[test]
fn slack_and_peak_schedules() {
    let p = TideParams { period: 100.0, amplitude: 1.0, mean: 0.0, phase: 0.0 };
    let slack = p.slack_times(200.0);
    assert_eq!(slack.len(), 4);
    for (s, e) in slack.iter().zip([25.0, 75.0, 125.0, 175.0]) {
        assert!((s - e).abs() < 1e-9);
    }
    let peaks = p.peak_flow_times(200.0);
    for (s, e) in peaks.iter().zip([0.0, 50.0, 100.0, 150.0, 200.0]) {
        assert!((s - e).abs() < 1e-9);
    }
    for t in slack {
        assert!(p.rate(t).abs() < 1e-12);
    }
}

#[test]
fn simulation_is_deterministic_and_flat_for_flat_tide() {
    let g = geom();
    let grid = uniform_grid(1.7e9, 3600.0, 6.0).unwrap();
    let flat = synth_tide(&TideParams { amplitude: 0.0, ..Default::default() }, &grid).unwrap();
    let mut cfg = SimConfig::new(4);
    cfg.noise_std_db = 0.0;
    let s = simulate_metric_series(&g, &flat, &cfg).unwrap();
    for (_, _, ch) in s.channels() {
        assert!(ch.iter().all(|v| *v == ch[0]));
    }
    let tide = synth_tide(&TideParams::default(), &grid).unwrap();
    cfg.noise_std_db = 1.0;
    let a = simulate_metric_series(&g, &tide, &cfg).unwrap();
    let b = simulate_metric_series(&g, &tide, &cfg).unwrap();
    assert_eq!(a, b);
    cfg.seed = 43;
    assert_ne!(a, simulate_metric_series(&g, &tide, &cfg).unwrap());
}

#[test]
fn base_power_count_must_match() {
    let grid = uniform_grid(0.0, 60.0, 6.0).unwrap();
    let tide = synth_tide(&TideParams::default(), &grid).unwrap();
    assert!(simulate_metric_series(&geom(), &tide, &SimConfig::new(3)).is_err());
}
