use tidewave::ingest::*;
use tidewave::Error;

fn rec(t: f64, rsrp: f64) -> MetricRecord {
    MetricRecord { timestamp: t, cell_id: "c".into(), antenna: 0, rsrp, rssi: -60.0, rsrq: -10.0 }
}

#[test]
fn parse_empty_file_with_header() {
    let report = parse_records("t_unix_s,cell_id,antenna,rsrp_dbm,rssi_dbm,rsrq_db\n".as_bytes(), &Default::default()).unwrap();
    assert!(report.records.is_empty());
    assert!(report.errors.is_empty());
}

#[test]
fn parse_reports_bad_rows_with_line_numbers() {
    let text = "t_unix_s,cell_id,antenna,rsrp_dbm,rssi_dbm,rsrq_db\n\
                0,a,0,-80,-50,-10\n\
                6,a,0,abc,-50,-10\n\
                12,a,0,-80,-50\n\
                18,a,1,-81,-51,-11\n";
    let report = parse_records(text.as_bytes(), &Default::default()).unwrap();
    assert_eq!(report.records.len(), 2);
    assert_eq!(report.errors.len(), 2);
    assert_eq!(report.errors[0].line, 3);
    assert!(report.errors[0].message.contains("rsrp_dbm"));
    assert_eq!(report.errors[1].line, 4);
    assert!(report.errors[1].message.contains("columns"));
    assert!(matches!(report.into_strict(), Err(Error::Parse { line: 3, .. })));
}

#[test]
fn parse_rejects_wrong_header() {
    let err = parse_records("time,cell,ant\n".as_bytes(), &Default::default()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
}

#[test]
fn parse_checks_antenna_count() {
    let text = "t_unix_s,cell_id,antenna,rsrp_dbm,rssi_dbm,rsrq_db\n0,a,4,-80,-50,-10\n";
    let fmt = FormatDescriptor { antenna_count: Some(4), ..Default::default() };
    let report = parse_records(text.as_bytes(), &fmt).unwrap();
    assert_eq!(report.errors.len(), 1);
}

#[test]
fn drop_invalid_removes_zero_metrics() {
    let mut bad = rec(0.0, 0.0);
    let good = rec(1.0, -80.0);
    let mut bad_rsrq = rec(2.0, -80.0);
    bad_rsrq.rsrq = 0.0;
    assert_eq!(drop_invalid(vec![bad.clone(), good.clone(), bad_rsrq]), vec![good]);
    bad.rssi = 0.0;
    bad.rsrq = 0.0;
    assert!(drop_invalid(vec![bad]).is_empty());
}

#[test]
fn db_conversions() {
    assert_eq!(db_to_linear(0.0), 1.0);
    assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
    assert!((db_to_linear(-90.0) - 1e-9).abs() < 1e-21);
}

#[test]
fn iqr_hand_worked() {
    assert_eq!(iqr_fences(&[1.0, 2.0, 3.0, 4.0, 100.0], 1.0), Some((0.0, 6.0)));
    assert_eq!(iqr_mask(&[1.0, 2.0, 3.0, 4.0, 100.0], 1.0), vec![true, true, true, true, false]);
    assert!(iqr_mask(&[7.0; 6], 1.0).iter().all(|&v| v));
    let sym = [-2.0, -1.0, 0.0, 1.0, 2.0];
    assert!(iqr_mask(&sym, 1.0).iter().all(|&v| v));
}

#[test]
fn iqr_small_input_keeps_everything() {
    assert_eq!(iqr_fences(&[1.0, 1000.0, 3.0], 1.0), None);
    assert_eq!(iqr_mask(&[1.0, 1000.0, f64::NAN], 1.0), vec![true, true, false]);
}

#[test]
fn hampel_spike_in_constant() {
    let mut x = vec![5.0; 11];
    x[5] = 105.0;
    assert_eq!(hampel_filter(&x, 3, 3.0).unwrap(), vec![5.0; 11]);
}

#[test]
fn hampel_ramp_unchanged_and_infinite_threshold() {
    let ramp: Vec<f64> = (0..20).map(|i| 0.5 * i as f64 - 3.0).collect();
    assert_eq!(hampel_filter(&ramp, 3, 3.0).unwrap(), ramp);
    let mut spiky = ramp.clone();
    spiky[7] = 1e6;
    assert_eq!(hampel_filter(&spiky, 3, f64::INFINITY).unwrap(), spiky);
    assert!(hampel_filter(&ramp, 0, 3.0).is_err());
}

#[test]
fn resample_endpoints_and_midpoint() {
    let t = [0.0, 210.0];
    let v = [0.0, 210.0];
    assert_eq!(resample_channel(&t, &v, 0.0, 210.0, 2, 630.0), vec![0.0, 210.0]);
    assert_eq!(resample_channel(&t, &v, 0.0, 105.0, 3, 315.0), vec![0.0, 105.0, 210.0]);
}

#[test]
fn resample_masks_long_holes() {
    // 1-minute samples with a 30 minute hole, max_gap 10 minutes.
    let mut t = Vec::new();
    for i in 0..=20 {
        t.push(i as f64 * 60.0);
    }
    for i in 50..=70 {
        t.push(i as f64 * 60.0);
    }
    let v: Vec<f64> = t.iter().map(|x| x / 60.0).collect();
    let out = resample_channel(&t, &v, 0.0, 60.0, 71, 600.0);
    assert!(out[..=20].iter().all(|x| x.is_finite()));
    assert!(out[21..50].iter().all(|x| x.is_nan()));
    assert!(out[50..].iter().all(|x| x.is_finite()));
}

#[test]
fn resample_uniform_single_cell() {
    let recs = vec![rec(0.0, -80.0), rec(20.0, -70.0), rec(60.0, -70.0)];
    let s = resample_uniform(&recs, 60.0, 180.0).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s.domain(), Domain::Linear);
    // bin means are taken in the linear domain
    let rsrp = s.channel(Metric::Rsrp, 0);
    assert!((rsrp[0] - 0.5 * (1e-8 + 1e-7)).abs() < 1e-20);
    assert!((rsrp[1] - 1e-7).abs() < 1e-20);
    assert!(resample_uniform(&recs[..1], 60.0, 180.0).is_err());
}

#[test]
fn lowpass_basic_cases() {
    let c = vec![3.0; 50];
    let out = moving_average_zero_phase(&c, 4).unwrap();
    assert!(out.iter().all(|v| (v - 3.0).abs() < 1e-12));

    let alt: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let out = moving_average_zero_phase(&alt, 2).unwrap();
    for v in &out[2..38] {
        assert!(v.abs() < 1e-12);
    }
    assert!(moving_average_zero_phase(&alt, 0).is_err());
}

#[test]
fn lowpass_masked_samples_stay_masked() {
    let mut x = vec![1.0; 20];
    x[10] = f64::NAN;
    let out = moving_average_zero_phase(&x, 3).unwrap();
    assert!(out[10].is_nan());
    assert!(out.iter().enumerate().filter(|(i, _)| *i != 10).all(|(_, v)| (v - 1.0).abs() < 1e-12));
}

#[test]
fn uniform_step_checks() {
    assert_eq!(uniform_step(&[0.0, 2.0, 4.0]).unwrap(), 2.0);
    assert!(uniform_step(&[0.0, 2.0, 5.0]).is_err());
    assert!(uniform_step(&[1.0]).is_err());
}
