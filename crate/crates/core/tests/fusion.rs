use tidewave::fusion::*;
use tidewave::cwt::TideBandFeature;
use tidewave::stats;

fn feature(values: Vec<f64>, id: &str) -> TideBandFeature {
    let n = values.len();
    TideBandFeature { start: 0.0, dt: 60.0, values, coi_valid: vec![true; n], provenance: id.into() }
}

fn std_of(values: Vec<f64>, id: &str) -> StandardizedFeature {
    StandardizedFeature { cell_id: id.into(), start: 0.0, dt: 60.0, values, window: 0.0, mad_zero: 0, sparse: 0 }
}

#[test]
fn constant_is_fully_masked() {
    let s = rolling_standardize(&feature(vec![3.0; 100], "a"), 1200.0, 10, WindowAlignment::Centered).unwrap();
    assert_eq!(s.valid_count(), 0);
    assert_eq!(s.mad_zero, 100);
}

#[test]
fn window_must_span_ten_steps() {
    assert!(rolling_standardize(&feature(vec![1.0; 100], "a"), 540.0, 10, WindowAlignment::Centered).is_err());
}

#[test]
fn whole_record_window_is_global() {
    let v: Vec<f64> = (0..21).map(|i| (i as f64 * 0.7).sin() + 0.01 * i as f64).collect();
    let s = rolling_standardize(&feature(v.clone(), "a"), 1e9, 10, WindowAlignment::Centered).unwrap();
    let med = stats::median(&v).unwrap();
    let mad = stats::mad_about(&v, med).unwrap();
    for (x, y) in v.iter().zip(&s.values) {
        assert!(((x - med) / mad - y).abs() < 1e-12);
    }
}

#[test]
fn lag_sign_convention() {
    let a: Vec<f64> = (0..300).map(|i| (i as f64 * 0.05).sin() + (i as f64 * 0.13).cos()).collect();
    let b: Vec<f64> = (0..300).map(|i| if i >= 3 { a[i - 3] } else { f64::NAN }).collect();
    let est = estimate_lag(&std_of(a.clone(), "a"), &std_of(b, "b"), 600.0, 0.5).unwrap();
    assert_eq!(est.accepted_shift, 3);
    let same = estimate_lag(&std_of(a.clone(), "a"), &std_of(a, "b"), 600.0, 0.5).unwrap();
    assert_eq!(same.accepted_shift, 0);
}

#[test]
fn lag_needs_overlap() {
    let a = std_of(vec![1.0, 2.0, 3.0, 4.0, 5.0], "a");
    assert!(estimate_lag(&a, &a, 600.0, 0.5).is_err());
}

#[test]
fn even_median_and_masking() {
    let a = std_of(vec![1.0, f64::NAN, 5.0], "a");
    let b = std_of(vec![3.0, f64::NAN, f64::NAN], "b");
    let f = median_fuse(&[a, b], &[0, 0]).unwrap();
    assert_eq!(f.values[0], 2.0);
    assert!(f.values[1].is_nan());
    assert_eq!(f.values[2], 5.0);
    assert_eq!(f.contributing_count, vec![2, 0, 1]);
    assert_eq!(f.availability[1], vec![true, false, false]);
    assert!(median_fuse(&[], &[]).is_err());
}

#[test]
fn resample_identity_and_midpoints() {
    let f = std_of(vec![0.0, 2.0, f64::NAN, 6.0], "a");
    let same = resample_feature(&f, 0.0, 60.0, 4);
    assert_eq!(same.values[..2], [0.0, 2.0]);
    let half = resample_feature(&f, 0.0, 30.0, 7);
    assert_eq!(half.values[1], 1.0);
    assert!(half.values[3].is_nan() && half.values[5].is_nan());
    assert_eq!(half.values[6], 6.0);
}
