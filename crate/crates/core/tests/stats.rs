use tidewave::stats::*;

#[test]
fn median_odd_even() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    assert_eq!(median(&[f64::NAN, 5.0]), Some(5.0));
    assert_eq!(median(&[]), None);
}

#[test]
fn quantiles_interpolate() {
    let s = [1.0, 2.0, 3.0, 4.0, 100.0];
    assert_eq!(quantile_sorted(&s, 0.25), 2.0);
    assert_eq!(quantile_sorted(&s, 0.75), 4.0);
    assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
}

#[test]
fn pearson_perfect_and_degenerate() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [2.0, 4.0, 6.0, 8.0];
    assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    assert!(pearson(&x, &[1.0; 4]).is_none());
}
