use proptest::prelude::*;
use tidewave::cwt::*;
use tidewave::sim::{synth_tide, uniform_grid, EnvelopeParams, LinkGeometry, TideParams};

fn band() -> (WaveletSpec, ScaleBand) {
    let spec = WaveletSpec::default();
    let band = build_scales(&spec, 1.0 / 3600.0, 1.0 / 600.0, 4).unwrap();
    (spec, band)
}

fn series(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn transform_is_linear(x in series(300), y in series(300), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let (spec, band) = band();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let wx = cwt(&x, 0.0, 60.0, &band, &spec, Padding::Reflect).unwrap();
        let wy = cwt(&y, 0.0, 60.0, &band, &spec, Padding::Reflect).unwrap();
        let wm = cwt(&mix, 0.0, 60.0, &band, &spec, Padding::Reflect).unwrap();
        for r in 0..band.scales.len() {
            let norm = wm.coeffs[r].iter().map(|c| c.norm()).fold(1e-300, f64::max);
            for c in 0..x.len() {
                let expect = wx.coeffs[r][c] * alpha + wy.coeffs[r][c] * beta;
                prop_assert!((wm.coeffs[r][c] - expect).norm() <= 1e-9 * norm);
            }
        }
    }

    #[test]
    fn interior_coefficients_shift_with_the_input(z in series(420), m in 1usize..20) {
        let (spec, band) = band();
        let n = 400;
        let x = &z[..n];
        let y = &z[m..m + n];
        let wx = cwt(x, 0.0, 60.0, &band, &spec, Padding::Reflect).unwrap();
        let wy = cwt(y, 0.0, 60.0, &band, &spec, Padding::Reflect).unwrap();
        for (r, &a) in band.scales.iter().enumerate() {
            // columns whose whole kernel support lies inside both records
            let half = (KERNEL_HALF_WIDTH * a / 60.0).floor() as usize;
            let norm = wx.coeffs[r].iter().map(|c| c.norm()).fold(1e-300, f64::max);
            for c in half..n.saturating_sub(half + m) {
                prop_assert!((wy.coeffs[r][c] - wx.coeffs[r][c + m]).norm() <= 1e-9 * norm);
            }
        }
    }

    #[test]
    fn summed_magnitude_ignores_sign(x in series(200)) {
        let (spec, band) = band();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = summed_coefficient(&cwt(&x, 0.0, 60.0, &band, &spec, Padding::Reflect).unwrap(), "x");
        let b = summed_coefficient(&cwt(&neg, 0.0, 60.0, &band, &spec, Padding::Reflect).unwrap(), "x");
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn sampled_kernels_are_zero_mean(scale in 200.0f64..20_000.0) {
        let k = SampledKernel::new(&WaveletSpec::default(), scale, 60.0).unwrap();
        let l1: f64 = k.values().iter().map(|v| v.norm()).sum();
        let sum: num_complex::Complex64 = k.values().iter().sum();
        prop_assert!(sum.norm() < 1e-8 * l1);
    }
}

#[test]
fn flat_tide_is_degenerate() {
    let spec = WaveletSpec::default();
    let grid = uniform_grid(0.0, 86400.0, 60.0).unwrap();
    let tide = synth_tide(&TideParams { amplitude: 0.0, mean: 0.2, ..Default::default() }, &grid).unwrap();
    let env = EnvelopeParams::new(3.0, 1.0, 5.0).unwrap();
    let rep = verify_rate_lemma(&tide, &env, &tide_band(&spec), &spec).unwrap();
    assert!(rep.degenerate);
    assert!(rep.summed_correlation.is_none());
    assert!(rep.max_abs_coefficient < 1e-9);
}

#[test]
fn summed_feature_tracks_tide_rate_when_fringes_enter_the_band() {
    let spec = WaveletSpec::default();
    let k = LinkGeometry::river_los().spatial_rate(0).unwrap();
    let grid = uniform_grid(0.0, 3.0 * 86400.0, 60.0).unwrap();
    let mean = std::f64::consts::FRAC_PI_2 / k;
    let tide = synth_tide(&TideParams { amplitude: 2.0, mean, ..Default::default() }, &grid).unwrap();
    let env = EnvelopeParams::new(2.0, 1.0, k).unwrap();
    let rep = verify_rate_lemma(&tide, &env, &tide_band(&spec), &spec).unwrap();
    assert!(rep.rate_correlation.unwrap() > 0.95, "{:?}", rep.rate_correlation);
    assert!(rep.minima >= 8);
    assert!(rep.minima_max_offset.unwrap() <= 2, "{:?}", rep.minima_max_offset);
}
