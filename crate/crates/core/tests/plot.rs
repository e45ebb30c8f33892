use tidewave::plot::*;
use tidewave::cwt::TideBandFeature;
use tidewave::detector::{DetectionEvent, EventKind};

#[test]
fn feature_plot_has_markers_and_source() {
    let f = TideBandFeature { start: 0.0, dt: 60.0, values: vec![1.0, 0.5, 2.0], coi_valid: vec![true; 3], provenance: "c".into() };
    let ev = [
        DetectionEvent { time: 60.0, kind: EventKind::HighLowWater, value: 0.5, emit_time: 360.0 },
        DetectionEvent { time: 120.0, kind: EventKind::MaxFlow, value: 2.0, emit_time: 420.0 },
    ];
    let svg = feature_svg(&f, &ev, "s.csv -- test");
    assert!(svg.contains("<!-- source: s.csv - - test -->"));
    assert!(svg.contains("<circle") && svg.contains("fill=\"black\""));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn lines_break_at_gaps() {
    let svg = lines_svg("t", "y", &[0.0, 1.0, 2.0, 3.0], &[("a", &[1.0, f64::NAN, 2.0, 3.0])], "x");
    assert_eq!(svg.matches("<polyline").count(), 2);
}
