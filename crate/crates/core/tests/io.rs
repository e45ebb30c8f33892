use tidewave::io::*;
use tidewave::ingest::{Domain, Metric, MetricSeries};

#[test]
fn channel_names_parse() {
    assert_eq!(parse_channel_name("cell_A_ant2_rsrq_db"), Some(("cell_A".into(), 2, Metric::Rsrq, Domain::Db)));
    assert_eq!(parse_channel_name("c_ant0_rsrp_mw"), Some(("c".into(), 0, Metric::Rsrp, Domain::Linear)));
    assert_eq!(parse_channel_name("c_ant0_rsrp_db"), None);
    assert_eq!(parse_channel_name("h_m"), None);
}

#[test]
fn metric_series_round_trip() {
    let mut s = MetricSeries::new("c1", 100.0, 60.0, 3, 2, Domain::Db).unwrap();
    for (m, a) in [(Metric::Rsrp, 0), (Metric::Rssi, 1), (Metric::Rsrq, 0)] {
        s.channel_mut(m, a).copy_from_slice(&[-80.5, f64::NAN, -79.25]);
    }
    let csv = metric_series_to_csv(&s);
    assert!(csv.starts_with("t_unix_s,c1_ant0_rsrp_dbm,c1_ant0_rssi_dbm,c1_ant0_rsrq_db,"));
    let back = metric_series_from_table(&read_table(csv.as_bytes()).unwrap()).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(metric_series_to_csv(&back[0]), csv);
}

#[test]
fn fmt_is_round_trip() {
    for v in [0.1, -78.123456789012345, 1e-12, 12345.0] {
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }
    assert_eq!(fmt_f64(f64::NAN), "");
}
