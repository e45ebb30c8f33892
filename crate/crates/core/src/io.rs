//! Plain-text file formats: CSV tables (LF line endings, `.` decimal point,
//! empty field for masked values), JSON sidecars and the scalogram export.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::cwt::{Scalogram, TideBandFeature};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::fusion::FusedFeature;
use crate::ingest::{Domain, Metric, MetricRecord, MetricSeries, RAW_LOG_HEADER};
use crate::sim::TideSeries;

/// Shortest round-trip decimal form; NaN becomes an empty field.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn push_row<I: IntoIterator<Item = String>>(out: &mut String, fields: I) {
    let mut first = true;
    for f in fields {
        if !first {
            out.push(',');
        }
        out.push_str(&f);
        first = false;
    }
    out.push('\n');
}

/// Header plus numeric rows; empty fields parse as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        push_row(&mut out, self.header.iter().cloned());
        for r in &self.rows {
            push_row(&mut out, r.iter().map(|&v| fmt_f64(v)));
        }
        out
    }
}

pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .map(|f| {
                let f = f.trim();
                if f.is_empty() {
                    Ok(f64::NAN)
                } else {
                    f.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("not a number: {f:?}") })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_table_file(path: &Path) -> Result<Table> {
    read_table(std::fs::File::open(path)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

// ---------------------------------------------------------------------------
// Tide

pub fn tide_to_csv(tide: &TideSeries) -> String {
    let mut out = String::from("t_unix_s,h_m\n");
    for (t, h) in tide.times().iter().zip(tide.heights()) {
        push_row(&mut out, [fmt_f64(*t), fmt_f64(*h)]);
    }
    out
}

pub fn tide_from_table(table: &Table) -> Result<TideSeries> {
    TideSeries::new(table.column("t_unix_s")?, table.column("h_m")?)
}

// ---------------------------------------------------------------------------
// Metric series

pub fn metric_series_to_csv(series: &MetricSeries) -> String {
    let mut out = String::new();
    let chans: Vec<(Metric, usize)> = (0..series.antennas()).flat_map(|a| Metric::ALL.map(|m| (m, a))).collect();
    push_row(&mut out, std::iter::once("t_unix_s".to_string()).chain(chans.iter().map(|&(m, a)| series.column_name(m, a))));
    for i in 0..series.len() {
        push_row(
            &mut out,
            std::iter::once(fmt_f64(series.time(i))).chain(chans.iter().map(|&(m, a)| fmt_f64(series.channel(m, a)[i]))),
        );
    }
    out
}

/// Splits `<cell>_ant<k>_<metric>_<unit>` into its parts.
pub fn parse_channel_name(name: &str) -> Option<(String, usize, Metric, Domain)> {
    let mut parts = name.rsplitn(4, '_');
    let unit = parts.next()?;
    let metric = match parts.next()? {
        "rsrp" => Metric::Rsrp,
        "rssi" => Metric::Rssi,
        "rsrq" => Metric::Rsrq,
        _ => return None,
    };
    let antenna = parts.next()?.strip_prefix("ant")?.parse().ok()?;
    let cell = parts.next()?.to_string();
    let domain = match unit {
        "dbm" | "db" => Domain::Db,
        "mw" | "ratio" => Domain::Linear,
        _ => return None,
    };
    (metric.unit(domain) == unit).then_some((cell, antenna, metric, domain))
}

/// Splits a wide metric table into one series per cell.
pub fn metric_series_from_table(table: &Table) -> Result<Vec<MetricSeries>> {
    let times = table.column("t_unix_s")?;
    let mut cells: Vec<(String, Domain, Vec<(usize, Metric, usize)>)> = Vec::new();
    for (j, name) in table.header.iter().enumerate() {
        if name == "t_unix_s" {
            continue;
        }
        let (cell, antenna, metric, domain) =
            parse_channel_name(name).ok_or_else(|| Error::Parse { line: 1, message: format!("unrecognized metric column '{name}'") })?;
        match cells.iter_mut().find(|c| c.0 == cell) {
            Some(c) if c.1 != domain => {
                return Err(Error::Parse { line: 1, message: format!("cell '{cell}' mixes dB and linear columns") });
            }
            Some(c) => c.2.push((j, metric, antenna)),
            None => cells.push((cell, domain, vec![(j, metric, antenna)])),
        }
    }
    cells
        .into_iter()
        .map(|(cell, domain, cols)| {
            let antennas = cols.iter().map(|c| c.2).max().unwrap_or(0) + 1;
            let mut s = MetricSeries::from_times(cell, &times, antennas, domain)?;
            for (j, metric, antenna) in cols {
                for (dst, row) in s.channel_mut(metric, antenna).iter_mut().zip(&table.rows) {
                    *dst = row[j];
                }
            }
            Ok(s)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Raw logs

pub fn records_to_csv(records: &[MetricRecord]) -> String {
    let mut out = String::new();
    push_row(&mut out, RAW_LOG_HEADER.map(String::from));
    for r in records {
        push_row(
            &mut out,
            [fmt_f64(r.timestamp), r.cell_id.clone(), r.antenna.to_string(), fmt_f64(r.rsrp), fmt_f64(r.rssi), fmt_f64(r.rsrq)],
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Tide-band features

pub fn feature_to_csv(f: &TideBandFeature) -> String {
    let mut out = String::from("t_unix_s,s,coi_valid\n");
    for i in 0..f.len() {
        push_row(&mut out, [fmt_f64(f.time(i)), fmt_f64(f.values[i]), u8::from(f.coi_valid[i]).to_string()]);
    }
    out
}

pub fn feature_from_table(table: &Table, provenance: &str) -> Result<TideBandFeature> {
    let times = table.column("t_unix_s")?;
    let dt = crate::ingest::uniform_step(&times)?;
    let values = table.column("s")?;
    let coi_valid = match table.column_index("coi_valid") {
        Ok(j) => table.rows.iter().map(|r| r[j] == 1.0).collect(),
        Err(_) => values.iter().map(|v| v.is_finite()).collect(),
    };
    Ok(TideBandFeature { start: times[0], dt, values, coi_valid, provenance: provenance.to_string() })
}

pub fn fused_to_csv(f: &FusedFeature) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        ["t_unix_s".to_string(), "s_fused".into(), "contributing_count".into()]
            .into_iter()
            .chain(f.cell_ids.iter().map(|c| format!("avail_{c}"))),
    );
    for i in 0..f.len() {
        push_row(
            &mut out,
            [fmt_f64(f.time(i)), fmt_f64(f.values[i]), f.contributing_count[i].to_string()]
                .into_iter()
                .chain(f.availability.iter().map(|a| u8::from(a[i]).to_string())),
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Feature matrices and predictions

pub fn feature_matrix_to_csv(m: &FeatureMatrix) -> String {
    let mut out = String::new();
    push_row(&mut out, std::iter::once("t_unix_s".to_string()).chain(m.column_names().iter().cloned()));
    for r in 0..m.n_rows() {
        push_row(&mut out, std::iter::once(fmt_f64(m.times()[r])).chain(m.row(r).iter().map(|&v| fmt_f64(v))));
    }
    out
}

pub fn feature_matrix_from_table(table: &Table) -> Result<FeatureMatrix> {
    let tj = table.column_index("t_unix_s")?;
    let columns: Vec<String> = table.header.iter().enumerate().filter(|(j, _)| *j != tj).map(|(_, h)| h.clone()).collect();
    let times = table.rows.iter().map(|r| r[tj]).collect();
    let data = table.rows.iter().flat_map(|r| r.iter().enumerate().filter(|(j, _)| *j != tj).map(|(_, v)| *v)).collect();
    FeatureMatrix::new(times, columns, data)
}

pub fn predictions_to_csv(times: &[f64], y_true: Option<&[f64]>, y_hat: &[f64]) -> String {
    let mut out = String::new();
    match y_true {
        Some(y) => {
            out.push_str("t_unix_s,y_true_m,y_hat_m\n");
            for i in 0..times.len() {
                push_row(&mut out, [fmt_f64(times[i]), fmt_f64(y[i]), fmt_f64(y_hat[i])]);
            }
        }
        None => {
            out.push_str("t_unix_s,y_hat_m\n");
            for i in 0..times.len() {
                push_row(&mut out, [fmt_f64(times[i]), fmt_f64(y_hat[i])]);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Scalogram

#[derive(Debug, Clone, Serialize)]
pub struct ScalogramMeta {
    pub n_scales: usize,
    pub n_times: usize,
    pub start: f64,
    pub dt: f64,
    pub scale_unit: &'static str,
    pub pseudo_freqs_hz: Vec<f64>,
    pub coi_s: Vec<f64>,
    pub center_freq: f64,
    pub layout: &'static str,
}

/// `(scales.csv, times.csv, coeffs_mag.csv, scalogram.json)` contents.
pub fn scalogram_export(s: &Scalogram, center_freq: f64) -> Result<[String; 4]> {
    let mut scales = String::from("scale_s,pseudo_freq_hz,coi_s\n");
    for i in 0..s.scales.len() {
        push_row(&mut scales, [fmt_f64(s.scales[i]), fmt_f64(s.pseudo_freqs[i]), fmt_f64(s.coi[i])]);
    }
    let mut times = String::from("t_unix_s\n");
    for i in 0..s.len() {
        let _ = writeln!(times, "{}", fmt_f64(s.time(i)));
    }
    let mut mags = String::new();
    for row in &s.coeffs {
        push_row(&mut mags, row.iter().map(|c| fmt_f64(c.norm())));
    }
    let meta = ScalogramMeta {
        n_scales: s.scales.len(),
        n_times: s.len(),
        start: s.start,
        dt: s.dt,
        scale_unit: "s",
        pseudo_freqs_hz: s.pseudo_freqs.clone(),
        coi_s: s.coi.clone(),
        center_freq,
        layout: "coeffs_mag.csv: one row per scale (scales.csv order), one column per time (times.csv order)",
    };
    Ok([scales, times, mags, to_json_pretty(&meta)?])
}
