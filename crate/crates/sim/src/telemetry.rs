//! CSV telemetry, the weights sidecar and the summary file.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::harness::{SimResult, TelemetryRecord};

/// `(name, unit, width)` for every column group, in file order. Groups wider
/// than one expand to `name1`, `name2`, …; the attitude matrix expands to
/// `r11` … `r33` row by row.
pub const COLUMN_GROUPS: &[(&str, &str, usize)] = &[
    ("t", "s", 1),
    ("x", "m", 3),
    ("v", "m/s", 3),
    ("r", "1", 9),
    ("omega", "rad/s", 3),
    ("xd", "m", 3),
    ("ex", "m", 3),
    ("ev", "m/s", 3),
    ("eR", "1", 3),
    ("eOmega", "rad/s", 3),
    ("psi", "1", 1),
    ("f", "N", 1),
    ("M", "N*m", 3),
    ("T", "N", 4),
    ("w", "rad/s", 4),
    ("sat", "flag", 4),
    ("delta1_hat", "N", 3),
    ("delta2_hat", "N*m", 3),
    ("delta1", "N", 3),
    ("delta2", "N*m", 3),
    ("norm_W1", "1", 1),
    ("norm_V1", "1", 1),
    ("norm_W2", "1", 1),
    ("norm_V2", "1", 1),
    ("V1", "J", 1),
    ("V2", "J", 1),
    ("V", "J", 1),
    ("set_d", "1", 1),
    ("wind", "m/s", 3),
    ("alignment", "1", 1),
];

pub fn column_names() -> Vec<String> {
    let mut out = Vec::new();
    for &(name, unit, width) in COLUMN_GROUPS {
        if width == 1 {
            out.push(format!("{name}[{unit}]"));
        } else if name == "r" {
            for i in 1..=3 {
                for j in 1..=3 {
                    out.push(format!("r{i}{j}[{unit}]"));
                }
            }
        } else {
            for i in 1..=width {
                out.push(format!("{name}{i}[{unit}]"));
            }
        }
    }
    out
}

pub fn to_row(r: &TelemetryRecord) -> Vec<f64> {
    let mut row = Vec::with_capacity(column_names().len());
    let v3 = |row: &mut Vec<f64>, v: &Vector3<f64>| row.extend_from_slice(v.as_slice());
    row.push(r.t);
    v3(&mut row, &r.x);
    v3(&mut row, &r.v);
    row.extend_from_slice(&r.r);
    v3(&mut row, &r.omega);
    v3(&mut row, &r.x_d);
    v3(&mut row, &r.e_x);
    v3(&mut row, &r.e_v);
    v3(&mut row, &r.e_r);
    v3(&mut row, &r.e_omega);
    row.push(r.psi);
    row.push(r.thrust);
    v3(&mut row, &r.moment);
    row.extend_from_slice(&r.rotor_thrusts);
    row.extend_from_slice(&r.rotor_speeds);
    row.extend(r.saturated.map(|s| if s { 1.0 } else { 0.0 }));
    v3(&mut row, &r.delta1_hat);
    v3(&mut row, &r.delta2_hat);
    v3(&mut row, &r.delta1);
    v3(&mut row, &r.delta2);
    row.extend_from_slice(&r.weight_norms);
    row.extend_from_slice(&[r.lyap_v1, r.lyap_v2, r.lyap_v, r.set_d]);
    v3(&mut row, &r.wind);
    row.push(r.alignment);
    row
}

pub fn from_row(row: &[f64]) -> Option<TelemetryRecord> {
    if row.len() != column_names().len() {
        return None;
    }
    let mut vals = row.iter().copied();
    let mut s = |n: usize| -> Vec<f64> { (&mut vals).take(n).collect() };
    let v3 = |v: Vec<f64>| Vector3::new(v[0], v[1], v[2]);
    let a4 = |v: Vec<f64>| [v[0], v[1], v[2], v[3]];
    Some(TelemetryRecord {
        t: s(1)[0],
        x: v3(s(3)),
        v: v3(s(3)),
        r: s(9).try_into().ok()?,
        omega: v3(s(3)),
        x_d: v3(s(3)),
        e_x: v3(s(3)),
        e_v: v3(s(3)),
        e_r: v3(s(3)),
        e_omega: v3(s(3)),
        psi: s(1)[0],
        thrust: s(1)[0],
        moment: v3(s(3)),
        rotor_thrusts: a4(s(4)),
        rotor_speeds: a4(s(4)),
        saturated: a4(s(4)).map(|f| f != 0.0),
        delta1_hat: v3(s(3)),
        delta2_hat: v3(s(3)),
        delta1: v3(s(3)),
        delta2: v3(s(3)),
        weight_norms: a4(s(4)),
        lyap_v1: s(1)[0],
        lyap_v2: s(1)[0],
        lyap_v: s(1)[0],
        set_d: s(1)[0],
        wind: v3(s(3)),
        alignment: s(1)[0],
    })
}

/// Writes the header and every `decimate`-th record.
pub fn write_csv<W: Write>(records: &[TelemetryRecord], out: W, decimate: usize) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(column_names())?;
    for r in records.iter().step_by(decimate.max(1)) {
        w.write_record(to_row(r).iter().map(|v| format!("{v:.15e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[TelemetryRecord], path: &Path, decimate: usize) -> csv::Result<()> {
    write_csv(records, std::fs::File::create(path)?, decimate)
}

pub fn read_csv(path: &Path) -> csv::Result<Vec<TelemetryRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row: Vec<f64> = rec.iter().map(|s| s.parse().unwrap_or(f64::NAN)).collect();
        if let Some(r) = from_row(&row) {
            out.push(r);
        }
    }
    Ok(out)
}

/// `key: value` lines describing a finished run.
pub fn summary_lines(result: &SimResult) -> Vec<(String, String)> {
    let mut out =
        vec![("status".to_string(), if result.succeeded() { "ok".to_string() } else { "aborted".to_string() })];
    if let Some(a) = &result.abort {
        out.push(("abort_step".into(), a.step.to_string()));
        out.push(("abort_time".into(), format!("{:.6}", a.t)));
        out.push(("abort_reason".into(), a.error.to_string()));
    }
    out.extend(result.metrics.key_values());
    out.extend(result.report.key_values());
    out
}

pub fn write_summary<W: Write>(result: &SimResult, mut out: W) -> std::io::Result<()> {
    for (k, v) in summary_lines(result) {
        writeln!(out, "{k}: {v}")?;
    }
    Ok(())
}

/// Final network weights, one row per matrix: `network,matrix,rows,cols,values…`
/// with values listed row-major.
pub fn write_weights<W: Write>(result: &SimResult, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    for (name, net) in ["position", "attitude"].iter().zip(&result.final_weights) {
        for (label, m) in [("W", &net.w), ("V", &net.v)] {
            let mut row = vec![name.to_string(), label.to_string(), m.nrows().to_string(), m.ncols().to_string()];
            row.extend(m.transpose().iter().map(|v| format!("{v:.15e}")));
            w.write_record(row)?;
        }
    }
    w.flush()?;
    Ok(())
}
